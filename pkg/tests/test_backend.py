import os
import subprocess
import sys

import numpy as np
import pytest

from fockdpp import _backend, _fallback, samplers
from fockdpp.errors import EnvelopeError
from fockdpp.samplers import sample_dpp

from conftest import kernel

BACKENDS = _backend.available()
needs_core = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled core not built")


@needs_core
def test_log_kernel_series_agree():
    core = BACKENDS["cython"]
    rng = np.random.default_rng(0)
    logc = kernel(1.5, 10.0).log_moments
    law = np.append(rng.uniform(-5, 3, 200), -np.inf)
    arg = rng.uniform(-np.pi, np.pi, law.size)
    a = core.log_kernel_series(law, arg, logc)
    b = _fallback.log_kernel_series(law, arg, logc)
    # rounding is amplified by the ratio of the largest term to the sum
    n = np.arange(logc.size)
    top = np.max(n[None, :] * np.where(np.isinf(law), 0, law)[:, None] - logc, axis=1)
    tol = 1e-13 * np.exp(np.maximum(top - b[0], 0.0)) + 1e-12
    assert np.all(np.abs(a[0] - b[0]) <= tol)
    assert np.all(np.abs(np.exp(1j * a[1]) - np.exp(1j * b[1])) <= tol)
    assert a[0][-1] == b[0][-1] == 0.0


@needs_core
def test_nn_distances_agree():
    core = BACKENDS["cython"]
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=500), rng.normal(size=500)
    da, ia = core.nn_distances(x, y)
    db, ib = _fallback.nn_distances(x, y)
    assert np.allclose(da, db, rtol=1e-14)
    assert np.array_equal(ia, ib)
    d1, i1 = core.nn_distances(np.zeros(1), np.zeros(1))
    assert d1[0] == np.inf and i1[0] == -1


def _proposals(k, rng, size):
    env = samplers._get_envelope(k, 256)
    r, theta, bound, u = env.propose(rng, size)
    log_r = np.maximum(np.log(r), -700.0)
    return log_r, theta, 0.5 * k.basis.log_mu_density(r), bound, u, env.logc


@needs_core
@pytest.mark.parametrize("step", [0, 1, 7, 30])
def test_hkpv_first_accept_agree(step):
    core = BACKENDS["cython"]
    k = kernel(1.5, 5.0, rank=40)
    rng = np.random.default_rng(step)
    Q, _ = np.linalg.qr(rng.normal(size=(40, 40)) + 1j * rng.normal(size=(40, 40)))
    V = np.ascontiguousarray(Q.T)
    args = _proposals(k, rng, 64)
    ja, ra = core.hkpv_first_accept(*args, V, step)
    jb, rb = _fallback.hkpv_first_accept(*args, V, step)
    assert ja == jb
    if ja >= 0:
        assert np.allclose(ra, rb, atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_envelope_violation_detected(name):
    impl = BACKENDS[name]
    k = kernel(2.0, 3.0, rank=8)
    args = list(_proposals(k, np.random.default_rng(0), 16))
    args[3] = np.full(16, 1e-12)  # an envelope far below the density
    with pytest.raises(EnvelopeError):
        impl.hkpv_first_accept(*args, np.zeros((8, 8), complex), 0)


@needs_core
def test_samples_identical_across_backends(monkeypatch):
    k = kernel(1.5, 6.0, rank=72)
    a = sample_dpp(k, seed=4)
    monkeypatch.setattr(_backend, "hkpv_first_accept", _fallback.hkpv_first_accept)
    b = sample_dpp(k, seed=4)
    assert np.allclose(a.points, b.points, atol=1e-12)


@pytest.mark.parametrize("choice,expected", [("python", "python"), ("auto", None)])
def test_environment_selects_backend(choice, expected):
    env = dict(os.environ, FOCKDPP_BACKEND=choice)
    code = "from fockdpp import _backend; print(_backend.NAME)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.strip()
    assert out == (expected or _backend.NAME)


def test_unknown_backend_rejected():
    env = dict(os.environ, FOCKDPP_BACKEND="fortran")
    res = subprocess.run([sys.executable, "-c", "import fockdpp._backend"], env=env,
                         capture_output=True, text=True)
    assert res.returncode != 0 and "fortran" in res.stderr
