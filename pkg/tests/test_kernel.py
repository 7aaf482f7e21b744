import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import logsumexp

from fockdpp.errors import ConfigError, RankCapError, WindowError
from fockdpp.kernel import (compute_moments, decay_exponent, eval_kernel,
                            kernel_diag_check, load_basis, log_kernel, log_kernel_diag,
                            metric_dB_proxy, metric_dK, save_basis, truncation_rank_for_window)
from fockdpp._quadrature import gauss_legendre, panel_rule

from conftest import kernel, radius_field


def gaussian_rank_oracle(R, tol):
    """Smallest N with sum_{n>=N} t_n <= tol sum_{n<N} t_n, t_n = (2 R**2)**n / n!."""
    n = np.arange(4000)
    t = n * math.log(2 * R * R) - np.array([math.lgamma(k + 1) for k in n])
    for N in range(1, n.size):
        if logsumexp(t[N:]) - logsumexp(t[:N]) <= math.log(tol):
            return N
    raise AssertionError("oracle did not terminate")


def moment_oracle(alpha, n):
    """c_n = int r**(2n+1) e**(-2 phi) rho**-2 dr / int r e**(-2 phi) rho**-2 dr.

    Uses the pointwise root-finder for rho rather than the tabulated profile.
    """
    rf = radius_field(alpha)

    def f(r, k):
        return r ** (2 * k + 1) * math.exp(-2 * r ** alpha) / float(rf.rho(r)) ** 2

    brk = [0.0, 1.0, 3.0, 8.0, 20.0]
    num = sum(quad(f, a, b, args=(n,), epsrel=1e-11, limit=200)[0]
              for a, b in zip(brk[:-1], brk[1:]))
    den = sum(quad(f, a, b, args=(0,), epsrel=1e-11, limit=200)[0]
              for a, b in zip(brk[:-1], brk[1:]))
    return num / den


# --- quadrature helpers ------------------------------------------------------------

def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(6)
    for k in range(12):
        exact = (1 - (-1) ** (k + 1)) / (k + 1)
        assert np.sum(w * x ** k) == pytest.approx(exact, abs=1e-14)


def test_panel_rule_integrates_exp():
    x, w = panel_rule(np.linspace(0, 2, 5), 10)
    assert np.sum(w * np.exp(x)) == pytest.approx(math.e ** 2 - 1, rel=1e-14)


# --- moments -----------------------------------------------------------------------

def test_gaussian_moments_factorial():
    basis = compute_moments(radius_field(2.0).weight, radius_field(2.0), 40)
    expected = [math.lgamma(n + 1) - n * math.log(2) for n in range(40)]
    assert np.allclose(basis.log_moments, expected, atol=1e-9)
    assert basis.log_moments[0] == 0.0


@pytest.mark.parametrize("alpha", [1.0, 1.5])
def test_moments_match_pointwise_oracle(alpha):
    basis = compute_moments(radius_field(alpha).weight, radius_field(alpha), 4)
    for n in (1, 2, 3):
        assert basis.log_moments[n] == pytest.approx(math.log(moment_oracle(alpha, n)),
                                                     abs=1e-6)


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0])
def test_moments_log_convex(alpha):
    lc = compute_moments(radius_field(alpha).weight, radius_field(alpha), 200).log_moments
    assert np.all(lc[2:] - 2 * lc[1:-1] + lc[:-2] >= -1e-8)


def test_mu_is_probability():
    basis = kernel(1.5, 8.0).basis
    # rho has a kink at the crossing radius, so it must be a panel edge
    edges = np.sort(np.append(np.linspace(0, 12, 49), basis.radius_field.crossing_radius))
    r, w = panel_rule(edges, 16)
    total = np.sum(w * 2 * np.pi * r * np.exp(basis.log_mu_density(r)))
    assert total == pytest.approx(1.0, rel=1e-8)


def test_compute_moments_rejects_zero_rank():
    with pytest.raises(ConfigError):
        compute_moments(radius_field(2.0).weight, radius_field(2.0), 0)


def test_basis_roundtrip(tmp_path):
    basis = kernel(1.5, 4.0).basis
    p = tmp_path / "basis.csv"
    save_basis(p, basis, extra={"alpha": 1.5})
    back = load_basis(p, basis.weight, basis.radius_field)
    assert np.array_equal(back.log_moments, basis.log_moments)
    assert back.log_c_phi == basis.log_c_phi


def test_load_basis_rejects_garbage(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("n,ln_c_n\n0,0\n")
    with pytest.raises(ConfigError):
        load_basis(p, None, None)


# --- truncation ----------------------------------------------------------------------

@pytest.mark.parametrize("R,tol", [(3.0, 1e-8), (4.0, 1e-10), (6.0, 1e-12)])
def test_gaussian_truncation_rank(R, tol):
    rf = radius_field(2.0)
    assert truncation_rank_for_window(rf.weight, rf, R, tol) == gaussian_rank_oracle(R, tol)


def test_truncation_rank_small_window():
    rf = radius_field(1.5)
    assert truncation_rank_for_window(rf.weight, rf, 0.0, 1e-10) == 1
    assert truncation_rank_for_window(rf.weight, rf, 1e-9, 1e-10) <= 2


def test_truncation_rank_alpha_one_under_cap():
    rf = radius_field(1.0)
    N = truncation_rank_for_window(rf.weight, rf, 20.0, 1e-6)
    assert 1 < N <= 2048


def test_truncation_rank_cap():
    rf = radius_field(2.0)
    with pytest.raises(RankCapError):
        truncation_rank_for_window(rf.weight, rf, 40.0, 1e-10, cap=512)


def test_truncation_rank_rejects_bad_tolerance():
    rf = radius_field(2.0)
    with pytest.raises(ConfigError):
        truncation_rank_for_window(rf.weight, rf, 1.0, 0.0)


def test_diag_error_bound_respected():
    k = kernel(1.5, 6.0)
    assert k.diag_error_bound <= 1e-10
    full = kernel(1.5, 6.0, rank=k.rank + 80)
    z = 6.0
    rel = 1 - math.exp(log_kernel_diag(k, z) - log_kernel_diag(full, z))
    assert 0 <= rel <= 1.01 * k.diag_error_bound + 1e-15


# --- kernel values -------------------------------------------------------------------

def test_gaussian_kernel_values():
    k = kernel(2.0, 3.0, rank=64)
    assert eval_kernel(k, 0, 0) == pytest.approx(1.0, abs=1e-15)
    assert eval_kernel(k, 1, 1).real == pytest.approx(math.e ** 2, rel=1e-10)
    z, w = 1 + 0.5j, -0.3 + 1.2j
    assert eval_kernel(k, z, w) == pytest.approx(np.exp(2 * z * np.conj(w)), rel=1e-10)


def test_kernel_window_enforced():
    k = kernel(2.0, 3.0)
    with pytest.raises(WindowError):
        eval_kernel(k, 3.5, 0)


def test_eval_kernel_overflow_guard():
    k = kernel(1.0, 400.0, tol=1e-6)
    with pytest.raises(OverflowError):
        eval_kernel(k, 400.0, 400.0)
    assert np.isfinite(log_kernel(k, 400.0, 400.0).real)


@settings(max_examples=80, deadline=None)
@given(st.complex_numbers(max_magnitude=5.0), st.complex_numbers(max_magnitude=5.0))
def test_hermitian_and_cauchy_schwarz(z, w):
    k = kernel(1.5, 5.0)
    a, b = log_kernel(k, z, w), log_kernel(k, w, z)
    # the oscillating series loses digits in proportion to its largest term
    n = np.arange(k.rank)
    top = np.max(n * np.log(max(abs(z * w), 1e-300)) - k.log_moments)
    tol = 1e-13 * math.exp(max(top - a.real, 0.0)) + 1e-12
    assert a.real == pytest.approx(b.real, abs=tol)
    assert np.exp(1j * a.imag) == pytest.approx(np.exp(-1j * b.imag), abs=tol)
    assert 2 * a.real <= log_kernel_diag(k, z) + log_kernel_diag(k, w) + 1e-9


def test_gram_positive_semidefinite():
    k = kernel(1.5, 5.0)
    rng = np.random.default_rng(3)
    z = 4 * np.sqrt(rng.random(30)) * np.exp(2j * np.pi * rng.random(30))
    lk = log_kernel(k, z[:, None], z[None, :])
    d = log_kernel_diag(k, z)
    G = np.exp(lk - 0.5 * (d[:, None] + d[None, :]))
    assert np.allclose(G, G.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(G).min() >= -1e-10


@pytest.mark.parametrize("alpha,R,m", [(2.0, 6.0, 3), (1.5, 12.0, 2)])
def test_reproducing_property(alpha, R, m):
    """int zeta**m K(z, zeta) dmu(zeta) reproduces z**m."""
    k = kernel(alpha, R)
    r, wr = panel_rule(np.linspace(0, R, 4 * int(R) + 1), 20)
    th = 2 * np.pi * np.arange(64) / 64
    zeta = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    dA = (wr[:, None] * r[:, None] * np.full(64, 2 * np.pi / 64)).ravel()
    mu = np.exp(k.basis.log_mu_density(np.abs(zeta)))
    for z in (0.5 + 0.5j, 2.0, -1.0j * R / 4):
        K = eval_kernel(k, z, zeta)
        val = np.sum(zeta ** m * K * mu * dA)
        assert val == pytest.approx(z ** m, rel=1e-8, abs=1e-10)


# --- diagonal bracket ----------------------------------------------------------------

def test_diag_bracket_gaussian():
    k = kernel(2.0, 5.0)
    b = kernel_diag_check(k, [0, 1, 2 + 2j, 4j])
    assert b.c_low == pytest.approx(1.0, rel=1e-9)
    assert b.c_high == pytest.approx(1.0, rel=1e-9)


def test_diag_bracket_alpha_one():
    k = kernel(1.0, 20.0, tol=1e-8)
    rng = np.random.default_rng(0)
    z = 20 * np.sqrt(rng.random(200)) * np.exp(2j * np.pi * rng.random(200))
    b = kernel_diag_check(k, np.append(z, 0))
    assert 0 < b.c_low <= b.c_high < 50 * b.c_low


# --- metrics ---------------------------------------------------------------------------

def test_dK_gaussian():
    k = kernel(2.0, 3.0)
    assert metric_dK(k, 0, 1) == pytest.approx(math.sqrt(1 - math.exp(-2)), rel=1e-10)
    assert metric_dK(k, 1 + 1j, 1 + 1j) == pytest.approx(0.0, abs=1e-7)


def test_dK_symmetric_and_bounded():
    k = kernel(1.5, 5.0)
    rng = np.random.default_rng(1)
    z = 4 * (rng.random(50) - 0.5) + 4j * (rng.random(50) - 0.5)
    w = 4 * (rng.random(50) - 0.5) + 4j * (rng.random(50) - 0.5)
    a, b = metric_dK(k, z, w), metric_dK(k, w, z)
    assert np.allclose(a, b, atol=1e-12)
    assert np.all((a >= 0) & (a <= 1))


def test_dB_gaussian():
    rf = radius_field(2.0)
    assert metric_dB_proxy(rf, 0, 1) == pytest.approx(2 * math.sqrt(math.pi), rel=1e-7)


def test_dB_far_field_unit_step():
    rf = radius_field(1.5)
    r = float(rf.rho(100))
    assert metric_dB_proxy(rf, 100, 100 + r) == pytest.approx(1.0, rel=0.01)


def test_dB_triangle_inequality():
    rf = radius_field(1.5)
    a, b, c = 1 + 1j, 5 - 2j, -3 + 4j
    assert metric_dB_proxy(rf, a, c) <= metric_dB_proxy(rf, a, b) + metric_dB_proxy(rf, b, c)


def test_decay_exponent_positive():
    k = kernel(1.5, 12.0)
    rng = np.random.default_rng(2)
    z = 8 * (rng.random(60) - 0.5) + 8j * (rng.random(60) - 0.5)
    w = z + 3 * np.exp(2j * np.pi * rng.random(60)) * rng.random(60)
    eps, n = decay_exponent(k, z, w)
    assert n >= 5 and eps > 0
