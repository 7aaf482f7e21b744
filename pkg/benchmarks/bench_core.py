"""Time the compiled core against the numpy fallback.

Usage::

    python3 benchmarks/bench_core.py [--repeat 5] [--size small|large]

Each kernel is run on identical inputs by both backends; the script checks
that the outputs agree before reporting the best-of-``repeat`` timings.
"""

import argparse
import timeit

import numpy as np
from scipy.special import gammaln

from fockdpp import _backend
from fockdpp.kernel import build_kernel
from fockdpp.samplers import sample_dpp
from fockdpp.weights import PowerAlpha, RadiusField

# (series points, series length, planar points, sampler rank)
SIZES = {"small": (2_000, 128, 2_000, 64), "large": (20_000, 512, 50_000, 256)}
BATCH = 64


def make_inputs(size, seed=0):
    m, N, npts, rank = SIZES[size]
    rng = np.random.default_rng(seed)
    # Gaussian-weight coefficients c_n = n! / 2**n
    n = np.arange(N)
    log_c = gammaln(n + 1) - n * np.log(2.0)
    # |w| <= 3 keeps the cancellation in the oscillating series below 1e6
    w = rng.uniform(0, 3.0, m) * np.exp(2j * np.pi * rng.random(m))
    series = (np.log(np.abs(w)), np.angle(w), log_c)

    r = np.sqrt(rng.random(npts)) * 20.0
    t = 2 * np.pi * rng.random(npts)
    nn = (r * np.cos(t), r * np.sin(t))

    # one sampler batch against k orthonormal rows; nothing is accepted, so every
    # proposal is evaluated (the worst case for the early-exit loop)
    k = rank // 2
    log_r = np.log(np.sqrt(rng.random(BATCH)) * np.sqrt(rank / 2.0))
    theta = 2 * np.pi * rng.random(BATCH)
    half_log_mu = np.log(2 / np.pi) / 2 - np.exp(2 * log_r)
    Q, _ = np.linalg.qr(rng.normal(size=(rank, rank)) + 1j * rng.normal(size=(rank, rank)))
    V = np.ascontiguousarray(Q.T)
    bound = np.full(BATCH, 1e6)
    u = np.ones(BATCH)
    hkpv = (log_r, theta, half_log_mu, bound, u, log_c[:rank], V, k)
    return {"log_kernel_series": series, "nn_distances": nn, "hkpv_first_accept": hkpv}


def time_sampler(backends, rank, repeat):
    """Best time of a full projection sample under each backend."""
    rf = RadiusField(PowerAlpha(2.0))
    k = build_kernel(rf.weight, rf, np.sqrt(rank), rank=rank)
    saved = _backend.hkpv_first_accept
    out = {}
    try:
        for label, mod in backends.items():
            _backend.hkpv_first_accept = mod.hkpv_first_accept
            out[label] = min(timeit.repeat(lambda: sample_dpp(k, seed=1), number=1,
                                           repeat=repeat))
    finally:
        _backend.hkpv_first_accept = saved
    return out


def row(name, times):
    py, cy = times["python"], times.get("cython")
    print("%-20s %12.2f %12s %9s" % (
        name, py * 1e3, "-" if cy is None else "%.2f" % (cy * 1e3),
        "-" if cy is None else "%.1fx" % (py / cy)))


def check(name, a, b):
    for x, y in zip(a, b):
        if x is None or y is None:
            assert x is None and y is None, name
        elif np.ndim(x):
            np.testing.assert_allclose(x, y, rtol=1e-8, atol=1e-10, err_msg=name)
        else:
            assert x == y, name


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", choices=sorted(SIZES), default="small")
    args = ap.parse_args(argv)

    backends = _backend.available()
    if "cython" not in backends:
        print("compiled core not built; timing the fallback only")
    inputs = make_inputs(args.size)
    print("%-20s %12s %12s %9s" % ("kernel", "python [ms]", "cython [ms]", "speedup"))
    for name, arg in inputs.items():
        times, outs = {}, {}
        for label, mod in backends.items():
            fn = getattr(mod, name)
            outs[label] = fn(*arg)
            times[label] = min(timeit.repeat(lambda: fn(*arg), number=1, repeat=args.repeat))
        if len(outs) == 2:
            check(name, outs["python"], outs["cython"])
        row(name, times)
    rank = SIZES[args.size][3]
    row("sample_dpp (N=%d)" % rank, time_sampler(backends, rank, args.repeat))


if __name__ == "__main__":
    main()
