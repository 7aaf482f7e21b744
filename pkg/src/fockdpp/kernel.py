"""Reproducing kernel of the weighted Fock space and derived metrics.

The space is ``L^2`` holomorphic functions for the measure

    mu = c_phi exp(-2 phi) rho**-2 dm,

with ``c_phi`` normalising ``mu`` to a probability measure.  For a radial
weight the monomials are orthogonal and the kernel is the power series

    K(z, w) = sum_n (z conj(w))**n / c_n,   c_n = int |z|**(2n) dmu,

so ``c_0 = 1``.  A rank-``N`` truncation is accurate on a window
``|z| <= R`` whose size is set by the tail of the series.

Kernel values grow like ``exp(2 phi)`` and overflow double precision quickly,
so every evaluation is done in log/phase form; :func:`log_kernel` is the
primary interface and :func:`eval_kernel` exponentiates when that is safe.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from . import _backend
from ._quadrature import log_radial_integrals, panel_rule
from .errors import (ConfigError, InsufficientDataError, NumericError,
                     QuadratureError, RankCapError, TailDivergenceError,
                     WindowError)
from .weights import RadiusField

__all__ = [
    "KernelBasis", "TruncatedKernel", "compute_moments", "truncation_rank_for_window",
    "build_kernel", "log_kernel", "eval_kernel", "kernel_diag_check", "metric_dK",
    "metric_dB_proxy", "decay_exponent", "save_basis", "load_basis", "DiagBracket",
]

DEFAULT_RANK_CAP = 2048
_MAX_GRID_RADIUS = 1e7


@dataclass(frozen=True)
class KernelBasis:
    """Normalising moments of the monomial basis.

    Attributes
    ----------
    weight : Weight
    radius_field : RadiusField
    log_moments : ndarray
        ``log c_n`` for ``n < rank``; ``log_moments[0] == 0``.
    log_c_phi : float
        Log of the constant that makes ``mu`` a probability measure.
    """

    weight: object
    radius_field: RadiusField
    log_moments: np.ndarray
    log_c_phi: float

    @property
    def rank(self):
        return int(self.log_moments.size)

    def truncated(self, rank):
        """Basis restricted to the first ``rank`` monomials."""
        if rank > self.rank:
            raise ConfigError("cannot extend a basis by truncation")
        return KernelBasis(self.weight, self.radius_field, self.log_moments[:rank], self.log_c_phi)

    def log_mu_density(self, r):
        """Log density of ``mu`` with respect to area at radius ``r``."""
        r = np.asarray(r, dtype=float)
        return (self.log_c_phi - 2.0 * self.weight.phi(r)
                - 2.0 * self.radius_field.log_rho_profile(r))

    def log_features(self, z, lo=0, hi=None):
        """Log of the scaled basis ``e_n(z) sqrt(mu(z))`` for ``lo <= n < hi``.

        The real part is ``n log|z| - log c_n / 2 + log mu(z) / 2`` and the
        imaginary part ``n arg z``; shape ``z.shape + (hi - lo,)``.
        """
        hi = self.rank if hi is None else hi
        z = np.asarray(z, dtype=complex)
        n = np.arange(lo, hi, dtype=float)
        r = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(r)[..., None]
            re = n * lr
        re = np.where(np.isnan(re), 0.0, re)  # 0 * log 0 -> 0 for n = 0
        re = re - 0.5 * self.log_moments[lo:hi] + 0.5 * self.log_mu_density(r)[..., None]
        return re + 1j * (n * np.angle(z)[..., None])

    def features(self, z, lo=0, hi=None):
        """Scaled basis ``e_n(z) sqrt(mu(z))`` (orthonormal in ``L^2(dm)``)."""
        return np.exp(self.log_features(z, lo, hi))


def _log_weight_density(weight, rf):
    return lambda r: -2.0 * weight.phi(r) - 2.0 * rf.log_rho_profile(r)


def _tail_grid(rf, logdens, smax):
    """Profile nodes extended until the integrand for ``smax`` has decayed."""
    rf.ensure_profile(4.0)
    while True:
        r = rf.profile_nodes
        with np.errstate(divide="ignore"):
            lf0 = np.log(r) + logdens(r)
            lf1 = (smax + 1.0) * np.log(r) + logdens(r)
        tail_ok = (lf0[-1] < np.max(lf0) - 70.0) and (lf1[-1] < np.max(lf1) - 70.0)
        if tail_ok:
            return r
        if r[-1] > _MAX_GRID_RADIUS:
            raise TailDivergenceError(
                "moment integrand does not decay; the weight grows too slowly")
        rf.ensure_profile(2.0 * r[-1])


def log_radial_moments(weight, rf, s, a=0.0, b=np.inf, rtol=1e-9):
    """``log int_a^b r**(s+1) exp(-2 phi) rho**-2 dr`` for an array of ``s``."""
    logdens = _log_weight_density(weight, rf)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.isinf(b):
        grid = _tail_grid(rf, logdens, float(np.max(s)))
    else:
        rf.ensure_profile(b)
        grid = rf.profile_nodes
    rs = rf.crossing_radius
    bps = (rs,) if np.isfinite(rs) else ()
    return log_radial_integrals(s, logdens, a, b, grid, bps, rtol=rtol)


def compute_moments(weight, rf, N, *, rtol=1e-9):
    """Normalising moments ``c_n``, ``0 <= n < N``, in log form.

    Parameters
    ----------
    weight : Weight
    rf : RadiusField
        Radius field of ``weight``.
    N : int
        Number of moments (kernel rank).
    rtol : float
        Tolerance on each log moment.

    Returns
    -------
    KernelBasis

    Raises
    ------
    TailDivergenceError
        If a moment integral does not converge.
    NumericError
        If the computed sequence fails log-convexity.
    """
    N = int(N)
    if N < 1:
        raise ConfigError("rank must be at least 1")
    li = log_radial_moments(weight, rf, 2.0 * np.arange(N), rtol=rtol) + np.log(2.0 * np.pi)
    log_c_phi = -float(li[0])
    logc = li + log_c_phi
    logc[0] = 0.0
    if N >= 3:
        d2 = logc[2:] - 2.0 * logc[1:-1] + logc[:-2]
        if np.any(d2 < -1e-8):
            raise NumericError("moment sequence is not log-convex (min second difference %.3g)"
                               % d2.min())
    logc.setflags(write=False)
    return KernelBasis(weight, rf, logc, log_c_phi)


def _log_terms(logc, R):
    n = np.arange(logc.size, dtype=float)
    if R == 0:
        t = np.full(logc.size, -np.inf)
        t[0] = -logc[0]
        return t
    return 2.0 * n * np.log(R) - logc


def _relative_tail(logc, R, N):
    """``log(sum_{n >= N} t_n / sum_{n < N} t_n)`` with ``t_n = R**2n / c_n``."""
    t = _log_terms(logc, R)
    if N >= t.size:
        return -np.inf
    return float(logsumexp(t[N:]) - logsumexp(t[:N]))


def _decayed(t):
    return t.size > 2 and t[-1] < np.max(t) - 50.0 and t[-1] < t[-2]


def truncation_rank_for_window(weight, rf, R, tol, cap=DEFAULT_RANK_CAP, *, basis=None):
    """Smallest rank ``N`` whose diagonal truncation error on ``|z| <= R`` is ``<= tol``.

    The error is the relative tail ``sum_{n >= N} R**2n / c_n`` over the head
    ``sum_{n < N} R**2n / c_n``, which is largest at the window edge.

    Raises
    ------
    RankCapError
        If more than ``cap`` terms are needed.
    """
    if R < 0 or not np.isfinite(R):
        raise ConfigError("window radius must be finite and non-negative")
    if not 0 < tol < 1:
        raise ConfigError("tolerance must lie in (0, 1)")
    if R == 0:
        return 1
    M = 64
    while True:
        if basis is not None and basis.rank >= M:
            logc = basis.log_moments[:M]
        else:
            logc = compute_moments(weight, rf, M).log_moments
        t = _log_terms(logc, R)
        if _decayed(t):
            head = np.logaddexp.accumulate(t)
            tail = np.logaddexp.accumulate(t[::-1])[::-1]
            ok = tail[1:] - head[:-1] <= np.log(tol)
            N = int(np.argmax(ok)) + 1 if ok.any() else M
            if N > cap:
                raise RankCapError("window radius %g needs rank %d > cap %d" % (R, N, cap))
            return N
        if M > cap:
            raise RankCapError("window radius %g needs rank above cap %d" % (R, cap))
        M *= 2


@dataclass(frozen=True)
class TruncatedKernel:
    """Rank-``N`` kernel with the window on which it is trusted.

    Attributes
    ----------
    basis : KernelBasis
    window_radius : float
        Radius ``R`` of the validity window ``|z| <= R``.
    diag_error_bound : float
        Relative diagonal truncation error at ``|z| = R``.
    """

    basis: KernelBasis
    window_radius: float
    diag_error_bound: float

    @property
    def rank(self):
        return self.basis.rank

    @property
    def weight(self):
        return self.basis.weight

    @property
    def radius_field(self):
        return self.basis.radius_field

    @property
    def log_moments(self):
        return self.basis.log_moments

    def check_window(self, z, what="point"):
        r = np.max(np.abs(np.asarray(z)), initial=0.0)
        if r > self.window_radius * (1.0 + 1e-9):
            raise WindowError(
                "%s at |z| = %.6g outside the kernel window R = %.6g "
                "(diagonal truncation error bound %.3g at the edge)"
                % (what, r, self.window_radius, self.diag_error_bound))


def build_kernel(weight, rf, window_radius, *, tol=1e-10, rank=None, cap=DEFAULT_RANK_CAP):
    """Truncated kernel for the window ``|z| <= window_radius``.

    Either ``rank`` is given explicitly or it is chosen by
    :func:`truncation_rank_for_window` from ``tol``.
    """
    if rank is None:
        rank = truncation_rank_for_window(weight, rf, window_radius, tol, cap)
    rank = int(rank)
    if rank > cap:
        raise RankCapError("rank %d exceeds cap %d" % (rank, cap))
    # extra moments to bound the discarded tail
    M = rank + 64
    while True:
        full = compute_moments(weight, rf, M)
        t = _log_terms(full.log_moments, window_radius)
        if _decayed(t) or M > 8 * rank + 4096:
            break
        M *= 2
    with np.errstate(over="ignore"):
        bound = float(np.exp(_relative_tail(full.log_moments, window_radius, rank)))
    return TruncatedKernel(full.truncated(rank), float(window_radius), bound)


def log_kernel(kernel, z, w, *, check=True):
    """Complex logarithm ``log K(z, w)`` (real part ``log|K|``, imaginary ``arg K``).

    Inputs broadcast against each other.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if check:
        kernel.check_window(z)
        kernel.check_window(w)
    prod = np.broadcast_to(z * np.conj(w), np.broadcast(z, w).shape)
    flat = prod.ravel()
    with np.errstate(divide="ignore"):
        law = np.log(np.abs(flat))
    lm, ph = _backend.log_kernel_series(law, np.angle(flat), kernel.log_moments)
    out = (lm + 1j * ph).reshape(prod.shape)
    return out if out.ndim else complex(out)


def eval_kernel(kernel, z, w, *, check=True):
    """``K(z, w)`` as a complex number (or array).

    Raises
    ------
    OverflowError
        If ``|K|`` exceeds double range; use :func:`log_kernel` instead.
    WindowError
        If an argument lies outside the kernel window.
    """
    lk = np.asarray(log_kernel(kernel, z, w, check=check))
    if np.any(lk.real > 700.0):
        raise OverflowError("kernel value exceeds double range; use log_kernel")
    out = np.exp(lk)
    return out if out.ndim else complex(out)


def log_kernel_diag(kernel, z, *, check=True):
    """``log K(z, z)``."""
    return np.real(log_kernel(kernel, z, z, check=check))


class DiagBracket(NamedTuple):
    c_low: float
    c_high: float


def kernel_diag_check(kernel, samples):
    """Range of ``K(z, z) exp(-2 phi(z))`` over sample points."""
    z = np.atleast_1d(np.asarray(samples, dtype=complex))
    if z.size == 0:
        raise InsufficientDataError("no sample points")
    v = log_kernel_diag(kernel, z) - 2.0 * kernel.weight.phi(np.abs(z))
    return DiagBracket(float(np.exp(v.min())), float(np.exp(v.max())))


def metric_dK(kernel, z, w):
    """Kernel distance ``sqrt(1 - |K(z,w)|^2 / (K(z,z) K(w,w)))`` in [0, 1]."""
    lzw = np.real(log_kernel(kernel, z, w))
    lzz = log_kernel_diag(kernel, z)
    lww = log_kernel_diag(kernel, w)
    v = 1.0 - np.exp(np.minimum(2.0 * lzw - lzz - lww, 0.0))
    out = np.sqrt(np.clip(v, 0.0, 1.0))
    return out if np.ndim(out) else float(out)


def _circle_crossings(p, q, radius):
    """Parameters ``t`` in (0, 1) where the segment ``p + t (q - p)`` meets ``|z| = radius``."""
    d = q - p
    a = abs(d) ** 2
    b = 2.0 * (p.real * d.real + p.imag * d.imag)
    c = abs(p) ** 2 - radius ** 2
    disc = b * b - 4.0 * a * c
    if a == 0 or disc <= 0:
        return []
    roots = ((-b - np.sqrt(disc)) / (2.0 * a), (-b + np.sqrt(disc)) / (2.0 * a))
    return [t for t in roots if 0.0 < t < 1.0]


def _segment_length(rf, p, q, panels):
    """``int |q - p| / rho`` along the segment from ``p`` to ``q``."""
    edges = np.linspace(0.0, 1.0, panels + 1)
    rs = rf.crossing_radius
    if np.isfinite(rs) and rs > 0:
        # rho has a kink on the crossing circle
        edges = np.union1d(edges, _circle_crossings(p, q, rs))
    t, w = panel_rule(edges, 16)
    pts = p + t * (q - p)
    return abs(q - p) * float(np.sum(w * np.exp(-rf.log_rho_profile(np.abs(pts)))))


def _path_length(rf, pts, panels=8, check=False):
    total = 0.0
    for p, q in zip(pts[:-1], pts[1:]):
        val = _segment_length(rf, p, q, panels)
        if check:
            fine = _segment_length(rf, p, q, 4 * panels)
            if abs(fine - val) > 1e-8 * max(fine, 1e-300):
                raise QuadratureError("path integral did not converge", abs(fine - val))
            val = fine
        total += val
    return total


def metric_dB_proxy(rf, z, w, *, offsets=9):
    """Upper proxy for the ``rho``-metric ``inf_gamma int |gamma'| / rho``.

    The infimum is taken over the straight segment and over two-segment
    polylines through ``mid + s |w - z| i u`` (``u`` the unit direction),
    first on a lattice of ``offsets`` values ``s`` in [-1/2, 1/2] and then
    refined by a bounded scalar minimisation.  Since the true metric is an
    infimum over all paths, the result is an upper bound of it.
    """
    z, w = complex(z), complex(w)
    if z == w:
        return 0.0
    d = w - z
    u = d / abs(d)
    mid = 0.5 * (z + w)

    def detour(s):
        return _path_length(rf, [z, mid + s * abs(d) * 1j * u, w])

    best = _path_length(rf, [z, w], check=True)
    grid = np.linspace(-0.5, 0.5, offsets)
    vals = np.array([detour(s) for s in grid])
    i = int(np.argmin(vals))
    if vals[i] < best:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, offsets - 1)]
        res = minimize_scalar(detour, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6})
        s = res.x if res.fun < vals[i] else grid[i]
        best = min(best, _path_length(rf, [z, mid + s * abs(d) * 1j * u, w], check=True))
    return float(best)


def decay_exponent(kernel, z, w):
    """Fit ``eps`` in ``|K(z,w)| / sqrt(K(z,z) K(w,w)) ~ exp(-c d_B(z,w)**eps)``.

    Pairs whose normalised kernel is below 0.5 but above ``e**-25`` (beyond
    which double precision cancellation dominates) enter a least-squares fit
    of ``log(-log k)`` against ``log d_B``.

    Returns
    -------
    eps : float
    n_pairs : int
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    lk = np.real(log_kernel(kernel, z, w))
    lkn = lk - 0.5 * (log_kernel_diag(kernel, z) + log_kernel_diag(kernel, w))
    keep = (lkn < np.log(0.5)) & (lkn > -25.0)
    if keep.sum() < 5:
        raise InsufficientDataError("too few pairs in the decay range")
    rf = kernel.radius_field
    dB = np.array([metric_dB_proxy(rf, a, b, offsets=3) for a, b in zip(z[keep], w[keep])])
    eps, _ = np.polyfit(np.log(dB), np.log(-lkn[keep]), 1)
    return float(eps), int(keep.sum())


def save_basis(path, basis, *, extra=None):
    """Write ``(n, ln c_n)`` as a text table with a commented header."""
    lines = ["# weight = %s" % basis.weight.description,
             "# log_c_phi = %.17g" % basis.log_c_phi]
    for k, v in sorted((extra or {}).items()):
        lines.append("# %s = %s" % (k, v))
    lines.append("n,ln_c_n")
    lines += ["%d,%.17g" % (n, v) for n, v in enumerate(basis.log_moments)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_basis(path, weight, rf):
    """Read a table written by :func:`save_basis`."""
    log_c_phi = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                if key.strip() == "log_c_phi":
                    log_c_phi = float(val)
                continue
            if not line or line.startswith("n,"):
                continue
            n, v = line.split(",")
            rows.append((int(n), float(v)))
    if log_c_phi is None or not rows:
        raise ConfigError("%s is not a basis table" % path)
    idx = np.array([r[0] for r in rows])
    if not np.array_equal(idx, np.arange(idx.size)):
        raise ConfigError("basis table indices must be 0, 1, 2, ...")
    logc = np.array([r[1] for r in rows])
    logc.setflags(write=False)
    return KernelBasis(weight, rf, logc, log_c_phi)
