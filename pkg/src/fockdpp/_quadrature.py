"""Gauss-Legendre helpers for one-dimensional radial integrals."""

from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import QuadratureError, TailDivergenceError

# Integrand values below max - _LOG_CUT are treated as zero (e^-60 ~ 1e-26).
_LOG_CUT = 60.0


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the ``n``-point rule on [-1, 1] (read-only)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(edges, order):
    """Composite Gauss-Legendre rule over consecutive panels.

    Parameters
    ----------
    edges : array_like, shape (..., P + 1)
        Panel boundaries; leading dimensions are batch dimensions.
    order : int
        Nodes per panel.

    Returns
    -------
    nodes, weights : ndarray, shape (..., P * order)
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    lo = edges[..., :-1, None]
    half = 0.5 * (edges[..., 1:, None] - lo)
    nodes = lo + half * (x + 1.0)
    weights = half * w
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _bracket(s, log_density, lo, hi, grid):
    """Per-exponent subinterval of [lo, hi] that carries all relevant mass."""
    pts = grid[(grid > lo) & (grid < hi)]
    pts = np.concatenate([[lo], pts, [hi]])
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(pts)
        base = log_density(pts) + lr
        lf = s[:, None] * lr[None, :] + base[None, :]
    lf = np.where(np.isnan(lf), -np.inf, lf)
    top = lf.max(axis=1)
    keep = lf >= (top - _LOG_CUT)[:, None]
    first = np.argmax(keep, axis=1)
    last = keep.shape[1] - 1 - np.argmax(keep[:, ::-1], axis=1)
    i0 = np.maximum(first - 1, 0)
    i1 = np.minimum(last + 1, pts.size - 1)
    return pts[i0], pts[i1], last == pts.size - 1, top


def log_radial_integrals(s, log_density, a, b, grid, breakpoints=(), *,
                         order=24, panels=4, rtol=1e-9, max_panels=1024):
    """Log of ``int_a^b r**(s + 1) * exp(log_density(r)) dr`` for many ``s``.

    The integrand for each exponent is localised on ``grid`` (the region where
    it is within ``e**-60`` of its maximum), then integrated with composite
    Gauss-Legendre panels whose number is doubled until successive log values
    agree to ``rtol``.  Integration is split at ``breakpoints`` so that kinks
    of ``log_density`` never fall inside a panel.

    Parameters
    ----------
    s : array_like
        Exponents, ``s >= 0``.
    log_density : callable
        Vectorised log of the radial density.
    a, b : float
        Integration limits, ``0 <= a < b``; ``b`` may be ``inf`` provided
        ``grid`` extends into the decaying tail.
    grid : ndarray
        Sorted radii used to localise the integrand.
    breakpoints : sequence of float
        Points where ``log_density`` is not smooth.

    Returns
    -------
    ndarray
        Log integrals, ``-inf`` where the integrand vanishes.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    grid = np.asarray(grid, dtype=float)
    stops = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    parts = []
    for lo, hi in zip(stops[:-1], stops[1:]):
        if np.isinf(hi):
            hi_eff = grid[-1]
        else:
            hi_eff = hi
        if hi_eff <= lo:
            continue
        left, right, at_end, top = _bracket(s, log_density, lo, hi_eff, grid)
        if np.isinf(hi) and np.any(at_end & np.isfinite(top)):
            raise TailDivergenceError(
                "radial integrand has not decayed at r = %.6g" % hi_eff)
        # grade toward breakpoints the integrand actually reaches
        gl = (left == lo) & (lo in breakpoints)
        gr = (right == hi) & (hi in breakpoints)
        parts.append(_integrate(s, log_density, left, right, order, panels,
                                rtol, max_panels, top, gl, gr))
    if not parts:
        return np.full(s.shape, -np.inf)
    return logsumexp(np.vstack(parts), axis=0)


_GRADE = 4.0 ** -np.arange(1.0, 13.0)


def _unit_edges(npan, grade_left, grade_right):
    u = np.linspace(0.0, 1.0, npan + 1)
    extra = []
    if grade_left:
        extra.append(_GRADE / npan)
    if grade_right:
        extra.append(1.0 - _GRADE / npan)
    if extra:
        u = np.unique(np.concatenate([u] + extra))
    return u


def _evaluate(s, log_density, left, right, order, npan, grade_left=False, grade_right=False):
    u = _unit_edges(npan, grade_left, grade_right)
    edges = left[:, None] + (right - left)[:, None] * u[None, :]
    r, w = panel_rule(edges, order)
    with np.errstate(divide="ignore", invalid="ignore"):
        lf = (s[:, None] + 1.0) * np.log(r) + log_density(r) + np.log(w)
    lf = np.where(np.isnan(lf), -np.inf, lf)
    return logsumexp(lf, axis=1)


def _integrate(s, log_density, left, right, order, panels, rtol, max_panels, top,
               grade_left, grade_right):
    out = np.full(s.shape, -np.inf)
    live = np.isfinite(top) & (right > left)
    for gl in (False, True):
        for gr in (False, True):
            sel = live & (grade_left == gl) & (grade_right == gr)
            if sel.any():
                _integrate_group(out, np.flatnonzero(sel), s, log_density, left, right,
                                 order, panels, rtol, max_panels, gl, gr)
    return out


def _integrate_group(out, idx, s, log_density, left, right, order, panels, rtol,
                     max_panels, gl, gr):
    npan = panels
    prev = _evaluate(s[idx], log_density, left[idx], right[idx], order, npan, gl, gr)
    while True:
        npan *= 2
        cur = _evaluate(s[idx], log_density, left[idx], right[idx], order, npan, gl, gr)
        diff = np.abs(cur - prev)
        diff = np.where(np.isneginf(cur) & np.isneginf(prev), 0.0, diff)
        done = diff <= rtol
        out[idx[done]] = cur[done]
        if done.all():
            return
        if npan >= max_panels:
            raise QuadratureError(
                "radial quadrature did not converge", residual=float(diff.max()))
        idx, prev = idx[~done], cur[~done]
