"""Statistics of sampled configurations and of spectral cell tables.

Separation gaps, cell counts, log-log scaling fits, Borel-Cantelli sums,
upper-density estimates and the negative-association test for disjoint
cells.  Everything here is a pure function of its inputs.
"""

from dataclasses import asdict, dataclass, field, is_dataclass
import json
import math

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from ._quadrature import panel_rule
from .cells import CellPartition, Disk
from .errors import (CoverageError, DisjointnessError, InsufficientDataError,
                     WindowError)
from .spectra import poisson_cell_prob

__all__ = [
    "SeparationReport", "min_gap", "dk_nearest", "cell_counts", "cell_count_matrix",
    "ScalingReport", "scaling_regression", "poisson_table", "BorelCantelliResult",
    "borel_cantelli_sum", "DensityEstimate", "upper_density", "GhoshResult",
    "ghosh_test", "cells_disjoint", "random_disjoint_pairs", "empirical_cell_probabilities",
    "grid_flags", "write_json", "write_scatter",
]

DEFAULT_QUANTILES = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9)


# --- separation -------------------------------------------------------------

@dataclass
class SeparationReport:
    """Minimum pairwise distance of a configuration and nearest-neighbour quantiles.

    ``gap_quantiles`` are quantiles of the nearest-neighbour distances in
    ``metric``; gaps are ``inf`` when fewer than two points are present and
    ``min_gap_dK`` is ``nan`` when no kernel was supplied.
    """

    min_gap_euclidean: float
    min_gap_dK: float
    gap_quantiles: list
    window: dict
    n_points: int
    process: str
    metric: str = "euclid"


def dk_nearest(kernel, points):
    """Nearest-neighbour kernel distance ``d_K`` for each point.

    The normalised features ``u_i = e(z_i) / |e(z_i)|`` satisfy
    ``d_K(z_i, z_j)**2 = 1 - |<u_i, u_j>|**2``; all pairs are compared.
    """
    z = np.asarray(points, dtype=complex)
    n = z.size
    if n < 2:
        return np.full(n, np.inf)
    kernel.check_window(z)
    lf = kernel.basis.log_features(z)
    lf = lf - lf.real.max(axis=1, keepdims=True)
    U = np.exp(lf)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    G = np.abs(U @ U.conj().T) ** 2
    np.fill_diagonal(G, -np.inf)
    return np.sqrt(np.clip(1.0 - G.max(axis=1), 0.0, 1.0))


def min_gap(config, metric="euclid", kernel=None, quantiles=DEFAULT_QUANTILES):
    """Separation statistics of a configuration.

    Parameters
    ----------
    config : PointConfiguration
    metric : {"euclid", "dk"}
        Metric used for the quantiles.
    kernel : TruncatedKernel, optional
        Required for ``metric="dk"``; when given, ``min_gap_dK`` is filled in.
    quantiles : sequence of float

    Returns
    -------
    SeparationReport
    """
    if metric not in ("euclid", "dk"):
        raise ValueError("metric must be 'euclid' or 'dk'")
    if metric == "dk" and kernel is None:
        raise ValueError("metric 'dk' needs a kernel")
    z = np.asarray(config.points, dtype=complex)
    n = z.size
    if n < 2:
        eu = dk = np.full(n, np.inf)
    else:
        eu, _ = _backend.nn_distances(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))
        dk = dk_nearest(kernel, z) if kernel is not None else None
    g_eu = float(eu.min()) if n >= 2 else math.inf
    if kernel is None:
        g_dk = math.nan
    else:
        g_dk = float(dk.min()) if n >= 2 else math.inf
    src = eu if metric == "euclid" else dk
    qs = [(float(q), float(np.quantile(src, q)) if n >= 2 else math.inf) for q in quantiles]
    return SeparationReport(g_eu, g_dk, qs, config.window.to_dict(), int(n),
                            config.process, metric)


# --- cell counts ------------------------------------------------------------

def cell_counts(config, partition):
    """Number of points in every cell of ``partition``.

    Returns
    -------
    dict
        ``(n, k) -> count`` for every cell of the partition (zeros included).

    Raises
    ------
    CoverageError
        If a point lies outside the partition.
    """
    out = {c.label: 0 for c in partition.cells()}
    z = np.asarray(config.points if hasattr(config, "points") else config, dtype=complex)
    if z.size == 0:
        return out
    n, k = partition.locate(z)
    for key, c in zip(*np.unique(np.stack([n, k], axis=1), axis=0, return_counts=True)):
        lab = (int(key[0]), int(key[1]))
        if lab not in out:
            raise CoverageError("point assigned to unknown cell %r" % (lab,))
        out[lab] = int(c)
    return out


def cell_count_matrix(configs, cells):
    """Counts of each configuration (rows) in each cell (columns)."""
    out = np.zeros((len(configs), len(cells)), dtype=np.int64)
    for i, cfg in enumerate(configs):
        z = np.asarray(cfg.points, dtype=complex)
        for j, c in enumerate(cells):
            out[i, j] = int(np.count_nonzero(c.contains(z)))
    return out


def empirical_cell_probabilities(configs, cells):
    """Empirical ``P(X >= 2)`` per cell and its binomial standard error."""
    X = cell_count_matrix(configs, cells)
    p = np.mean(X >= 2, axis=0)
    se = np.sqrt(p * (1.0 - p) / X.shape[0])
    return p, se


# --- scaling regression -----------------------------------------------------

@dataclass
class ScalingReport:
    """Ordinary least squares fit of ``ln p`` against ``ln rho``."""

    xs: list
    ys: list
    slope: float
    intercept: float
    r_squared: float
    cell_filter: str
    gamma_expected: float = math.nan
    labels: list = field(default_factory=list)


def _get(rec, name):
    return rec[name] if isinstance(rec, dict) else getattr(rec, name)


def poisson_table(records):
    """Cell table of the intensity-matched Poisson process (parameter = trace)."""
    out = []
    for r in records:
        pp = poisson_cell_prob(_get(r, "trace"))
        out.append({"n": _get(r, "n"), "k": _get(r, "k"), "rho_center": _get(r, "rho_center"),
                    "trace": _get(r, "trace"), "p_geq2_exact": pp.p_geq2})
    return out


def scaling_regression(table, gamma_expected=math.nan, *, column="p_geq2_exact",
                       trace_max=0.2, p_min=1e-14, min_rows=10):
    """Fit the exponent of ``P(X >= 2)`` (or another column) in ``rho``.

    Parameters
    ----------
    table : sequence of CellRecord or dict
        Rows with ``rho_center``, ``trace`` and ``column``.
    gamma_expected : float
        Informational; stored in the report.
    column : str
        Probability column regressed on ``ln rho``.
    trace_max, p_min : float
        Rows with ``trace > trace_max`` or ``column < p_min`` are excluded.

    Raises
    ------
    InsufficientDataError
        If fewer than ``min_rows`` rows pass the filter.
    """
    xs, ys, labels = [], [], []
    for r in table:
        p = _get(r, column)
        if _get(r, "trace") <= trace_max and p >= p_min:
            xs.append(math.log(_get(r, "rho_center")))
            ys.append(math.log(p))
            labels.append((int(_get(r, "n")), int(_get(r, "k"))))
    if len(xs) < min_rows:
        raise InsufficientDataError("%d rows pass the filter, need %d" % (len(xs), min_rows))
    x, y = np.array(xs), np.array(ys)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / sst if sst > 0 else 1.0
    desc = "trace <= %g and %s >= %g" % (trace_max, column, p_min)
    return ScalingReport(xs, ys, float(slope), float(intercept), r2, desc,
                         float(gamma_expected), labels)


# --- Borel-Cantelli sums ----------------------------------------------------

@dataclass
class BorelCantelliResult:
    """Partial sums ``S(n) = sum_{m <= n} sum_k rho(z_{m,k})**-gamma``.

    ``integrals[i]`` is ``int_{|z| < n} rho**-gamma dm`` for the same ``n``;
    ``dyadic_increments`` are ``S(2**(j+1)) - S(2**j)`` and ``trend`` is
    ``"converging"`` when they decay geometrically, else ``"diverging"``.
    """

    gamma: float
    n: list
    partial_sums: list
    integrals: list
    ratios: list
    matches_integral: bool
    dyadic_increments: list
    trend: str


def _disk_integral(rf, gamma, R, panels=64):
    rf.ensure_profile(R)
    edges = np.linspace(0.0, R, panels + 1)
    rs = rf.crossing_radius
    if 0 < rs < R:
        edges = np.unique(np.append(edges, rs))
    r, w = panel_rule(edges, 16)
    return float(2 * np.pi * np.sum(w * r * np.exp(-gamma * rf.log_rho_profile(r))))


def borel_cantelli_sum(rf, gamma, n_max, *, bracket=(0.1, 10.0), decay_margin=0.05):
    """Ring sums of ``rho**-gamma`` over the cell centres of the standard grid.

    Ring ``n`` has ``n`` cells whose centres all lie at ``|z| = n - 1/2``
    (the centre of ring 1 is the origin), so its contribution is
    ``n rho(n - 1/2)**-gamma``.
    """
    if n_max < 10:
        raise InsufficientDataError("n_max must be at least 10")
    ns = np.arange(1, n_max + 1)
    radii = np.where(ns == 1, 0.0, ns - 0.5)
    terms = ns * np.asarray(rf.rho(radii), dtype=float) ** (-gamma)
    S = np.cumsum(terms)
    integ = np.array([_disk_integral(rf, gamma, float(n)) for n in ns])
    ratio = S / integ
    lo, hi = bracket
    tail = ratio[ns >= 10]
    matches = bool(np.all((tail >= lo) & (tail <= hi)))
    dy = []
    j = 0
    while 2 ** (j + 1) <= n_max:
        dy.append(float(S[2 ** (j + 1) - 1] - S[2 ** j - 1]))
        j += 1
    dy = np.array(dy)
    use = dy[len(dy) // 2:] if len(dy) >= 4 else dy
    if use.size >= 2 and np.all(use > 0):
        slope = np.polyfit(np.arange(use.size), np.log(use), 1)[0]
        trend = "converging" if slope < -decay_margin else "diverging"
    else:
        trend = "converging"
    return BorelCantelliResult(float(gamma), ns.tolist(), S.tolist(), integ.tolist(),
                               ratio.tolist(), matches, dy.tolist(), trend)


# --- upper density ----------------------------------------------------------

@dataclass
class DensityEstimate:
    """``sup_z #(points in D(z, r)) / (pi r**2)`` for several ``r``."""

    radii: list
    sup_counts_over_area: list
    extrapolated_upper_density: float
    lattice_spacing: list


def upper_density(config, radii, *, spacing_factor=0.25):
    """Upper density estimate on a square lattice of centres.

    Centres range over a lattice of spacing ``spacing_factor * r`` that keeps
    ``D(z, r)`` inside the window.

    Raises
    ------
    WindowError
        If some ``r`` does not fit in the window.
    """
    radii = [float(r) for r in radii]
    if not radii:
        raise InsufficientDataError("no radii")
    win = config.window
    z = np.asarray(config.points, dtype=complex)
    tree = cKDTree(np.column_stack([z.real, z.imag])) if z.size else None
    out, sp = [], []
    for r in radii:
        room = win.r_out - r
        if not r > 0 or room < 0 or (win.r_in > 0):
            raise WindowError("radius %g does not fit in the window %r" % (r, win.to_dict()))
        h = spacing_factor * r
        m = int(math.floor(room / h))
        g = np.arange(-m, m + 1) * h
        cx, cy = np.meshgrid(g, g)
        keep = cx ** 2 + cy ** 2 <= room ** 2 + 1e-12
        centres = np.column_stack([cx[keep], cy[keep]])
        if tree is None:
            best = 0
        else:
            best = int(np.max(tree.query_ball_point(centres, r, return_length=True)))
        out.append(best / (math.pi * r * r))
        sp.append(h)
    return DensityEstimate(radii, out, out[int(np.argmax(radii))], sp)


# --- negative association ---------------------------------------------------

@dataclass
class GhoshResult:
    """Per-pair excess ``P(A, B) - P(A) P(B)`` with ``A = {X_1 <= m}``, ``B = {X_2 <= m}``.

    ``se`` is the delta-method standard error of each excess; the test
    passes when every excess is at most ``n_se`` standard errors.
    """

    worst_excess: float
    passed: bool
    excess: list
    se: list
    joint: list
    marginals: list
    n_batches: int
    m: int


def _arc_disjoint(a1, a2, b1, b2):
    """Half-open arcs [a1, a2) and [b1, b2) (mod 2 pi) do not overlap."""
    two = 2 * math.pi
    if a2 - a1 >= two - 1e-15 or b2 - b1 >= two - 1e-15:
        return False
    d = (b1 - a1) % two
    return d >= (a2 - a1) - 1e-12 and (a1 - b1) % two >= (b2 - b1) - 1e-12


def cells_disjoint(a, b):
    """Whether two cells have disjoint interiors."""
    if a.separable and b.separable:
        ra0, ra1, ta0, ta1 = a.polar
        rb0, rb1, tb0, tb1 = b.polar
        if ra1 <= rb0 or rb1 <= ra0:
            return True
        return _arc_disjoint(ta0, ta1, tb0, tb1)
    if isinstance(a, Disk) and isinstance(b, Disk):
        return abs(a.center - b.center) >= a.radius + b.radius
    for p, q in ((a, b), (b, a)):
        z, _ = p.quadrature(4, 4, order=8)
        if np.any(q.contains(z)):
            return False
    return True


def random_disjoint_pairs(cells, n_pairs, rng):
    """``n_pairs`` distinct random pairs of disjoint cells."""
    cells = list(cells)
    if len(cells) < 2:
        raise InsufficientDataError("need at least two cells")
    seen, out = set(), []
    tries = 0
    while len(out) < n_pairs:
        i, j = sorted(int(x) for x in rng.choice(len(cells), 2, replace=False))
        tries += 1
        if tries > 100 * n_pairs:
            raise InsufficientDataError("could not find enough disjoint pairs")
        if (i, j) in seen or not cells_disjoint(cells[i], cells[j]):
            continue
        seen.add((i, j))
        out.append((cells[i], cells[j]))
    return out


def ghosh_test(batches, pairs, m=1, *, n_se=3.0, min_batches=1000):
    """Empirical check of ``P(X_1 <= m, X_2 <= m) <= P(X_1 <= m) P(X_2 <= m)``.

    Parameters
    ----------
    batches : sequence of PointConfiguration or ndarray
        Either configurations or a ``(n_batches, 2 * n_pairs)`` count array
        whose columns ``2 i`` and ``2 i + 1`` belong to pair ``i``.
    pairs : sequence of (Cell, Cell)
    m : int

    Raises
    ------
    DisjointnessError
        If a pair of cells overlaps.
    InsufficientDataError
        If fewer than ``min_batches`` batches are supplied.
    """
    for a, b in pairs:
        if not cells_disjoint(a, b):
            raise DisjointnessError("cells %r and %r overlap" % (a, b))
    if isinstance(batches, np.ndarray):
        X = batches
    else:
        flat = [c for pair in pairs for c in pair]
        X = cell_count_matrix(batches, flat)
    nb = X.shape[0]
    if nb < min_batches:
        raise InsufficientDataError("%d batches, need %d" % (nb, min_batches))
    excess, se, joint, marg = [], [], [], []
    for i in range(len(pairs)):
        A = (X[:, 2 * i] <= m).astype(float)
        B = (X[:, 2 * i + 1] <= m).astype(float)
        pa, pb, pab = A.mean(), B.mean(), (A * B).mean()
        infl = A * B - pb * A - pa * B
        s = float(np.std(infl, ddof=1) / math.sqrt(nb)) if nb > 1 else math.inf
        excess.append(float(pab - pa * pb))
        se.append(s)
        joint.append(float(pab))
        marg.append((float(pa), float(pb)))
    ex, s = np.array(excess), np.array(se)
    passed = bool(np.all(ex <= n_se * s + 1e-15))
    return GhoshResult(float(ex.max()), passed, excess, se, joint, marg, int(nb), int(m))


# --- shifted grids ----------------------------------------------------------

def grid_flags(z, w, nmax, scale=1.0):
    """Whether ``z`` and ``w`` share a cell of the standard or of the shifted grid.

    Returns
    -------
    standard, shifted : ndarray of bool
    """
    z, w = np.atleast_1d(z), np.atleast_1d(w)
    out = []
    for part in (CellPartition.standard(nmax, scale), CellPartition.shifted(nmax, scale)):
        nz, kz = part.locate(z)
        nw, kw = part.locate(w)
        out.append((nz == nw) & (kz == kw))
    return out[0], out[1]


# --- output -----------------------------------------------------------------

def _plain(obj):
    if is_dataclass(obj):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj, header=None):
    """Serialise a report (dataclass or dict) with an optional header block."""
    data = {"header": dict(header or {}), "report": _plain(obj)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_scatter(path, report, header=None):
    """Two-column ``ln_rho,ln_p`` CSV of a :class:`ScalingReport`."""
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in (header or {}).items():
            fh.write("# %s = %s\n" % (k, v))
        fh.write("ln_rho,ln_p\n")
        for x, y in zip(report.xs, report.ys):
            fh.write("%.17g,%.17g\n" % (x, y))
