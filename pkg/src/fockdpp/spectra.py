"""Spectra of the kernel restricted to cells, and cell occupation probabilities.

For a cell ``T`` the restriction of the projection kernel defines the
compact operator ``f -> 1_T f`` compressed to the Fock space.  In the
orthonormal monomial basis ``e_n = z**n / sqrt(c_n)`` its matrix is

    M[m, n] = int_T e_m conj(e_n) dmu.

For polar rectangles this factorises into a radial Hankel part and an angular
Toeplitz part, ``M[m, n] = R(m + n) A(m - n) / sqrt(c_m c_n)`` with

    R(s) = c_phi int_{r_in}^{r_out} r**(s+1) exp(-2 phi) rho**-2 dr,
    A(d) = int_{t1}^{t2} exp(i d t) dt.

Only the band of indices whose diagonal mass exceeds ``band_tol`` times the
largest one is kept.  The band matrix is a principal submatrix, so its
eigenvalues interlace those of the full matrix from below and the lower
bounds derived from it remain valid.  Off-centre disks are handled by
two-dimensional quadrature of the basis.

By the determinantal structure the number of points in ``T`` is a sum of
independent Bernoulli variables with the eigenvalues as success
probabilities, which gives the occupation probabilities.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.special import gammainc, logsumexp

from .cells import AnnularSector, Cell
from .errors import ConfigError, QuadratureError, SpectrumError
from .kernel import log_kernel_diag, log_radial_moments

__all__ = [
    "GalerkinMatrix", "RestrictionSpectrum", "CellProbabilities", "CellRecord",
    "restriction_matrix", "spectrum", "cell_probabilities", "poisson_cell_prob",
    "trace_integral", "pair_intensity_integral", "lambda_witnesses",
    "sweep_cells", "write_cells_csv", "read_cells_csv", "CSV_COLUMNS",
]

DEFAULT_BAND_TOL = 1e-20
_PSD_TOL = 1e-6


@dataclass(frozen=True)
class GalerkinMatrix:
    """Band-restricted restriction matrix.

    Attributes
    ----------
    matrix : ndarray, shape (B, B)
        Hermitian matrix on basis indices ``offset .. offset + B - 1``.
    offset : int
    cell : Cell
    dropped_mass : float
        Upper bound on the trace left out of the band.
    """

    matrix: np.ndarray
    offset: int
    cell: Cell
    dropped_mass: float = 0.0

    @property
    def band(self):
        return self.offset, self.offset + self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def _angular_factor(d, t1, t2):
    d = np.asarray(d, dtype=float)
    width = t2 - t1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.exp(1j * d * t2) - np.exp(1j * d * t1)) / (1j * d)
    return np.where(d == 0, width, val)


def _log_radial(kernel, s, r_in, r_out):
    """``log R(s)`` for the annulus ``r_in <= r < r_out``."""
    b = kernel.basis
    return log_radial_moments(b.weight, b.radius_field, s, r_in, r_out) + b.log_c_phi


def _select_band(log_diag, band_tol):
    """Contiguous index range carrying all diagonal mass above ``band_tol``."""
    finite = np.isfinite(log_diag)
    if not finite.any():
        return 0, 0, 0.0
    top = log_diag[finite].max()
    keep = log_diag >= top + math.log(band_tol)
    idx = np.flatnonzero(keep)
    lo, hi = int(idx[0]), int(idx[-1]) + 1
    out = np.concatenate([log_diag[:lo], log_diag[hi:]])
    dropped = float(np.exp(logsumexp(out))) if out.size and np.isfinite(out).any() else 0.0
    return lo, hi, dropped


def _separable_matrix(kernel, cell, band_tol):
    r_in, r_out, t1, t2 = cell.polar
    N = kernel.rank
    logc = kernel.log_moments
    width = t2 - t1
    if r_out <= r_in or width <= 0:
        return GalerkinMatrix(np.zeros((0, 0), complex), 0, cell, 0.0)
    n = np.arange(N)
    log_diag = _log_radial(kernel, 2.0 * n, r_in, r_out) - logc + math.log(width)
    lo, hi, dropped = _select_band(log_diag, band_tol)
    if hi == lo:
        return GalerkinMatrix(np.zeros((0, 0), complex), 0, cell, dropped)
    s = np.arange(2 * lo, 2 * hi - 1, dtype=float)
    lr = _log_radial(kernel, s, r_in, r_out)
    m = np.arange(lo, hi)
    L = lr[(m[:, None] + m[None, :]) - 2 * lo] - 0.5 * (logc[m][:, None] + logc[m][None, :])
    A = _angular_factor(m[:, None] - m[None, :], t1, t2)
    M = np.exp(L) * A
    M = 0.5 * (M + M.conj().T)
    return GalerkinMatrix(M, lo, cell, dropped)


def _breaks(kernel):
    rs = kernel.radius_field.crossing_radius
    return (rs,) if np.isfinite(rs) else ()


def _quadrature_features(kernel, cell, n_r, n_t, lo=0, hi=None):
    z, w = cell.quadrature(n_r, n_t, breaks=_breaks(kernel))
    lf = kernel.basis.log_features(z, lo, hi)
    return z, w, lf


def _gram_from_quadrature(kernel, cell, n_r, n_t, band_tol):
    z, w, lf = _quadrature_features(kernel, cell, n_r, n_t)
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    log_diag = logsumexp(2.0 * lf.real + lw[:, None], axis=0)
    lo, hi, dropped = _select_band(log_diag, band_tol)
    F = np.exp(lf[:, lo:hi] + 0.5 * lw[:, None])
    M = F.T @ F.conj()
    return GalerkinMatrix(0.5 * (M + M.conj().T), lo, cell, dropped)


def restriction_matrix(kernel, cell, *, band_tol=DEFAULT_BAND_TOL, check_window=True,
                       rtol=1e-10, max_panels=256):
    """Matrix of the kernel restricted to ``cell`` in the monomial basis.

    Parameters
    ----------
    kernel : TruncatedKernel
    cell : Cell
    band_tol : float
        Relative diagonal mass below which basis indices are dropped.
    check_window : bool
        Reject cells reaching outside the kernel window.

    Returns
    -------
    GalerkinMatrix

    Raises
    ------
    WindowError
        If the cell leaves the kernel window.
    QuadratureError
        If the quadrature for a non-separable cell does not converge.
    """
    if check_window and np.isfinite(cell.outer_radius):
        kernel.check_window(cell.outer_radius, what="cell")
    if cell.area == 0:
        return GalerkinMatrix(np.zeros((0, 0), complex), 0, cell, 0.0)
    if cell.separable:
        return _separable_matrix(kernel, cell, band_tol)
    n_r, n_t = 2, 2
    prev = _gram_from_quadrature(kernel, cell, n_r, n_t, band_tol)
    while True:
        n_r, n_t = 2 * n_r, 2 * n_t
        cur = _gram_from_quadrature(kernel, cell, n_r, n_t, band_tol)
        if cur.band == prev.band:
            scale = max(np.abs(cur.matrix).max(), 1e-300)
            if np.abs(cur.matrix - prev.matrix).max() <= rtol * scale:
                return cur
        if n_r >= max_panels:
            raise QuadratureError("cell Gram matrix did not converge")
        prev = cur


@dataclass(frozen=True)
class RestrictionSpectrum:
    """Eigenvalues of a restriction matrix.

    Attributes
    ----------
    cell : Cell or None
    matrix_rank : int
        Size of the (band) matrix.
    eigenvalues : ndarray
        Sorted in decreasing order, clamped to [0, 1].
    trace : float
        ``tr M`` (expected number of points in the cell).
    hs_norm_sq : float
        ``|M|_F^2`` (sum of squared eigenvalues).
    offset : int
        First basis index of the band.
    """

    cell: Optional[Cell]
    matrix_rank: int
    eigenvalues: np.ndarray
    trace: float
    hs_norm_sq: float
    offset: int = 0


def spectrum(M):
    """Eigenvalues of a Hermitian restriction matrix.

    Parameters
    ----------
    M : GalerkinMatrix or ndarray

    Raises
    ------
    ConfigError
        If ``M`` is not square and Hermitian.
    SpectrumError
        If an eigenvalue lies outside ``[-1e-6, 1 + 1e-6]``.
    """
    cell, offset = None, 0
    if isinstance(M, GalerkinMatrix):
        cell, offset, M = M.cell, M.offset, M.matrix
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError("restriction matrix must be square")
    if M.shape[0] == 0:
        return RestrictionSpectrum(cell, 0, np.zeros(0), 0.0, 0.0, offset)
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.conj().T).max() > 1e-10 * scale:
        raise ConfigError("restriction matrix is not Hermitian")
    lam = eigh(M, eigvals_only=True)[::-1]
    if lam[-1] < -_PSD_TOL or lam[0] > 1.0 + _PSD_TOL:
        raise SpectrumError("eigenvalues [%.3g, %.3g] outside [0, 1]" % (lam[-1], lam[0]))
    lam = np.clip(lam, 0.0, 1.0)
    trace = float(np.real(np.trace(M)))
    hs = float(np.sum(np.abs(M) ** 2))
    return RestrictionSpectrum(cell, M.shape[0], lam, trace, hs, offset)


class CellProbabilities(NamedTuple):
    """Occupation probabilities of a cell."""

    p0: float
    p1: float
    p_geq2_exact: float
    p_geq2_second_order: float
    expected_count: float
    pair_intensity: float


def cell_probabilities(spec):
    """Probabilities of 0, 1 and at least 2 points from the eigenvalues.

    The count is a sum of independent Bernoulli(lambda_i) variables.  The
    probabilities are accumulated by the recursion

        q2 <- q2 + q1 lambda,  q1 <- q1 (1 - lambda) + q0 lambda,  q0 <- q0 (1 - lambda)

    so ``P(X >= 2)`` never suffers cancellation from ``1 - p0 - p1``.  The
    second-order value is ``((sum lambda)**2 - sum lambda**2) / 2``.
    """
    lam = np.asarray(spec.eigenvalues, dtype=float)
    q0, q1, q2 = 1.0, 0.0, 0.0
    for x in lam:
        if x <= 0.0:
            break  # sorted: the rest are zero too
        q2 += q1 * x
        q1 = q1 * (1.0 - x) + q0 * x
        q0 *= 1.0 - x
    tr, hs = spec.trace, spec.hs_norm_sq
    second = 0.5 * (tr * tr - hs)
    return CellProbabilities(q0, q1, q2, second, tr, tr * tr - hs)


class PoissonProbabilities(NamedTuple):
    p0: float
    p1: float
    p_geq2: float


def poisson_cell_prob(p):
    """Occupation probabilities of a Poisson count with mean ``p``."""
    if p < 0:
        raise ConfigError("Poisson mean must be non-negative")
    e = math.exp(-p)
    return PoissonProbabilities(e, p * e, float(gammainc(2.0, p)) if p > 0 else 0.0)


def _tensor_band(kernel, cell, band_tol):
    z, w, lf = _quadrature_features(kernel, cell, 4, 4)
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    log_diag = logsumexp(2.0 * lf.real + lw[:, None], axis=0)
    lo, hi, _ = _select_band(log_diag, band_tol)
    return lo, hi


def _tensor_integrals(kernel, cell, n_r, n_t, lo, hi, chunk=4096):
    z, w = cell.quadrature(n_r, n_t, breaks=_breaks(kernel))
    tr = 0.0
    G = np.zeros((hi - lo, hi - lo), complex)
    for a in range(0, z.size, chunk):
        lf = kernel.basis.log_features(z[a:a + chunk], lo, hi)
        F = np.exp(lf + 0.5 * np.log(w[a:a + chunk])[:, None])
        tr += float(np.sum(F.real ** 2 + F.imag ** 2))
        G += F.conj().T @ F
    return tr, float(np.sum(np.abs(G) ** 2))


def _tensor(kernel, cell, band_tol=1e-24, rtol=1e-10, max_panels=128):
    if cell.area == 0:
        return 0.0, 0.0
    lo, hi = _tensor_band(kernel, cell, band_tol)
    n_r, n_t = 2, 2
    prev = _tensor_integrals(kernel, cell, n_r, n_t, lo, hi)
    while True:
        n_r, n_t = 2 * n_r, 2 * n_t
        cur = _tensor_integrals(kernel, cell, n_r, n_t, lo, hi)
        if (abs(cur[0] - prev[0]) <= rtol * max(cur[0], 1e-300)
                and abs(cur[1] - prev[1]) <= rtol * max(cur[1], 1e-300)):
            return cur
        if n_r >= max_panels:
            raise QuadratureError("cell tensor quadrature did not converge",
                                  residual=abs(cur[0] - prev[0]))
        prev = cur


def trace_integral(kernel, cell):
    """``int_T K(z, z) dmu`` by two-dimensional quadrature over the cell."""
    if np.isfinite(cell.outer_radius):
        kernel.check_window(cell.outer_radius, what="cell")
    return _tensor(kernel, cell)[0]


def pair_intensity_integral(kernel, cell):
    """``(int_T K dmu)**2 - int_T int_T |K(z, w)|**2 dmu dmu`` by quadrature.

    Uses a tensor Gauss rule on the cell: with ``F[q, n] = sqrt(w_q) g_n(z_q)``
    the two integrals are ``|F|_F**2`` and ``|F^H F|_F**2``.  This is
    independent of the Galerkin matrix used for the spectrum.
    """
    if np.isfinite(cell.outer_radius):
        kernel.check_window(cell.outer_radius, what="cell")
    tr, hs = _tensor(kernel, cell)
    return tr * tr - hs


def lambda_witnesses(kernel, cell, galerkin=None):
    """Certified lower bounds for the two largest eigenvalues of a cell.

    The test functions are the normalised kernel at the cell centre,
    ``g1 = K(., z_c) / sqrt(K(z_c, z_c))``, and ``g2 = (z - z_c) g1 / rho(z_c)``.
    By the min-max principle

        lambda_1 >= <M g1, g1> / <g1, g1>,
        lambda_2 >= min over span(g1, g2) of the Rayleigh quotient,

    the latter being the smaller eigenvalue of a 2x2 generalised problem.
    Both test functions are projected onto the basis band of the Galerkin
    matrix, where interlacing keeps the bounds valid for the full operator.

    Returns
    -------
    lambda1_lb, lambda2_lb : float
    """
    if galerkin is None:
        galerkin = restriction_matrix(kernel, cell)
    M = galerkin.matrix
    if M.shape[0] == 0:
        return 0.0, 0.0
    lo, hi = galerkin.band
    zc = complex(cell.center)
    logc = kernel.log_moments
    lkc = float(log_kernel_diag(kernel, zc))
    rho_c = kernel.radius_field.rho(abs(zc))
    idx = np.arange(max(lo - 1, 0), hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        lz = math.log(abs(zc)) if zc != 0 else -np.inf
        la = idx * lz - 0.5 * logc[idx] - 0.5 * lkc
    la = np.where(np.isnan(la), -0.5 * lkc, la)  # n = 0 at the origin
    a = np.exp(la - 1j * idx * np.angle(zc))  # coefficients of g1
    v1 = a[idx >= lo]
    # z e_{n-1} = sqrt(c_n / c_{n-1}) e_n, so (z - zc) g1 has coefficients
    # a_{n-1} sqrt(c_n / c_{n-1}) - zc a_n, computed without cancellation.
    n = np.arange(lo, hi)
    if zc == 0:
        shift = np.zeros(n.size, complex)
        prev = n >= 1
        shift[prev] = a[np.searchsorted(idx, n[prev] - 1)] * np.exp(
            0.5 * (logc[n[prev]] - logc[n[prev] - 1]))
        v2 = shift
    else:
        v2 = np.zeros(n.size, complex)
        ok = n >= 1
        delta = logc[n[ok]] - logc[n[ok] - 1]
        a_prev = a[np.searchsorted(idx, n[ok] - 1)]
        v2[ok] = a_prev * np.exp(-0.5 * delta) * (np.exp(delta) - abs(zc) ** 2)
        v2[~ok] = -zc * a[np.searchsorted(idx, 0)] if lo == 0 else 0.0
    v2 = v2 / rho_c
    V = np.column_stack([v1.conj(), v2.conj()])
    A = V.conj().T @ M @ V
    B = V.conj().T @ V
    A = 0.5 * (A + A.conj().T)
    B = 0.5 * (B + B.conj().T)
    lam1 = float(np.real(A[0, 0] / B[0, 0])) if B[0, 0].real > 0 else 0.0
    # smaller generalised eigenvalue; fall back if g2 is (numerically) in span(g1)
    try:
        lam2 = float(eigh(A, B, eigvals_only=True)[0])
    except np.linalg.LinAlgError:
        lam2 = 0.0
    return max(min(lam1, 1.0), 0.0), max(min(lam2, 1.0), 0.0)


# --- sweeps -----------------------------------------------------------------

CSV_COLUMNS = ["n", "k", "abs_z_center", "rho_center", "trace", "hs_norm_sq", "p0", "p1",
               "p_geq2_exact", "p_geq2_second_order", "lambda1_lb", "lambda2_lb"]


@dataclass(frozen=True)
class CellRecord:
    """One row of a cell sweep."""

    n: int
    k: int
    abs_z_center: float
    rho_center: float
    trace: float
    hs_norm_sq: float
    p0: float
    p1: float
    p_geq2_exact: float
    p_geq2_second_order: float
    lambda1_lb: float
    lambda2_lb: float
    eigenvalues: np.ndarray = field(default=None, repr=False, compare=False)

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


def analyse_cell(kernel, cell, *, band_tol=DEFAULT_BAND_TOL, keep_eigenvalues=False):
    """Spectrum, probabilities and witnesses of one cell as a :class:`CellRecord`."""
    gm = restriction_matrix(kernel, cell, band_tol=band_tol)
    spec = spectrum(gm)
    probs = cell_probabilities(spec)
    l1, l2 = lambda_witnesses(kernel, cell, gm)
    zc = complex(cell.center)
    n, k = (cell.label + (0, 0))[:2]
    return CellRecord(n, k, abs(zc), kernel.radius_field.rho(abs(zc)), spec.trace,
                      spec.hs_norm_sq, probs.p0, probs.p1, probs.p_geq2_exact,
                      probs.p_geq2_second_order, l1, l2,
                      spec.eigenvalues if keep_eigenvalues else None)


def sweep_cells(kernel, cells, *, workers=1, reuse_rotations=True, band_tol=DEFAULT_BAND_TOL):
    """Analyse many cells; results come back in input order.

    For a radial weight the rotation ``z -> exp(i t) z`` conjugates the
    restriction matrices of two sectors of the same ring by a diagonal
    unitary, so with ``reuse_rotations`` only one sector per ring is computed
    and copied to its siblings.
    """
    cells = list(cells)
    keys = []
    for c in cells:
        if reuse_rotations and isinstance(c, AnnularSector):
            keys.append(("sector", c.n, c.scale, c.sectors))
        else:
            keys.append(("cell", id(c)))
    reps = {}
    for key, c in zip(keys, cells):
        reps.setdefault(key, c)
    order = list(reps)

    def work(key):
        return analyse_cell(kernel, reps[key], band_tol=band_tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = dict(zip(order, ex.map(work, order)))
    else:
        results = {key: work(key) for key in order}
    out = []
    for key, c in zip(keys, cells):
        rec = results[key]
        if rec.k != (c.label + (0, 0))[1]:
            rec = CellRecord(*([c.label[0], c.label[1]] + rec.row()[2:]))
        out.append(rec)
    return out


def write_cells_csv(path, records, header=None):
    """Write sweep records with optional ``# key = value`` header lines."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in (header or {}).items():
            fh.write("# %s = %s\n" % (k, v))
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for rec in records:
            wr.writerow([rec.n, rec.k] + ["%.17g" % v for v in rec.row()[2:]])


def read_cells_csv(path):
    """Read a file written by :func:`write_cells_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rd = csv.DictReader(lines)
    out = []
    for row in rd:
        vals = [int(row["n"]), int(row["k"])] + [float(row[c]) for c in CSV_COLUMNS[2:]]
        out.append(CellRecord(*vals))
    return out
