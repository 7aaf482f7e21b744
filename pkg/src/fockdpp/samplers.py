"""Exact samplers: projection DPP, inhomogeneous Poisson, and Ginibre.

The determinantal sampler is the standard sequential projection algorithm
for the rank-``N`` kernel.  With orthonormal
scaled features ``g_n(z) = e_n(z) sqrt(mu(z))`` the ``i``-th point is drawn
from the density

    p_i(z) = |g(z) - Q Q^H g(z)|**2 / (N - i)

where the columns of ``Q`` span the features of the points already placed.
Draws use rejection from the radial envelope ``1.1 max_{shell} K(z, z) mu(z)``
over 256 concentric shells; conditioning only lowers ``p_i`` so the envelope
remains valid at every step.
"""

from dataclasses import dataclass, field
import json
import math
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

from . import _backend
from ._quadrature import panel_rule
from .errors import ConfigError, EnvelopeError, TableError, WindowError

__all__ = [
    "Window", "PointConfiguration", "make_rng", "sample_dpp", "sample_poisson",
    "ginibre_oracle", "poisson_window_mass",
]


@dataclass(frozen=True)
class Window:
    """Annulus ``r_in <= |z| <= r_out`` (a disk when ``r_in = 0``)."""

    r_out: float
    r_in: float = 0.0

    def __post_init__(self):
        if not (0 <= self.r_in <= self.r_out):
            raise ConfigError("window needs 0 <= r_in <= r_out")

    @classmethod
    def disk(cls, R):
        return cls(float(R), 0.0)

    def contains(self, z):
        r = np.abs(np.asarray(z))
        return (r >= self.r_in) & (r <= self.r_out)

    @property
    def area(self):
        return math.pi * (self.r_out ** 2 - self.r_in ** 2)

    def to_dict(self):
        return {"shape": "annulus" if self.r_in > 0 else "disk",
                "r_in": self.r_in, "r_out": self.r_out}


@dataclass
class PointConfiguration:
    """A finite point sample in a window.

    Attributes
    ----------
    points : ndarray of complex
    window : Window
    process : str
        ``"dpp"``, ``"poisson"`` or ``"ginibre"``.
    seed : int
    n_total : int
        Number of points before restriction to the window.
    kernel_rank : int or None
    meta : dict
    """

    points: np.ndarray
    window: Window
    process: str
    seed: int
    n_total: int
    kernel_rank: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.points.size)

    def restrict(self, window):
        """Points inside a smaller window (metadata kept)."""
        keep = window.contains(self.points)
        return PointConfiguration(self.points[keep], window, self.process, self.seed,
                                  self.n_total, self.kernel_rank, dict(self.meta))

    def sidecar(self):
        out = {"process": self.process, "seed": int(self.seed), "n_points": len(self),
               "n_total": int(self.n_total), "kernel_rank": self.kernel_rank,
               "window": self.window.to_dict()}
        out.update(self.meta)
        return out

    def to_csv(self, path, header=None):
        """Write ``re,im`` rows and a JSON sidecar ``<path>.json``."""
        with open(path, "w", encoding="utf-8") as fh:
            for k, v in (header or {}).items():
                fh.write("# %s = %s\n" % (k, v))
            fh.write("re,im\n")
            for z in self.points:
                fh.write("%.17g,%.17g\n" % (z.real, z.imag))
        side = self.sidecar()
        side.update(header or {})
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(side, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path):
        with open(str(path) + ".json", "r", encoding="utf-8") as fh:
            side = json.load(fh)
        with open(path, "r", encoding="utf-8") as fh:
            rows = [ln.split(",") for ln in fh
                    if ln.strip() and not ln.startswith("#") and not ln.startswith("re,")]
        pts = np.array([complex(float(a), float(b)) for a, b in rows], dtype=complex)
        w = side["window"]
        known = {"process", "seed", "n_points", "n_total", "kernel_rank", "window"}
        return cls(pts, Window(w["r_out"], w["r_in"]), side["process"], side["seed"],
                   side["n_total"], side.get("kernel_rank"),
                   {k: v for k, v in side.items() if k not in known})


def make_rng(seed, stream=0):
    """Counter-based generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


# --- projection DPP ---------------------------------------------------------

class _Envelope:
    """Piecewise-constant radial bound on ``K(z, z) mu(z)``."""

    def __init__(self, kernel, shells=256, factor=1.1, sub=8):
        basis = kernel.basis
        logc = basis.log_moments
        self.logc = np.ascontiguousarray(logc)
        # radius beyond which the rank-N process has (numerically) no mass
        R = self._support_radius(basis)
        edges = np.linspace(0.0, R, shells + 1)
        probe = np.linspace(0.0, 1.0, sub + 1)
        r = (edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * probe[None, :])
        ld = self._log_diag(basis, r)
        self.edges = edges
        self.log_bound = ld.max(axis=1) + math.log(factor)
        area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
        self.log_mass = self.log_bound + np.log(area)
        self.p_shell = np.exp(self.log_mass - logsumexp(self.log_mass))
        self.cdf = np.cumsum(self.p_shell)
        self.cdf[-1] = 1.0
        self.R = R

    @staticmethod
    def _log_diag(basis, r):
        n = np.arange(basis.rank, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = n * 2.0 * np.log(r)[..., None]
        t = np.where(np.isnan(t), 0.0, t) - basis.log_moments
        return logsumexp(t, axis=-1) + basis.log_mu_density(r)

    @staticmethod
    def _support_radius(basis):
        """Radius containing all but ~1e-14 of the expected point count."""
        N = basis.rank
        R = 1.0
        while True:
            r, w = panel_rule(np.linspace(0.0, R, 257), 8)
            mass = float(np.sum(np.exp(_Envelope._log_diag(basis, r)) * 2 * np.pi * r * w))
            edge = float(np.exp(_Envelope._log_diag(basis, np.array([R])))[0] * 2 * np.pi * R)
            if mass >= N * (1.0 - 1e-13) and edge * R < 1e-14 * N:
                return R
            R *= 1.25

    def propose(self, rng, size):
        u = rng.random(size)
        shell = np.searchsorted(self.cdf, u, side="right")
        shell = np.minimum(shell, self.cdf.size - 1)
        a, b = self.edges[shell], self.edges[shell + 1]
        r = np.sqrt(a * a + rng.random(size) * (b * b - a * a))
        theta = 2.0 * np.pi * rng.random(size)
        return r, theta, np.exp(self.log_bound[shell]), rng.random(size)


def sample_dpp(kernel, window=None, seed=0, *, stream=0, shells=256, batch=None,
               min_acceptance=1e-4):
    """Exact sample of the rank-``N`` projection DPP.

    All ``N`` points of the process on the plane are generated, then
    restricted to ``window``; ``n_total`` records ``N``.

    Parameters
    ----------
    kernel : TruncatedKernel
    window : Window, optional
        Defaults to the kernel window.
    seed, stream : int
        Keys of the counter-based generator.
    shells : int
        Number of radial shells of the rejection envelope.

    Raises
    ------
    WindowError
        If the window extends beyond the kernel window.
    EnvelopeError
        If the envelope is violated or acceptance drops below ``min_acceptance``.
    """
    if window is None:
        window = Window.disk(kernel.window_radius)
    if window.r_out > kernel.window_radius * (1.0 + 1e-9):
        raise WindowError("sampling window %.6g exceeds the kernel window %.6g"
                          % (window.r_out, kernel.window_radius))
    N = kernel.rank
    env = _get_envelope(kernel, shells)
    rng = make_rng(seed, stream)
    V = np.zeros((N, N), dtype=complex)  # row j: j-th orthonormal direction
    pts = np.empty(N, dtype=complex)
    logc = env.logc
    basis = kernel.basis
    step = batch or 64
    for i in range(N):
        proposed = 0
        while True:
            r, theta, bound, u = env.propose(rng, step)
            with np.errstate(divide="ignore"):
                log_r = np.maximum(np.log(r), -700.0)
            hmu = 0.5 * basis.log_mu_density(r)
            j, res = _backend.hkpv_first_accept(log_r, theta, hmu, bound, u, logc, V, i)
            if j >= 0:
                break
            proposed += step
            if proposed > 10.0 / min_acceptance:
                raise EnvelopeError("acceptance rate below %g at step %d" % (min_acceptance, i))
        pts[i] = r[j] * np.exp(1j * theta[j])
        q = res / np.linalg.norm(res)
        if i:
            q = q - (V[:i].conj() @ q) @ V[:i]  # one reorthogonalisation pass
            q /= np.linalg.norm(q)
        V[i] = q
    cfg = PointConfiguration(pts, Window.disk(np.inf), "dpp", int(seed), N, N,
                             {"weight": basis.weight.description, "stream": int(stream)})
    return cfg.restrict(window)


_ENV_CACHE = {}


def _get_envelope(kernel, shells):
    key = (id(kernel), shells)
    hit = _ENV_CACHE.get(key)
    if hit is None or hit[0] is not kernel:
        hit = (kernel, _Envelope(kernel, shells))
        if len(_ENV_CACHE) > 16:
            _ENV_CACHE.clear()
        _ENV_CACHE[key] = hit
    return hit[1]


# --- Poisson ----------------------------------------------------------------

def _radial_table(rf, window, nodes):
    r = np.linspace(window.r_in, window.r_out, nodes)
    # cumulative 2 pi int r rho^-2 dr, panel by panel
    rr, ww = panel_rule(np.stack([r[:-1], r[1:]], axis=1), 8)
    dens = 2.0 * np.pi * rr * np.exp(-2.0 * rf.log_rho_profile(rr))
    inc = np.sum(dens * ww, axis=1)
    cdf = np.concatenate([[0.0], np.cumsum(inc)])
    return r, cdf


def poisson_window_mass(rf, window, nodes=4096):
    """``int_W rho**-2 dm``, the expected Poisson count in ``window``."""
    if window.r_out == window.r_in:
        return 0.0
    return float(_radial_table(rf, window, nodes)[1][-1])


def sample_poisson(rf, window, seed=0, *, stream=0, nodes=4096):
    """Poisson process with intensity ``rho**-2`` in ``window``.

    The count is Poisson with mean ``int_W rho**-2 dm``; radii are drawn by
    inverting the radial CDF tabulated on ``nodes`` points with a monotone
    cubic interpolant, angles uniformly.

    Raises
    ------
    TableError
        If the tabulated CDF is not strictly increasing.
    """
    rng = make_rng(seed, stream)
    meta = {"weight": rf.weight.description, "stream": int(stream)}
    if window.r_out == window.r_in:
        return PointConfiguration(np.zeros(0, complex), window, "poisson", int(seed), 0, None, meta)
    r, cdf = _radial_table(rf, window, nodes)
    if np.any(np.diff(cdf) <= 0):
        raise TableError("radial CDF is not strictly increasing")
    total = cdf[-1]
    inv = PchipInterpolator(cdf / total, r)
    n = int(rng.poisson(total))
    rad = np.clip(inv(rng.random(n)), window.r_in, window.r_out)
    pts = rad * np.exp(2j * np.pi * rng.random(n))
    meta["expected_count"] = total
    return PointConfiguration(pts, window, "poisson", int(seed), n, None, meta)


# --- Ginibre ----------------------------------------------------------------

def ginibre_oracle(N, seed=0, *, stream=0):
    """Eigenvalues of an ``N x N`` complex Gaussian matrix with ``E|a_ij|**2 = 1/2``.

    This ensemble has the same law as the rank-``N`` projection DPP for the
    weight ``|z|**2``.
    """
    if N < 1:
        raise ConfigError("N must be positive")
    rng = make_rng(seed, stream)
    G = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) * 0.5
    ev = np.linalg.eigvals(G)
    return PointConfiguration(ev, Window.disk(np.inf), "ginibre", int(seed), N, None,
                              {"stream": int(stream)})
