"""Cells of the polar partitions of the plane and their quadrature rules.

The basic partition has cells

    T_{n,k} = {s (n-1) <= |z| < s n,  (k-1)/m_n <= arg(z) / 2pi < k/m_n},

with ``m_n = q n`` sectors in ring ``n``.  ``s = 1, q = 1`` is the standard
grid; ``s = 1/l, q = l`` is its ``l``-fold refinement and ``s = N, q = 1``
a coarse grid.  The shifted grid moves rings by half a ring width and sectors
by half a sector, with a central disk ``D(0, s/2)``.  Every cell is
half-open so each point belongs to exactly one cell of a partition.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
import math

import numpy as np

from ._quadrature import panel_rule
from .errors import ConfigError, CoverageError

TWO_PI = 2.0 * math.pi

__all__ = ["Cell", "AnnularSector", "ShiftedAnnularSector", "Disk", "CellPartition"]


def _angle(z):
    """Argument in [0, 2 pi)."""
    t = np.angle(z)
    return np.where(t < 0, t + TWO_PI, t)


def _radial_edges(a, b, n, breaks):
    edges = np.linspace(a, b, n + 1)
    inner = [x for x in breaks if a < x < b]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    return edges


class Cell(ABC):
    """A bounded region of the plane."""

    @abstractmethod
    def contains(self, z):
        """Boolean mask of points inside the (half-open) cell."""

    @property
    @abstractmethod
    def center(self) -> complex:
        """Reference point ``z_{n,k}`` of the cell."""

    @property
    @abstractmethod
    def area(self) -> float:
        """Lebesgue area."""

    @property
    @abstractmethod
    def outer_radius(self) -> float:
        """``max |z|`` over the closure."""

    @property
    def label(self):
        return ()

    # Separable cells are polar rectangles r_in <= r < r_out, t1 <= theta < t2.
    separable = False
    polar = None

    def quadrature(self, n_r, n_t, order=16, breaks=()):
        """Tensor Gauss-Legendre nodes and weights on the cell.

        ``n_r`` and ``n_t`` are the numbers of radial and angular panels;
        ``breaks`` are radii |z| across which integrands may be non-smooth.
        """
        raise NotImplementedError


class _PolarRect(Cell):
    """Polar rectangle ``r_in <= r < r_out``, ``t1 <= arg < t2`` (angles mod 2 pi)."""

    separable = True

    def __init__(self, r_in, r_out, t1, t2):
        if not (0 <= r_in <= r_out) or not (t1 <= t2 <= t1 + TWO_PI + 1e-12):
            raise ConfigError("invalid polar rectangle")
        self.polar = (float(r_in), float(r_out), float(t1), float(t2))

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        r_in, r_out, t1, t2 = self.polar
        r = np.abs(z)
        if t2 - t1 >= TWO_PI - 1e-15:
            ang = np.ones(z.shape, dtype=bool)
        else:
            ang = np.mod(_angle(z) - t1, TWO_PI) < (t2 - t1)
        return (r >= r_in) & (r < r_out) & ang

    @property
    def area(self):
        r_in, r_out, t1, t2 = self.polar
        return 0.5 * (t2 - t1) * (r_out ** 2 - r_in ** 2)

    @property
    def outer_radius(self):
        return self.polar[1]

    @property
    def center(self):
        r_in, r_out, t1, t2 = self.polar
        if r_in == 0 and t2 - t1 >= TWO_PI - 1e-15:
            return 0j
        return 0.5 * (r_in + r_out) * complex(math.cos(0.5 * (t1 + t2)), math.sin(0.5 * (t1 + t2)))

    def quadrature(self, n_r, n_t, order=16, breaks=()):
        r_in, r_out, t1, t2 = self.polar
        r, wr = panel_rule(_radial_edges(r_in, r_out, n_r, breaks), order)
        t, wt = panel_rule(np.linspace(t1, t2, n_t + 1), order)
        z = (r[:, None] * np.exp(1j * t[None, :])).ravel()
        w = (wr[:, None] * r[:, None] * wt[None, :]).ravel()
        return z, w


class AnnularSector(_PolarRect):
    """Cell ``T_{n,k}`` of a sector grid.

    Parameters
    ----------
    n : int
        Ring index, ``n >= 1``; the ring is ``scale (n-1) <= |z| < scale n``.
    k : int
        Sector index, ``1 <= k <= sectors``.
    scale : float
        Ring width.
    sectors : int, optional
        Number of sectors in the ring; defaults to ``n``.
    """

    def __init__(self, n, k, scale=1.0, sectors=None):
        n, k = int(n), int(k)
        m = n if sectors is None else int(sectors)
        if n < 1 or m < 1 or not 1 <= k <= m or not scale > 0:
            raise ConfigError("invalid sector cell (n=%r, k=%r, sectors=%r)" % (n, k, m))
        self.n, self.k, self.scale, self.sectors = n, k, float(scale), m
        super().__init__(scale * (n - 1), scale * n, TWO_PI * (k - 1) / m, TWO_PI * k / m)

    @property
    def label(self):
        return (self.n, self.k)

    def rotated(self, k):
        """Same ring, sector ``k``."""
        return AnnularSector(self.n, k, self.scale, self.sectors)

    def __repr__(self):
        return "AnnularSector(n=%d, k=%d, scale=%g, sectors=%d)" % (
            self.n, self.k, self.scale, self.sectors)


class ShiftedAnnularSector(_PolarRect):
    """Cell of the shifted grid: ``scale (n - 1/2) <= |z| < scale (n + 1/2)``,
    ``(k - 1/2)/n <= arg(z) / 2pi < (k + 1/2)/n`` (mod 1)."""

    def __init__(self, n, k, scale=1.0):
        n, k = int(n), int(k)
        if n < 1 or not 1 <= k <= n or not scale > 0:
            raise ConfigError("invalid shifted cell (n=%r, k=%r)" % (n, k))
        self.n, self.k, self.scale = n, k, float(scale)
        super().__init__(scale * (n - 0.5), scale * (n + 0.5),
                         TWO_PI * (k - 0.5) / n, TWO_PI * (k + 0.5) / n)

    @property
    def label(self):
        return (self.n, self.k)

    def __repr__(self):
        return "ShiftedAnnularSector(n=%d, k=%d, scale=%g)" % (self.n, self.k, self.scale)


class Disk(Cell):
    """Open disk ``|z - center| < radius``."""

    def __init__(self, center, radius, label=()):
        if not radius >= 0:
            raise ConfigError("disk radius must be non-negative")
        self._center = complex(center)
        self.radius = float(radius)
        self._label = tuple(label)
        if self._center == 0:
            self.separable = True
            self.polar = (0.0, self.radius, 0.0, TWO_PI)

    @property
    def label(self):
        return self._label

    def contains(self, z):
        return np.abs(np.asarray(z, dtype=complex) - self._center) < self.radius

    @property
    def center(self):
        return self._center

    @property
    def area(self):
        return math.pi * self.radius ** 2

    @property
    def outer_radius(self):
        return abs(self._center) + self.radius

    def quadrature(self, n_r, n_t, order=16, breaks=()):
        if self._center != 0:
            breaks = ()  # circles |z| = b are not aligned with these polar coordinates
        r, wr = panel_rule(_radial_edges(0.0, self.radius, n_r, breaks), order)
        # periodic trapezoid rule in angle (spectrally accurate)
        m = n_t * order
        t = TWO_PI * (np.arange(m) + 0.5) / m
        z = self._center + (r[:, None] * np.exp(1j * t[None, :])).ravel()
        w = (wr[:, None] * r[:, None] * np.full(m, TWO_PI / m)[None, :]).ravel()
        return z, w

    def __repr__(self):
        return "Disk(%r, %g)" % (self._center, self.radius)


@dataclass(frozen=True)
class CellPartition:
    """Polar partition of the disk ``|z| < outer radius``.

    Attributes
    ----------
    kind : str
        ``"standard"`` (sector grid) or ``"shifted"``.
    nmax : int
        Number of rings.
    scale : float
        Ring width.
    sector_factor : int
        Ring ``n`` has ``sector_factor * n`` sectors (standard grid only).
    """

    kind: str = "standard"
    nmax: int = 12
    scale: float = 1.0
    sector_factor: int = 1

    def __post_init__(self):
        if self.kind not in ("standard", "shifted"):
            raise ConfigError("unknown partition kind %r" % self.kind)
        if self.nmax < 1 or not self.scale > 0 or self.sector_factor < 1:
            raise ConfigError("invalid partition parameters")
        if self.kind == "shifted" and self.sector_factor != 1:
            raise ConfigError("shifted partitions have one sector per ring index")

    @classmethod
    def standard(cls, nmax, scale=1.0):
        return cls("standard", nmax, scale, 1)

    @classmethod
    def refined(cls, factor, nmax):
        """``factor``-fold refinement: ring width ``1/factor`` and ``factor n`` sectors."""
        return cls("standard", nmax, 1.0 / factor, int(factor))

    @classmethod
    def coarse(cls, N, nmax):
        """Rings of width ``N`` with ``n`` sectors each."""
        return cls("standard", nmax, float(N), 1)

    @classmethod
    def shifted(cls, nmax, scale=1.0):
        return cls("shifted", nmax, scale, 1)

    @property
    def radius(self):
        """Radius of the covered disk."""
        if self.kind == "standard":
            return self.scale * self.nmax
        return self.scale * (self.nmax + 0.5)

    def ring(self, n):
        """Cells of ring ``n``."""
        if self.kind == "standard":
            m = self.sector_factor * n
            return [AnnularSector(n, k, self.scale, m) for k in range(1, m + 1)]
        if n == 0:
            return [Disk(0j, 0.5 * self.scale, label=(0, 0))]
        return [ShiftedAnnularSector(n, k, self.scale) for k in range(1, n + 1)]

    def cells(self):
        """All cells, ring by ring."""
        first = 1 if self.kind == "standard" else 0
        out = []
        for n in range(first, self.nmax + 1):
            out.extend(self.ring(n))
        return out

    def locate(self, z):
        """Ring and sector index ``(n, k)`` of each point.

        Returns
        -------
        n, k : ndarray of int

        Raises
        ------
        CoverageError
            If a point lies outside the partition.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        r = np.abs(z)
        if np.any(r >= self.radius):
            raise CoverageError("point at |z| = %.6g outside the partition (radius %.6g)"
                                % (r.max(), self.radius))
        frac = _angle(z) / TWO_PI
        if self.kind == "standard":
            n = np.floor(r / self.scale).astype(np.int64) + 1
            m = self.sector_factor * n
            k = np.minimum(np.floor(frac * m).astype(np.int64) + 1, m)
            return n, k
        n = np.floor(r / self.scale + 0.5).astype(np.int64)
        x = frac * np.maximum(n, 1)
        k = np.floor(x + 0.5).astype(np.int64)
        k = np.where(k == 0, n, k)
        k = np.where(n == 0, 0, np.minimum(k, np.maximum(n, 1)))
        return n, k
