import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockdpp.cells import AnnularSector, CellPartition, Disk, ShiftedAnnularSector
from fockdpp.errors import ConfigError, CoverageError

PARTITIONS = [CellPartition.standard(6), CellPartition.refined(4, 10),
              CellPartition.coarse(3, 4), CellPartition.shifted(6)]


@pytest.mark.parametrize("part", PARTITIONS, ids=lambda p: "%s-%g" % (p.kind, p.scale))
def test_partition_areas_tile_disk(part):
    total = sum(c.area for c in part.cells())
    assert total == pytest.approx(math.pi * part.radius ** 2, rel=1e-12)


def test_cell_counts_per_ring():
    assert len(CellPartition.standard(12).cells()) == 78
    assert len(CellPartition.refined(8, 3).ring(3)) == 24
    assert len(CellPartition.shifted(4).cells()) == 1 + 1 + 2 + 3 + 4


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 5.99), st.floats(0, 2 * math.pi), st.sampled_from(PARTITIONS))
def test_each_point_in_exactly_one_cell(r, t, part):
    z = r * complex(math.cos(t), math.sin(t))
    if abs(z) >= part.radius:
        return
    cells = part.cells()
    hits = [c for c in cells if c.contains(z)]
    assert len(hits) == 1
    n, k = part.locate(z)
    assert hits[0].label == (int(n[0]), int(k[0]))


def test_locate_outside_raises():
    with pytest.raises(CoverageError):
        CellPartition.standard(3).locate([0.5, 3.0])


def test_half_open_boundaries():
    c = AnnularSector(2, 1)
    assert c.contains(1.0) and not c.contains(2.0)
    assert not AnnularSector(2, 2).contains(1.0)


def test_sector_geometry():
    c = AnnularSector(3, 2)
    assert c.area == pytest.approx(0.5 * (2 * math.pi / 3) * 5)
    assert c.center == pytest.approx(2.5 * np.exp(1j * math.pi))
    assert c.outer_radius == 3.0
    assert AnnularSector(1, 1).center == 0


def test_shifted_cell_wraps_angle():
    c = ShiftedAnnularSector(4, 4)
    assert c.contains(4.0 + 0.01j) and c.contains(4.0 - 0.01j)


@pytest.mark.parametrize("cell", [AnnularSector(3, 2), ShiftedAnnularSector(5, 1, 0.5),
                                  Disk(0, 1.5), Disk(2 + 1j, 0.7)], ids=repr)
def test_quadrature_moments(cell):
    z, w = cell.quadrature(2, 2)
    assert np.sum(w) == pytest.approx(cell.area, rel=1e-13)
    # int |z|**2 over a polar rectangle: dt (b**4 - a**4) / 4
    # over a disk: pi r**2 (|c|**2 + r**2/2)
    if isinstance(cell, Disk):
        exact = cell.area * (abs(cell.center) ** 2 + cell.radius ** 2 / 2)
    else:
        a, b, t1, t2 = cell.polar
        exact = (t2 - t1) * (b ** 4 - a ** 4) / 4
    assert np.sum(w * np.abs(z) ** 2) == pytest.approx(exact, rel=1e-12)
    # Gauss nodes are interior, so every node lies in the open cell
    assert np.all(cell.contains(z))


def test_quadrature_breaks_become_edges():
    z, w = AnnularSector(3, 1).quadrature(1, 1, order=4, breaks=(2.5,))
    r = np.unique(np.round(np.abs(z), 12))
    assert np.sum(r < 2.5) == 4 and np.sum(r > 2.5) == 4


@pytest.mark.parametrize("args", [(0, 1), (2, 3), (3, 1, -1.0)])
def test_invalid_sectors(args):
    with pytest.raises(ConfigError):
        AnnularSector(*args)


def test_invalid_partitions():
    with pytest.raises(ConfigError):
        CellPartition("hexagonal", 3)
    with pytest.raises(ConfigError):
        CellPartition("shifted", 3, 1.0, 2)
    with pytest.raises(ConfigError):
        Disk(0, -1)
