import math

import numpy as np
import pytest
from scipy.special import gammainc

from fockdpp.cells import AnnularSector, CellPartition, Disk
from fockdpp.errors import ConfigError, SpectrumError, WindowError
from fockdpp.spectra import (GalerkinMatrix, analyse_cell, cell_probabilities, lambda_witnesses,
                             pair_intensity_integral, poisson_cell_prob, read_cells_csv,
                             restriction_matrix, spectrum, sweep_cells, trace_integral,
                             write_cells_csv)

from conftest import kernel


def bernoulli_sum_oracle(lam):
    """Distribution of a sum of independent Bernoulli variables by convolution."""
    p = np.array([1.0])
    for x in lam:
        p = np.convolve(p, [1 - x, x])
    return p


# --- spectra of explicit matrices ------------------------------------------------

def test_identity_spectrum():
    pr = cell_probabilities(spectrum(np.eye(3)))
    assert (pr.p0, pr.p1, pr.p_geq2_exact) == (0.0, 0.0, 1.0)
    assert pr.expected_count == 3.0 and pr.pair_intensity == 6.0


def test_zero_spectrum():
    s = spectrum(np.zeros((4, 4)))
    pr = cell_probabilities(s)
    assert s.trace == 0 and pr.p0 == 1.0 and pr.p_geq2_exact == 0.0


def test_two_eigenvalue_probabilities():
    pr = cell_probabilities(spectrum(np.diag([0.2, 0.1])))
    assert pr.p0 == pytest.approx(0.72, abs=1e-15)
    assert pr.p1 == pytest.approx(0.26, abs=1e-15)
    assert pr.p_geq2_exact == pytest.approx(0.02, abs=1e-15)
    assert pr.p_geq2_second_order == pytest.approx(0.02, abs=1e-15)


def test_probabilities_match_convolution():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
    lam = rng.random(8) * 0.6
    M = (Q * lam) @ Q.conj().T
    pr = cell_probabilities(spectrum(M))
    dist = bernoulli_sum_oracle(lam)
    assert pr.p0 == pytest.approx(dist[0], rel=1e-12)
    assert pr.p1 == pytest.approx(dist[1], rel=1e-12)
    assert pr.p_geq2_exact == pytest.approx(dist[2:].sum(), rel=1e-12)
    assert pr.p_geq2_exact <= pr.p_geq2_second_order


def test_tiny_eigenvalues_no_cancellation():
    pr = cell_probabilities(spectrum(np.diag([1e-9, 1e-9])))
    assert pr.p_geq2_exact == pytest.approx(1e-18, rel=1e-9)


def test_spectrum_rejects_bad_matrices():
    with pytest.raises(ConfigError):
        spectrum(np.array([[0.1, 0.2], [0.0, 0.1]]))
    with pytest.raises(ConfigError):
        spectrum(np.zeros((2, 3)))
    with pytest.raises(SpectrumError):
        spectrum(np.diag([1.5, 0.1]))


def test_poisson_cell_probabilities():
    pr = poisson_cell_prob(0.1)
    assert pr.p_geq2 == pytest.approx(0.0046788, abs=5e-8)
    assert pr.p_geq2 == pytest.approx(1 - math.exp(-0.1) * 1.1, rel=1e-12)
    assert poisson_cell_prob(1e-8).p_geq2 == pytest.approx(0.5e-16, rel=1e-7)
    assert poisson_cell_prob(0.0) == (1.0, 0.0, 0.0)
    with pytest.raises(ConfigError):
        poisson_cell_prob(-1)


# --- restriction matrices -------------------------------------------------------------

def test_gaussian_centred_disk_trace():
    # K mu = 2/pi for the Gaussian weight
    k = kernel(2.0, 3.0)
    s = spectrum(restriction_matrix(k, Disk(0, 0.3)))
    assert s.trace == pytest.approx(0.18, rel=1e-10)
    assert trace_integral(k, Disk(0, 0.3)) == pytest.approx(0.18, rel=1e-10)


def test_gaussian_centred_disk_eigenvalues():
    k = kernel(2.0, 4.0)
    R = 1.3
    s = spectrum(restriction_matrix(k, Disk(0, R)))
    lam = np.sort(gammainc(np.arange(k.rank) + 1, 2 * R * R))[::-1]
    m = s.eigenvalues.size
    assert np.allclose(s.eigenvalues, lam[:m], atol=1e-12)
    assert lam[m:].sum() < 1e-18


def test_full_space_rank():
    k = kernel(2.0, 8.0, rank=16)
    pr = cell_probabilities(spectrum(restriction_matrix(k, Disk(0, 8.0))))
    assert pr.expected_count == pytest.approx(16, rel=1e-12)
    assert pr.pair_intensity == pytest.approx(16 ** 2 - 16, rel=1e-10)


@pytest.mark.parametrize("alpha,cell", [(1.5, AnnularSector(4, 2)), (1.0, AnnularSector(7, 5)),
                                        (1.5, Disk(1.5 + 2j, 0.8)),
                                        (2.0, Disk(-1 + 0.5j, 0.4))], ids=str)
def test_galerkin_matches_tensor_quadrature(alpha, cell):
    k = kernel(alpha, 8.0)
    gm = restriction_matrix(k, cell)
    s = spectrum(gm)
    assert s.trace == pytest.approx(trace_integral(k, cell), rel=1e-8)
    assert s.trace ** 2 - s.hs_norm_sq == pytest.approx(pair_intensity_integral(k, cell),
                                                        rel=1e-7, abs=1e-14)
    assert np.all((s.eigenvalues >= 0) & (s.eigenvalues <= 1))


def test_rotated_sectors_share_spectra():
    k = kernel(1.5, 8.0)
    a = spectrum(restriction_matrix(k, AnnularSector(5, 1)))
    b = spectrum(restriction_matrix(k, AnnularSector(5, 4)))
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-14)


def test_cell_outside_window_rejected():
    with pytest.raises(WindowError):
        restriction_matrix(kernel(2.0, 3.0), AnnularSector(4, 1))


def test_empty_cell():
    gm = restriction_matrix(kernel(2.0, 3.0), Disk(1.0, 0.0))
    assert isinstance(gm, GalerkinMatrix) and gm.matrix.shape == (0, 0)
    assert lambda_witnesses(kernel(2.0, 3.0), Disk(1.0, 0.0), gm) == (0.0, 0.0)


# --- witnesses ------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0])
def test_witnesses_below_eigenvalues(alpha):
    k = kernel(alpha, 9.0)
    for cell in (AnnularSector(8, 1), AnnularSector(3, 2), AnnularSector(1, 1), Disk(2j, 0.5)):
        rec = analyse_cell(k, cell, keep_eigenvalues=True)
        lam = rec.eigenvalues
        assert 0 < rec.lambda1_lb <= lam[0] + 1e-12
        assert 0 <= rec.lambda2_lb <= lam[1] + 1e-12
        # two Bernoulli variables from the top eigenvalues
        assert rec.lambda1_lb * rec.lambda2_lb <= rec.p_geq2_exact * (1 + 1e-9)
        assert rec.p_geq2_exact <= rec.p_geq2_second_order * (1 + 1e-12)


def test_witness_is_sharp_at_origin_for_gaussian():
    # g1 = K(., 0) is the constant function, the top eigenvector of D(0, R)
    k = kernel(2.0, 3.0)
    l1, l2 = lambda_witnesses(k, Disk(0, 1.0))
    assert l1 == pytest.approx(gammainc(1, 2.0), rel=1e-12)
    assert l2 == pytest.approx(gammainc(2, 2.0), rel=1e-10)


# --- sweeps ---------------------------------------------------------------------------

def test_sweep_reuses_rotations_consistently(tmp_path):
    k = kernel(1.5, 6.0)
    cells = CellPartition.standard(5).cells()
    fast = sweep_cells(k, cells)
    slow = sweep_cells(k, cells, reuse_rotations=False)
    assert [(r.n, r.k) for r in fast] == [c.label for c in cells]
    for a, b in zip(fast, slow):
        assert a.trace == pytest.approx(b.trace, rel=1e-10)
        assert a.p_geq2_exact == pytest.approx(b.p_geq2_exact, rel=1e-8, abs=1e-300)
    p = tmp_path / "cells.csv"
    write_cells_csv(p, fast, header={"alpha": 1.5})
    back = read_cells_csv(p)
    assert [r.row() for r in back] == [r.row() for r in fast]


def test_sweep_threads_match_serial():
    k = kernel(1.5, 6.0)
    cells = CellPartition.standard(4).cells()
    a = sweep_cells(k, cells, workers=1)
    b = sweep_cells(k, cells, workers=3)
    assert [r.row() for r in a] == [r.row() for r in b]


def test_expected_count_scales_like_rho_squared():
    # the one-point density is comparable to rho**-2
    k = kernel(1.5, 40.0, tol=1e-8)
    cells = [AnnularSector(n, 1, 1.0, 2 * n) for n in np.arange(10, 41, 5)]
    recs = [analyse_cell(k, c) for c in cells]
    x = np.log([r.rho_center for r in recs])
    y = np.log([r.trace / c.area for r, c in zip(recs, cells)])
    slope = np.polyfit(x, y, 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.1)
