import numpy as np
import pytest
import scipy.linalg

from dyadlab.heat import (
    GapMethod,
    MassUnderflowError,
    ScalingLimitError,
    eigenvalue_from_top,
    evolve_heat,
    mass_decay_fit,
    relaxation_rate,
    spectral_gap,
    weighted_laplacian,
)
from dyadlab.model import ModelParams, relaxation_time
from dyadlab.tridiag import Boundary

P2 = ModelParams(lam=2.0, n_modes=8)


def test_laplacian_rows_lam2():
    op = weighted_laplacian(ModelParams(lam=2.0, n_modes=3), 3, Boundary.DIRICHLET_RIGHT)
    assert op.diag[0] == -4.0  # k_0 = 0 leaves only the k_1^2 term
    assert op.sup[0] == 4.0
    assert op.diag[1] == -(4.0 + 16.0)
    assert op.diag[2] == -(16.0 + 64.0)


def test_laplacian_lam1_is_standard():
    op = weighted_laplacian(ModelParams(lam=1.0, n_modes=5), 5, Boundary.DIRICHLET_RIGHT)
    assert np.array_equal(op.sup, np.ones(4))
    assert np.array_equal(op.diag, [-1.0, -2.0, -2.0, -2.0, -2.0])


def test_laplacian_symmetric_exactly():
    for boundary in Boundary:
        op = weighted_laplacian(P2, 8, boundary)
        assert np.array_equal(op.sub, op.sup)


def test_conservative_laplacian_conserves_mass_identity():
    # oracle: direct summation of the image of random site functions
    op = weighted_laplacian(ModelParams(lam=2.0, n_modes=10), 10, Boundary.CONSERVATIVE_RIGHT)
    rng = np.random.default_rng(5)
    for _ in range(10):
        f = rng.standard_normal(10)
        assert abs(op.matvec(f).sum()) <= 1e-9 * np.abs(op.matvec(f)).max()


def test_evolve_zero_stays_zero():
    op = weighted_laplacian(P2, 8, Boundary.DIRICHLET_RIGHT)
    traj = evolve_heat(op, np.zeros(8), np.array([0.0, 1.0]))
    assert np.all(traj.profiles == 0.0)


def test_evolve_matches_dense_expm():
    op = weighted_laplacian(P2, 8, Boundary.DIRICHLET_RIGHT)
    h0 = np.zeros(8)
    h0[0] = 1.0
    times = np.array([0.0, 0.1, 0.5])
    traj = evolve_heat(op, h0, times, tolerance=1e-10)
    dense = op.to_dense()
    for j, t in enumerate(times):
        np.testing.assert_allclose(
            traj.profiles[j], scipy.linalg.expm(t * dense) @ h0, atol=1e-8
        )


def test_mass_strictly_decreasing_dirichlet():
    params = ModelParams(lam=2.0, n_modes=60)
    op = weighted_laplacian(params, 60, Boundary.DIRICHLET_RIGHT)
    h0 = np.zeros(60)
    h0[0] = 1.0
    traj = evolve_heat(op, h0, np.linspace(0.0, 2.0, 9))
    mass = traj.mass
    assert np.all(np.diff(mass) < 0.0)


def test_maximum_principle():
    op = weighted_laplacian(P2, 8, Boundary.CONSERVATIVE_RIGHT)
    rng = np.random.default_rng(11)
    for _ in range(5):
        h0 = rng.random(8)
        traj = evolve_heat(op, h0, np.linspace(0.0, 0.5, 6))
        peaks = traj.profiles.max(axis=1)
        assert np.all(np.diff(peaks) <= 1e-12)


def test_comparison_principle():
    op = weighted_laplacian(ModelParams(lam=2.0, n_modes=12), 12, Boundary.DIRICHLET_RIGHT)
    rng = np.random.default_rng(12)
    for _ in range(5):
        h0 = rng.random(12)
        g0 = h0 + rng.random(12)
        th = evolve_heat(op, h0, np.linspace(0.0, 0.3, 4))
        tg = evolve_heat(op, g0, np.linspace(0.0, 0.3, 4))
        assert np.all(th.profiles <= tg.profiles + 1e-10)


def test_gap_two_site_closed_form():
    # oracle: characteristic polynomial of [[-1, 1], [1, -2]] by hand
    op = weighted_laplacian(ModelParams(lam=1.0, n_modes=2), 2, Boundary.DIRICHLET_RIGHT)
    result = spectral_gap(op)
    assert result.method is GapMethod.STURM_BISECTION
    assert result.gap == pytest.approx((3.0 - np.sqrt(5.0)) / 2.0, rel=1e-10)


def test_gap_matches_lapack_at_moderate_size():
    for lam, n in ((2.0, 16), (1.0, 30), (1.5, 20)):
        op = weighted_laplacian(ModelParams(lam=lam, n_modes=n), n, Boundary.DIRICHLET_RIGHT)
        w = scipy.linalg.eigh_tridiagonal(op.diag, op.sup, eigvals_only=True)
        assert spectral_gap(op).gap == pytest.approx(-w[-1], rel=1e-9)
        assert eigenvalue_from_top(op, 1) == pytest.approx(w[-2], rel=1e-9)


def test_gap_stabilizes_lam2_and_vanishes_lam1():
    gaps2 = [
        spectral_gap(weighted_laplacian(ModelParams(lam=2.0, n_modes=n), n)).gap
        for n in (20, 40, 60)
    ]
    assert abs(gaps2[2] - gaps2[1]) <= 1e-8
    gaps1 = [
        spectral_gap(weighted_laplacian(ModelParams(lam=1.0, n_modes=n), n)).gap
        for n in (25, 50, 100)
    ]
    assert gaps1[0] > gaps1[1] > gaps1[2]


def test_gap_requires_dirichlet():
    op = weighted_laplacian(P2, 8, Boundary.CONSERVATIVE_RIGHT)
    with pytest.raises(ValueError):
        spectral_gap(op)


def test_gap_scaling_limit_signalled():
    op = weighted_laplacian(ModelParams(lam=2.0, n_modes=8), 500, Boundary.DIRICHLET_RIGHT)
    with pytest.raises(ScalingLimitError):
        spectral_gap(op)


def test_relaxation_rate_conservative():
    op = weighted_laplacian(P2, 8, Boundary.CONSERVATIVE_RIGHT)
    w = scipy.linalg.eigh_tridiagonal(op.diag, op.sup, eigvals_only=True)
    assert relaxation_rate(op) == pytest.approx(-w[-2], rel=1e-9)
    with pytest.raises(ValueError):
        relaxation_rate(weighted_laplacian(P2, 8, Boundary.DIRICHLET_RIGHT))


def test_decay_fit_pure_mode():
    # initial data = top eigenvector: the fitted rate is the gap, exactly
    n = 12
    op = weighted_laplacian(ModelParams(lam=1.5, n_modes=n), n, Boundary.DIRICHLET_RIGHT)
    w, v = scipy.linalg.eigh_tridiagonal(op.diag, op.sup)
    h0 = np.abs(v[:, -1])
    fit = mass_decay_fit(op, h0, window=(0.5, 3.0), tolerance=1e-12)
    assert fit.rate == pytest.approx(-w[-1], rel=1e-6)
    assert fit.r_squared > 1.0 - 1e-10


def test_decay_fit_matches_gap_lam2():
    params = ModelParams(lam=2.0, n_modes=60)
    tau = relaxation_time(params)
    op = weighted_laplacian(params, 60, Boundary.DIRICHLET_RIGHT)
    h0 = np.zeros(60)
    h0[0] = 1.0
    fit = mass_decay_fit(op, h0, window=(2 * tau, 8 * tau))
    gap = spectral_gap(op).gap
    assert abs(fit.rate - gap) / gap <= 0.02
    assert fit.rate >= 0.95 / tau


def test_decay_fit_underflow_signalled():
    op = weighted_laplacian(P2, 8, Boundary.DIRICHLET_RIGHT)
    h0 = np.ones(8)
    with pytest.raises(MassUnderflowError):
        mass_decay_fit(op, h0, window=(240.0, 260.0), n_samples=5)
