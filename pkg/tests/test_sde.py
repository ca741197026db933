import math

import numpy as np
import pytest

from dyadlab.model import ModelParams, Truncation, l2_norm_sq
from dyadlab.moments import integrate_moments
from dyadlab.sde import (
    IntegratorScheme,
    NonFiniteStateError,
    RotationOrder,
    SchemeKind,
    StabilityWarning,
    euler_maruyama_update,
    flow_matrix,
    ito_drift,
    max_stable_modes,
    noise_increment,
    rotation_splitting_update,
    simulate_coupled_pair,
    simulate_ensemble,
    simulate_path,
    step_euler_maruyama,
)

PA = ModelParams(lam=2.0, n_modes=4, truncation=Truncation.ABSORBING)
ROT = IntegratorScheme(SchemeKind.ROTATION_SPLITTING, dt=1e-3)


def test_ito_drift_examples():
    p = ModelParams(lam=2.0, n_modes=4)
    d = ito_drift(p, np.array([1.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(d, [-2.0, 0.0, 0.0, 0.0])
    assert np.all(ito_drift(p, np.zeros(4)) == 0.0)
    pc = ModelParams(lam=2.0, n_modes=2, truncation=Truncation.CONSERVATIVE)
    np.testing.assert_allclose(ito_drift(pc, np.array([0.0, 1.0])), [0.0, -2.0])


def test_noise_increment_examples():
    p = ModelParams(lam=2.0, n_modes=4)
    out = noise_increment(p, np.eye(4)[0], np.eye(4)[0])
    assert out[1] == 2.0  # k_1 x_1 dW_1 feeds mode 2
    assert out[0] == 0.0
    assert np.all(noise_increment(p, np.zeros(4), np.ones(4)) == 0.0)
    pc = ModelParams(lam=2.0, n_modes=2, truncation=Truncation.CONSERVATIVE)
    out = noise_increment(pc, np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(out, [-2.0, 0.0])


def test_euler_step_examples():
    p = ModelParams(lam=2.0, n_modes=4)
    rng = np.random.default_rng(0)
    assert np.all(step_euler_maruyama(p, np.zeros(4), 1e-3, rng) == 0.0)
    out = euler_maruyama_update(p, np.eye(4)[0], 1e-3, np.zeros(4))
    assert out[0] == pytest.approx(1.0 - 2.0 * 1e-3)


def test_euler_overflow_signalled():
    p = ModelParams(lam=2.0, n_modes=8)
    scheme = IntegratorScheme(SchemeKind.EULER_MARUYAMA_ITO, dt=1.0)
    with pytest.warns(StabilityWarning):
        with pytest.raises(NonFiniteStateError):
            simulate_path(p, np.eye(8)[0], scheme, np.array([0.0, 400.0]), 1)


def test_quarter_rotation():
    pc = ModelParams(lam=2.0, n_modes=2, truncation=Truncation.CONSERVATIVE)
    dw = np.array([math.pi / 4])  # theta = k_1 dW = pi/2
    for order in RotationOrder:
        out = rotation_splitting_update(pc, np.array([1.0, 0.0]), 1e-3, dw, order)
        np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-15)


def test_zero_noise_identity_and_damping():
    pc = ModelParams(lam=2.0, n_modes=4, truncation=Truncation.CONSERVATIVE)
    x = np.array([0.3, -0.2, 0.5, 0.1])
    out = rotation_splitting_update(pc, x, 1e-2, np.zeros(3))
    np.testing.assert_allclose(out, x)
    pa = ModelParams(lam=2.0, n_modes=4, truncation=Truncation.ABSORBING)
    out = rotation_splitting_update(pa, x, 1e-2, np.zeros(3))
    np.testing.assert_allclose(out[:3], x[:3])
    assert out[3] == pytest.approx(x[3] * math.exp(-0.5 * 256.0 * 1e-2))


def test_conservation_and_flow_orthogonality():
    # oracle: the assembled one-realization flow map must be orthogonal
    pc = ModelParams(lam=2.0, n_modes=16, truncation=Truncation.CONSERVATIVE)
    for seed in range(3):
        po = simulate_path(pc, np.eye(16)[0], ROT, np.linspace(0.0, 1.0, 5), seed)
        s = (po.states**2).sum(axis=1)
        assert np.abs(s - s[0]).max() <= 1e-10 * s[0]
    mat = flow_matrix(pc, ROT, 1.0, master_seed=0)
    np.testing.assert_allclose(mat.T @ mat, np.eye(16), atol=1e-10)


def test_ensemble_determinism_and_single_path():
    pc = ModelParams(lam=2.0, n_modes=4, truncation=Truncation.CONSERVATIVE)
    times = np.linspace(0.0, 0.1, 3)
    a = simulate_ensemble(pc, np.eye(4)[0], ROT, times, 5, master_seed=9)
    b = simulate_ensemble(pc, np.eye(4)[0], ROT, times, 5, master_seed=9)
    assert np.array_equal(a.mean_sq, b.mean_sq)
    assert np.array_equal(a.l2_paths, b.l2_paths)
    single = simulate_ensemble(pc, np.eye(4)[0], ROT, times, 1, master_seed=9)
    path = simulate_path(pc, np.eye(4)[0], ROT, times, master_seed=9, path_index=0)
    np.testing.assert_allclose(single.mean_sq, path.states**2)
    np.testing.assert_allclose(single.l2_paths[0], (path.states**2).sum(axis=1))


def test_per_path_initial_states():
    pc = ModelParams(lam=2.0, n_modes=4, truncation=Truncation.CONSERVATIVE)
    rng = np.random.default_rng(4)
    x0 = rng.standard_normal((6, 4))
    summary = simulate_ensemble(pc, x0, ROT, np.array([0.0, 0.05]), 6, master_seed=1)
    np.testing.assert_allclose(summary.l2_paths[:, 0], (x0**2).sum(axis=1))


def test_euler_moments_match_ode():
    # distributional oracle: the closed moment system
    scheme = IntegratorScheme(SchemeKind.EULER_MARUYAMA_ITO, dt=1e-3)
    times = np.array([0.0, 0.3])
    m = 2000
    summary = simulate_ensemble(PA, np.eye(4)[0], scheme, times, m, master_seed=11)
    traj = integrate_moments(PA, np.eye(4)[0], summary.times, tolerance=1e-10)
    z = (summary.mean_sq[-1] - traj.q[-1]) / summary.sem_sq[-1]
    assert np.abs(z).max() < 4.0


def test_weak_consistency_em_vs_rotation():
    # the schemes must agree with the deterministic moment oracle (and so
    # with each other) as dt shrinks: Richardson-style comparison at two
    # step sizes.  Fixed-dt statistical tests on the stiffest mode are
    # hopeless here: its discretization bias is resolvable at this ensemble
    # size for both schemes.
    times = np.array([0.0, 0.3])
    q_ode = integrate_moments(PA, np.eye(4)[0], times, tolerance=1e-10).q[-1]
    m = 20000
    mean_sq = {}
    for kind in (SchemeKind.EULER_MARUYAMA_ITO, SchemeKind.ROTATION_SPLITTING):
        for dt in (1e-2, 1e-3):
            scheme = IntegratorScheme(kind, dt=dt)
            if kind is SchemeKind.EULER_MARUYAMA_ITO and dt * PA.k_sq[4] > 0.5:
                with pytest.warns(StabilityWarning):
                    s = simulate_ensemble(PA, np.eye(4)[0], scheme, times, m, 21)
            else:
                s = simulate_ensemble(PA, np.eye(4)[0], scheme, times, m, 21)
            mean_sq[kind, dt] = s.mean_sq[-1]
    for kind in (SchemeKind.EULER_MARUYAMA_ITO, SchemeKind.ROTATION_SPLITTING):
        coarse = np.abs(mean_sq[kind, 1e-2] / q_ode - 1.0)
        fine = np.abs(mean_sq[kind, 1e-3] / q_ode - 1.0)
        assert coarse.max() > 2.0 * fine.max()
        assert fine.max() < 0.25
    gap = np.abs(
        mean_sq[SchemeKind.EULER_MARUYAMA_ITO, 1e-3]
        - mean_sq[SchemeKind.ROTATION_SPLITTING, 1e-3]
    )
    assert np.all(gap / q_ode < 0.25)


def test_lie_order_also_conserves():
    pc = ModelParams(lam=2.0, n_modes=8, truncation=Truncation.CONSERVATIVE)
    scheme = IntegratorScheme(SchemeKind.ROTATION_SPLITTING, dt=1e-3,
                              rotation_order=RotationOrder.LIE)
    po = simulate_path(pc, np.eye(8)[0], scheme, np.array([0.0, 0.5]), 3)
    assert abs(l2_norm_sq(po.states[-1]) - 1.0) <= 1e-10


def test_coupled_contraction():
    pc = ModelParams(lam=2.0, n_modes=6, truncation=Truncation.CONSERVATIVE)
    res = simulate_coupled_pair(
        pc, np.eye(6)[0], 0.5 * np.eye(6)[0], ROT,
        np.array([0.0, 0.2, 0.6]), 300, master_seed=2,
    )
    assert res.initial_dist_w == pytest.approx(0.0625)
    for j in range(1, len(res.times)):
        assert res.mean_dist_w[j] <= res.initial_dist_w + 4.0 * res.sem_dist_w[j]


def test_max_stable_modes():
    assert max_stable_modes(2.0, 1e-4) == 6
    assert 1e-4 * 4.0**6 <= 0.5 < 1e-4 * 4.0**7


def test_stability_warning_on_violation():
    p = ModelParams(lam=2.0, n_modes=8)
    scheme = IntegratorScheme(SchemeKind.EULER_MARUYAMA_ITO, dt=1e-3)
    with pytest.warns(StabilityWarning):
        simulate_ensemble(p, np.zeros(8), scheme, np.array([0.0, 0.002]), 2, 0)


def test_times_grid_validation():
    with pytest.raises(ValueError):
        simulate_path(PA, np.zeros(4), ROT, np.array([0.5, 1.0]), 0)
    with pytest.raises(ValueError):
        IntegratorScheme(SchemeKind.ROTATION_SPLITTING, dt=0.0)