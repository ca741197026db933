import math
from dataclasses import replace

import numpy as np
import pytest

from dyadlab.ergodicity import (
    DecayMeasurement,
    DecayMethod,
    NonpositiveVarianceError,
    fit_rate,
    heat_coefficient_variance,
    nested_mc_variance,
    rate_consistency,
)
from dyadlab.heat import evolve_heat, relaxation_rate, weighted_laplacian
from dyadlab.model import ModelParams, Observable, Truncation, relaxation_time
from dyadlab.tridiag import Boundary

PC24 = ModelParams(lam=2.0, n_modes=24, r=1.0, truncation=Truncation.CONSERVATIVE)
PC8 = ModelParams(lam=2.0, n_modes=8, r=1.0, truncation=Truncation.CONSERVATIVE)


def test_heat_route_endpoints():
    m = heat_coefficient_variance(PC8, 1, np.array([0.0, 5.0]))
    assert m.variance[0] == pytest.approx(2.0)  # Var(x^2) = 2 r^2 at time zero
    assert m.variance[-1] == pytest.approx(2.0 / 8.0, rel=1e-6)  # uniform floor
    assert m.floor == pytest.approx(2.0 / 8.0)
    m05 = heat_coefficient_variance(
        ModelParams(lam=2.0, n_modes=8, r=0.5, truncation=Truncation.CONSERVATIVE),
        1,
        np.array([0.0]),
    )
    assert m05.variance[0] == pytest.approx(2.0 * 0.25)


def test_heat_route_requires_conservative():
    with pytest.raises(ValueError):
        heat_coefficient_variance(ModelParams(lam=2.0, n_modes=8), 1, np.array([0.0]))


def test_heat_route_slope_matches_spectral_oracle():
    # oracle: twice the relaxation rate of the mass-conserving operator
    tau = relaxation_time(PC24)
    times = np.linspace(0.0, 6.0 * tau, 25)
    m = heat_coefficient_variance(PC24, 1, times)
    fit = fit_rate(m, window=(2.0 * tau, 6.0 * tau))
    gamma = relaxation_rate(weighted_laplacian(PC24, boundary=Boundary.CONSERVATIVE_RIGHT))
    assert abs(fit.rate - 2.0 * gamma) <= 0.05 * 2.0 * gamma
    assert fit.r_squared > 0.999


def test_heat_route_rate_invariant_under_rescaling():
    times = np.linspace(0.0, 2.0, 9)
    m = heat_coefficient_variance(PC8, 1, times)
    fit = fit_rate(m, window=(0.5, 2.0))
    scaled = replace(m, variance=7.0 * m.variance, floor=7.0 * m.floor)
    fit_scaled = fit_rate(scaled, window=(0.5, 2.0))
    assert fit_scaled.rate == pytest.approx(fit.rate, rel=1e-12)


def test_sum_of_squares_monotone_decay():
    op = weighted_laplacian(
        ModelParams(lam=2.0, n_modes=12, truncation=Truncation.CONSERVATIVE),
        boundary=Boundary.CONSERVATIVE_RIGHT,
    )
    rng = np.random.default_rng(3)
    for _ in range(5):
        h0 = rng.random(12)
        traj = evolve_heat(op, h0, np.linspace(0.0, 1.0, 8))
        ssq = np.sum(traj.profiles**2, axis=1)
        assert np.all(np.diff(ssq) <= 1e-12)


def test_nested_mc_time_zero():
    times = np.array([0.0, 0.25])
    m = nested_mc_variance(PC8, Observable.centered_square(1), times, 1500, seed=5)
    # Var(x^2 - r) = 2 r^2 at time zero
    assert m.ci_low[0] <= 2.0 <= m.ci_high[0]
    mc = nested_mc_variance(PC8, Observable.coordinate(1), times, 1500, seed=6)
    # coordinate functions: Var = r, matching the equilibrium gradient energy
    assert mc.ci_low[0] <= 1.0 <= mc.ci_high[0]
    assert mc.floor == 0.0


def test_two_route_agreement_small():
    times = np.array([0.0, 0.2, 0.4, 0.6, 0.9, 1.2])
    heat_m = heat_coefficient_variance(PC8, 1, times)
    mc = nested_mc_variance(PC8, Observable.centered_square(1), times, 600, seed=7)
    z = (mc.variance - heat_m.variance) / mc.sem
    assert np.abs(z).max() < 4.0


def test_fit_rate_synthetic_exact():
    times = np.linspace(0.0, 3.0, 13)
    m = DecayMeasurement(
        observable=Observable.centered_square(1),
        times=times,
        variance=3.0 * np.exp(-2.0 * times),
        method=DecayMethod.HEAT_COEFFICIENTS,
        floor=0.0,
    )
    fit = fit_rate(m, window=(0.0, 3.0))
    assert fit.rate == pytest.approx(2.0, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-10)


def test_fit_rate_dominant_mode():
    times = np.linspace(0.0, 6.0, 61)
    m = DecayMeasurement(
        observable=Observable.centered_square(1),
        times=times,
        variance=np.exp(-times) + np.exp(-10.0 * times),
        method=DecayMethod.HEAT_COEFFICIENTS,
        floor=0.0,
    )
    fit = fit_rate(m, window=(2.0, 6.0))
    assert abs(fit.rate - 1.0) < 0.01


def test_fit_rate_constant_input():
    times = np.linspace(0.0, 1.0, 6)
    m = DecayMeasurement(
        observable=Observable.centered_square(1),
        times=times,
        variance=np.full(6, 0.5),
        method=DecayMethod.HEAT_COEFFICIENTS,
        floor=0.0,
    )
    fit = fit_rate(m, window=(0.0, 1.0))
    assert fit.rate == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_rejects_nonpositive_excess():
    times = np.linspace(0.0, 1.0, 6)
    m = DecayMeasurement(
        observable=Observable.centered_square(1),
        times=times,
        variance=np.array([1.0, 0.5, 0.2, 0.1, 0.05, 0.02]),
        method=DecayMethod.HEAT_COEFFICIENTS,
        floor=0.1,
    )
    with pytest.raises(NonpositiveVarianceError):
        fit_rate(m, window=(0.0, 1.0))
    with pytest.raises(ValueError):
        fit_rate(m, window=(0.0, 0.2))  # fewer than 4 points


def test_rate_consistency_verdicts():
    params = ModelParams(lam=2.0, n_modes=8)
    tau = relaxation_time(params)
    exact = rate_consistency(params, 1.0 / tau)
    assert exact.ratio == pytest.approx(1.0) and exact.consistent
    fast = rate_consistency(params, 10.0 / tau)
    assert fast.ratio == pytest.approx(10.0) and fast.consistent
    slow = rate_consistency(params, 0.5 / tau)
    assert not slow.consistent


def test_nested_mc_validation():
    with pytest.raises(ValueError):
        nested_mc_variance(PC8, Observable.coordinate(1), [0.0], 5, seed=0)
    with pytest.raises(ValueError):
        nested_mc_variance(PC8, Observable.coordinate(1), [0.0], 100, inner_m=1, seed=0)
    with pytest.raises(ValueError):
        nested_mc_variance(
            ModelParams(lam=2.0, n_modes=8), Observable.coordinate(1), [0.0], 100, seed=0
        )
