"""Two independent measurements of the exponential equilibration rate.

Route 1 (deterministic): for quadratic observables the semigroup action
closes on the coefficient vector, P_t(x_l^2) = sum_i h_i(t) x_i^2 with
h' = L h under the conservative weighted Laplacian, so the equilibrium
variance of P_t f is exactly 2 r^2 sum_i h_i(t)^2.

Route 2 (nested Monte Carlo): outer samples from the invariant Gaussian,
two conditionally independent inner paths per sample; the product
f(X^{x,U}_t) f(X^{x,V}_t) averages to (P_t f)(x)^2 without inner-noise bias.

At finite N the conserved total amplitude leaves an equilibrium variance
floor of 2 r^2 / N that the infinite system does not have; rate fits
subtract it (the floor is recorded on every measurement).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .heat import evolve_heat, weighted_laplacian
from .model import (
    ModelParams,
    Observable,
    ObservableKind,
    Truncation,
    relaxation_time,
    spawned_rng,
)
from .sde import IntegratorScheme, SchemeKind, _run_path, _step_grid
from .tridiag import Boundary

_BOOTSTRAP_NS = 10**6
_DEFAULT_BOOTSTRAP = 2000


class NonpositiveVarianceError(ValueError):
    """A rate-fit window contains nonpositive excess-variance points."""


class DecayMethod(enum.Enum):
    NESTED_MC = "nested_mc"
    HEAT_COEFFICIENTS = "heat_coefficients"


@dataclass(frozen=True)
class FitResult:
    rate: float
    intercept: float
    r_squared: float
    window: tuple[float, float]


@dataclass(frozen=True)
class DecayMeasurement:
    """Variance of P_t f over time, by either route.

    ``floor`` is the finite-N equilibrium variance; ``sem``/``ci_*`` are None
    for the deterministic route.  ``inconclusive`` lists indices whose CI is
    wider than the estimate itself.
    """

    observable: Observable
    times: np.ndarray
    variance: np.ndarray
    method: DecayMethod
    floor: float
    sem: np.ndarray | None = None
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None
    inconclusive: tuple[int, ...] = ()
    n_outer: int = 0
    n_inner: int = 0
    seed: int = 0
    fit: FitResult | None = None

    def with_fit(self, fit: FitResult) -> "DecayMeasurement":
        return replace(self, fit=fit)


@dataclass(frozen=True)
class RateVerdict:
    rate: float
    time_constant: float
    ratio: float  # rate times the equilibration time constant
    consistent: bool
    tolerance: float


def heat_coefficient_variance(
    params: ModelParams,
    l: int,
    times: np.ndarray,
    tolerance: float = 1e-10,
) -> DecayMeasurement:
    """Deterministic variance curve of P_t(x_l^2 - r) via the coefficient flow.

    Exact at finite N for the conservative truncation (which it requires):
    Var = 2 r^2 sum_i h_i(t)^2 with h(0) the unit mass at site l, decaying to
    the uniform-profile floor 2 r^2 / N.
    """
    if params.truncation is not Truncation.CONSERVATIVE:
        raise ValueError("heat-coefficient route requires the conservative truncation")
    if not 1 <= l <= params.n_modes:
        raise ValueError(f"mode index {l} out of range")
    n = params.n_modes
    op = weighted_laplacian(params, boundary=Boundary.CONSERVATIVE_RIGHT)
    # evolve the mean-zero part of the unit mass at site l: the uniform
    # component is stationary, and keeping it out of the integration avoids
    # subtractive cancellation in the late-time excess over the floor
    g0 = np.full(n, -1.0 / n)
    g0[l - 1] += 1.0
    traj = evolve_heat(op, g0, times, tolerance=tolerance)
    floor = 2.0 * params.r**2 / n
    excess = 2.0 * params.r**2 * np.sum(traj.profiles**2, axis=1)
    return DecayMeasurement(
        observable=Observable.centered_square(l),
        times=np.asarray(times, dtype=float),
        variance=excess + floor,
        method=DecayMethod.HEAT_COEFFICIENTS,
        floor=floor,
    )


def _default_scheme() -> IntegratorScheme:
    return IntegratorScheme(SchemeKind.ROTATION_SPLITTING, dt=5e-3)


def nested_mc_variance(
    params: ModelParams,
    f: Observable,
    times: np.ndarray,
    outer_m: int,
    inner_m: int = 2,
    seed: int = 0,
    scheme: IntegratorScheme | None = None,
    n_bootstrap: int = _DEFAULT_BOOTSTRAP,
) -> DecayMeasurement:
    """Two-copy nested Monte Carlo estimate of Var(P_t f) under the invariant law.

    Per outer sample x, ``inner_m`` conditionally independent paths record f
    along the trajectory; the mean over distinct pairs of copies estimates
    (P_t f)(x)^2 unbiasedly, so all the budget goes to outer samples
    (inner_m stays at 2 unless you are studying the estimator itself).
    Both catalog observables have exact equilibrium mean zero, which the
    estimator uses directly.  CI by outer-sample percentile bootstrap (95%).
    """
    if outer_m < 10:
        raise ValueError("need outer_m >= 10")
    if inner_m < 2:
        raise ValueError("need inner_m >= 2 for the cross-copy estimator")
    if params.truncation is not Truncation.CONSERVATIVE:
        raise ValueError("equilibration runs use the conservative truncation")
    if scheme is None:
        scheme = _default_scheme()
    if f.index > params.n_modes:
        raise ValueError("observable index out of range")

    actual, steps = _step_grid(np.asarray(times, dtype=float), scheme.dt)
    n_times = len(actual)
    n = params.n_modes
    r = params.r
    sqrt_r = math.sqrt(r)

    pair_means = np.empty((outer_m, n_times))
    f_vals = np.empty((inner_m, n_times))
    out = np.empty((n_times, n))
    for i in range(outer_m):
        x0 = spawned_rng(seed, i, 0).standard_normal(n) * sqrt_r
        for c in range(inner_m):
            rng = spawned_rng(seed, i, 1 + c)
            _run_path(params, scheme, x0, steps, rng, out)
            f_vals[c] = f.evaluate(out, r)
        s1 = f_vals.sum(axis=0)
        s2 = (f_vals**2).sum(axis=0)
        pair_means[i] = (s1 * s1 - s2) / (inner_m * (inner_m - 1))

    variance = pair_means.mean(axis=0)
    sem = pair_means.std(axis=0, ddof=1) / math.sqrt(outer_m)
    boot_rng = spawned_rng(seed, _BOOTSTRAP_NS)
    idx = boot_rng.integers(0, outer_m, size=(n_bootstrap, outer_m))
    boot = pair_means[idx].mean(axis=1)
    ci_low = np.percentile(boot, 2.5, axis=0)
    ci_high = np.percentile(boot, 97.5, axis=0)
    inconclusive = tuple(
        int(j) for j in range(n_times) if (ci_high[j] - ci_low[j]) > abs(variance[j])
    )
    return DecayMeasurement(
        observable=f,
        times=actual,
        variance=variance,
        method=DecayMethod.NESTED_MC,
        floor=(2.0 * r**2 / n if f.kind is ObservableKind.CENTERED_SQUARE else 0.0),
        sem=sem,
        ci_low=ci_low,
        ci_high=ci_high,
        inconclusive=inconclusive,
        n_outer=outer_m,
        n_inner=inner_m,
        seed=seed,
    )


def fit_rate(
    measurement: DecayMeasurement,
    window: tuple[float, float],
    subtract_floor: bool = True,
) -> FitResult:
    """Weighted least squares on the log excess variance over a time window.

    NestedMC points are weighted by their delta-method log-standard errors;
    the deterministic route gets unit weights.  Raises on nonpositive excess
    variance inside the window (widen or shift the window instead of feeding
    the log garbage).
    """
    t_lo, t_hi = window
    mask = (measurement.times >= t_lo) & (measurement.times <= t_hi)
    if int(mask.sum()) < 4:
        raise ValueError("need at least 4 points in the fit window")
    t = measurement.times[mask]
    floor = measurement.floor if subtract_floor else 0.0
    excess = measurement.variance[mask] - floor
    if np.any(excess <= 0.0):
        raise NonpositiveVarianceError(
            f"nonpositive excess variance inside window {window}"
        )
    y = np.log(excess)
    if measurement.sem is not None:
        sigma_log = measurement.sem[mask] / excess
        weights = 1.0 / np.maximum(sigma_log, 1e-12) ** 2
    else:
        weights = np.ones_like(y)
    design = np.vstack([t, np.ones_like(t)]).T
    w_sqrt = np.sqrt(weights)
    coef, *_ = np.linalg.lstsq(design * w_sqrt[:, None], y * w_sqrt, rcond=None)
    slope, intercept = coef
    resid = y - design @ coef
    ss_res = float(np.sum(weights * resid**2))
    ybar = float(np.sum(weights * y) / np.sum(weights))
    ss_tot = float(np.sum(weights * (y - ybar) ** 2))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res < 1e-20 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return FitResult(
        rate=-float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        window=(float(t_lo), float(t_hi)),
    )


def rate_consistency(
    params: ModelParams, rate: float, tolerance: float = 0.05
) -> RateVerdict:
    """Check a measured decay rate against the equilibration lower bound.

    The theoretical statement is an upper bound on the variance, hence a
    lower bound on the decay rate: consistent iff rate >= (1 - tolerance)
    divided by the time constant.  Faster decay never contradicts it; slower
    decay is flagged for human review since the prefactor constant is
    unknown.
    """
    tau = relaxation_time(params)
    return RateVerdict(
        rate=float(rate),
        time_constant=tau,
        ratio=float(rate) * tau,
        consistent=bool(rate >= (1.0 - tolerance) / tau),
        tolerance=tolerance,
    )
