"""Pathwise simulation of the truncated cascade under two integrators.

EULER_MARUYAMA_ITO discretizes the drift-plus-noise form directly and is
mean-square stable only while dt * k_N^2 <= 0.5 (checked at run start; see
``max_stable_modes``).  ROTATION_SPLITTING composes the exact plane rotations
generated by each noise term (plus the exact last-mode damping factor under
the absorbing truncation), has no step-size restriction, and preserves the
total squared amplitude to roundoff under the conservative truncation, which
is why it is the default scheme.

Paths are independent units of work: path i draws from a generator keyed by
(master_seed, i), so ensemble summaries are schedule-independent and two runs
with the same master seed are bit-identical.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ModelParams, Truncation, spawned_rng, weighted_norm_sq_batch


class NonFiniteStateError(FloatingPointError):
    """A path left the representable range (step too large for this N, lam)."""


class StabilityWarning(UserWarning):
    """Step size violates the documented Euler-Maruyama stability bound."""


class SchemeKind(enum.Enum):
    EULER_MARUYAMA_ITO = "euler_maruyama_ito"
    ROTATION_SPLITTING = "rotation_splitting"


class RotationOrder(enum.Enum):
    STRANG = "strang"
    LIE = "lie"


@dataclass(frozen=True)
class IntegratorScheme:
    kind: SchemeKind
    dt: float
    rotation_order: RotationOrder = RotationOrder.STRANG

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")


@dataclass(frozen=True)
class PathOutput:
    times: np.ndarray
    states: np.ndarray  # (n_times, n_modes)
    seed: int


@dataclass
class EnsembleSummary:
    """Order-insensitive moment accumulation over an ensemble of paths.

    ``mean_sq``/``sem_sq`` estimate E[X_n(t)^2] and its standard error;
    ``l2_paths``/``w_paths`` keep the per-path conserved-quantity and
    weighted-energy time series for paired comparisons.
    """

    times: np.ndarray
    mean: np.ndarray  # (T, N)
    var: np.ndarray
    mean_sq: np.ndarray
    sem_sq: np.ndarray
    excess_kurtosis: np.ndarray
    l2_paths: np.ndarray  # (M, T)
    w_paths: np.ndarray  # (M, T)
    max_rel_l2_drift: float
    n_paths: int
    master_seed: int
    params: ModelParams
    scheme: IntegratorScheme

    @property
    def mean_l2(self) -> np.ndarray:
        return self.l2_paths.mean(axis=0)

    @property
    def sem_l2(self) -> np.ndarray:
        return self.l2_paths.std(axis=0, ddof=1) / math.sqrt(self.n_paths)

    @property
    def mean_w_energy(self) -> np.ndarray:
        return self.w_paths.mean(axis=0)

    @property
    def sem_w_energy(self) -> np.ndarray:
        return self.w_paths.std(axis=0, ddof=1) / math.sqrt(self.n_paths)


def ito_drift(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Drift of the Ito form: component n is -(k_n^2 + k_{n-1}^2) x_n / 2.

    The conservative truncation replaces k_N by 0, leaving -k_{N-1}^2 x_N / 2
    on the last mode.
    """
    x = np.asarray(x, dtype=float)
    n = params.n_modes
    if x.shape[-1] != n:
        raise ValueError(f"state must have {n} modes")
    ksq = params.k_sq
    rate = (ksq[1 : n + 1] + ksq[0:n]).copy()
    if params.truncation is Truncation.CONSERVATIVE:
        rate[-1] = ksq[n - 1]
    return -0.5 * rate * x


def noise_increment(params: ModelParams, x: np.ndarray, dw: np.ndarray) -> np.ndarray:
    """Noise part of one Ito step: k_{n-1} x_{n-1} dW_{n-1} - k_n x_{n+1} dW_n.

    Boundary convention x_0 = x_{N+1} = 0; the caller supplies dW_n with
    variance dt.  The conservative truncation zeroes k_N, which only touches
    the (already vanishing) last-mode second term.
    """
    x = np.asarray(x, dtype=float)
    dw = np.asarray(dw, dtype=float)
    n = params.n_modes
    if x.shape != (n,) or dw.shape != (n,):
        raise ValueError(f"state and dw must have shape ({n},)")
    k = params.wavenumbers
    out = np.zeros(n)
    out[1:] += k[1:n] * x[: n - 1] * dw[: n - 1]
    out[: n - 1] -= k[1:n] * x[1:] * dw[: n - 1]
    return out


def euler_maruyama_update(
    params: ModelParams, x: np.ndarray, dt: float, dw: np.ndarray
) -> np.ndarray:
    """One deterministic Euler-Maruyama step given the noise increments."""
    return x + ito_drift(params, x) * dt + noise_increment(params, x, dw)


def step_euler_maruyama(
    params: ModelParams, x: np.ndarray, dt: float, rng: np.random.Generator
) -> np.ndarray:
    x_new = euler_maruyama_update(
        params, x, dt, rng.standard_normal(params.n_modes) * math.sqrt(dt)
    )
    if not np.all(np.isfinite(x_new)):
        raise NonFiniteStateError(f"non-finite state after step (dt={dt})")
    return x_new


def rotation_splitting_update(
    params: ModelParams,
    x: np.ndarray,
    dt: float,
    dw: np.ndarray,
    order: RotationOrder = RotationOrder.STRANG,
) -> np.ndarray:
    """One splitting step with supplied increments dW_1..dW_{N-1}.

    Plane n turns (x_n, x_{n+1}) by theta_n = k_n dW_n; the absorbing
    truncation adds the exact factor exp(-k_N^2 dt / 2) on the last mode.
    """
    x = np.asarray(x, dtype=float)
    n = params.n_modes
    dw = np.asarray(dw, dtype=float)
    if dw.shape != (n - 1,):
        raise ValueError(f"dw must have shape ({n - 1},): one angle per plane")
    theta = params.wavenumbers[1:n] * dw
    damp = _last_mode_damp(params, dt)
    y = x.copy()
    if order is RotationOrder.STRANG:
        half = 0.5 * theta
        _kernels.rot_scan_strang(
            y, np.cos(half)[None, :], np.sin(half)[None, :], damp
        )
    else:
        _kernels.rot_scan_lie(y, np.cos(theta)[None, :], np.sin(theta)[None, :], damp)
    return y


def step_rotation_splitting(
    params: ModelParams,
    x: np.ndarray,
    dt: float,
    rng: np.random.Generator,
    order: RotationOrder = RotationOrder.STRANG,
) -> np.ndarray:
    dw = rng.standard_normal(params.n_modes - 1) * math.sqrt(dt)
    return rotation_splitting_update(params, x, dt, dw, order)


def max_stable_modes(lam: float, dt: float) -> int:
    """Largest N with dt * k_N^2 <= 0.5: the Euler-Maruyama stability limit."""
    if lam <= 1.0:
        return 10**9 if dt <= 0.5 else 0
    return int(math.floor(math.log(0.5 / dt) / (2.0 * math.log(lam))))


def _last_mode_damp(params: ModelParams, dt: float) -> float:
    if params.truncation is Truncation.CONSERVATIVE:
        return 1.0
    return math.exp(-0.5 * params.k_sq[params.n_modes] * dt)


def _check_stability(params: ModelParams, scheme: IntegratorScheme):
    if scheme.kind is SchemeKind.EULER_MARUYAMA_ITO:
        stiff = scheme.dt * params.k_sq[params.n_modes]
        if stiff > 0.5:
            warnings.warn(
                f"dt * k_N^2 = {stiff:.3g} exceeds the Euler-Maruyama stability "
                f"bound 0.5 (max stable n_modes at this dt: "
                f"{max_stable_modes(params.lam, scheme.dt)})",
                StabilityWarning,
                stacklevel=3,
            )


def _step_grid(times: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Snap output times onto the dt grid; returns (actual_times, steps_per_interval)."""
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must start at 0 and increase strictly")
    steps = np.maximum(1, np.round(np.diff(times) / dt).astype(np.int64))
    actual = np.concatenate(([0.0], np.cumsum(steps) * dt))
    return actual, steps


def _interval_scan(params, scheme, x, z, dt):
    """Advance x in place through one block of standard normals z (n_steps, N-1)."""
    n = params.n_modes
    if scheme.kind is SchemeKind.EULER_MARUYAMA_ITO:
        rate = (params.k_sq[1 : n + 1] + params.k_sq[0:n]).copy()
        if params.truncation is Truncation.CONSERVATIVE:
            rate[-1] = params.k_sq[n - 1]
        damp = 1.0 - 0.5 * dt * rate
        _kernels.em_scan(x, z, damp, params.wavenumbers * math.sqrt(dt))
    else:
        angles = z * (params.wavenumbers[1:n] * math.sqrt(dt))
        damp = _last_mode_damp(params, dt)
        if scheme.rotation_order is RotationOrder.STRANG:
            half = 0.5 * angles
            _kernels.rot_scan_strang(x, np.cos(half), np.sin(half), damp)
        else:
            _kernels.rot_scan_lie(x, np.cos(angles), np.sin(angles), damp)


def _run_path(params, scheme, x0, steps, rng, out, noise_buf=None):
    """Fill out (T, N) with the path states at the step-grid output points."""
    x = np.array(x0, dtype=float)
    out[0] = x
    for j, n_steps in enumerate(steps):
        n_steps = int(n_steps)
        if noise_buf is not None and noise_buf.shape[0] >= n_steps:
            z = rng.standard_normal(out=noise_buf[:n_steps])
        else:
            z = rng.standard_normal((n_steps, params.n_modes - 1))
        _interval_scan(params, scheme, x, z, scheme.dt)
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(
                f"non-finite state in interval {j} (dt={scheme.dt}, "
                f"n_modes={params.n_modes}, lam={params.lam})"
            )
        out[j + 1] = x
    return out


def simulate_path(
    params: ModelParams,
    x0: np.ndarray,
    scheme: IntegratorScheme,
    times: np.ndarray,
    master_seed: int,
    path_index: int = 0,
    seed_namespace: tuple[int, ...] = (),
) -> PathOutput:
    """Single path, seeded exactly as path ``path_index`` of an ensemble."""
    _check_stability(params, scheme)
    actual, steps = _step_grid(times, scheme.dt)
    out = np.empty((len(actual), params.n_modes))
    rng = spawned_rng(master_seed, *seed_namespace, path_index)
    _run_path(params, scheme, x0, steps, rng, out)
    return PathOutput(times=actual, states=out, seed=master_seed)


def _ensemble_partial(
    params: ModelParams,
    scheme: IntegratorScheme,
    x0_block: np.ndarray,
    steps: np.ndarray,
    n_times: int,
    index_lo: int,
    index_hi: int,
    master_seed: int,
    seed_namespace: tuple[int, ...],
):
    """Accumulate moment sums over the global path indices [index_lo, index_hi).

    ``x0_block`` is either the shared initial state (1-D) or this block's
    per-path initial states (2-D, row i - index_lo); seeds always key on the
    global index.
    """
    n = params.n_modes
    count = index_hi - index_lo
    s1 = np.zeros((n_times, n))
    s2 = np.zeros((n_times, n))
    s3 = np.zeros((n_times, n))
    s4 = np.zeros((n_times, n))
    l2_rows = np.empty((count, n_times))
    w_rows = np.empty((count, n_times))
    max_drift = 0.0
    states = np.empty((n_times, n))
    noise_buf = np.empty((int(steps.max()) if len(steps) else 0, n - 1))
    inv_w = 1.0 / params.k_sq[1 : n + 1]
    per_path_init = x0_block.ndim == 2
    for i in range(index_lo, index_hi):
        rng = spawned_rng(master_seed, *seed_namespace, i)
        init = x0_block[i - index_lo] if per_path_init else x0_block
        try:
            _run_path(params, scheme, init, steps, rng, states, noise_buf)
        except NonFiniteStateError as exc:
            raise NonFiniteStateError(f"path {i}: {exc}") from exc
        sq = states * states
        s1 += states
        s2 += sq
        s3 += sq * states
        s4 += sq * sq
        l2 = sq.sum(axis=1)
        l2_rows[i - index_lo] = l2
        w_rows[i - index_lo] = sq @ inv_w
        if l2[0] > 0.0:
            max_drift = max(max_drift, float(np.max(np.abs(l2 - l2[0])) / l2[0]))
    return s1, s2, s3, s4, l2_rows, w_rows, max_drift


def _ensemble_partial_star(job):
    return _ensemble_partial(*job)


def simulate_ensemble(
    params: ModelParams,
    x0: np.ndarray,
    scheme: IntegratorScheme,
    times: np.ndarray,
    n_paths: int,
    master_seed: int,
    seed_namespace: tuple[int, ...] = (),
    n_workers: int = 1,
) -> EnsembleSummary:
    """Ensemble of independently seeded paths with moment accumulation.

    ``x0`` is either one state shared by every path or an (n_paths, N) array
    of per-path initial states.  Per-path seeding keys only on the path
    index, so with ``n_workers > 1`` contiguous index blocks run in separate
    processes; partial sums are reduced in block order, making the summary
    identical for any schedule at a fixed worker count.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    _check_stability(params, scheme)
    actual, steps = _step_grid(times, scheme.dt)
    n_times, n = len(actual), params.n_modes
    x0 = np.asarray(x0, dtype=float)
    per_path_init = x0.ndim == 2
    if per_path_init and x0.shape != (n_paths, n):
        raise ValueError(f"per-path x0 must have shape ({n_paths}, {n})")

    n_workers = max(1, min(n_workers, n_paths))
    bounds = np.linspace(0, n_paths, n_workers + 1).astype(int)
    windows = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    jobs = [
        (params, scheme, x0[lo:hi] if per_path_init else x0, steps, n_times,
         int(lo), int(hi), master_seed, seed_namespace)
        for lo, hi in windows
    ]
    if len(jobs) == 1:
        partials = [_ensemble_partial(*jobs[0])]
    else:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            partials = list(pool.map(_ensemble_partial_star, jobs))

    s1 = sum(p[0] for p in partials)
    s2 = sum(p[1] for p in partials)
    s3 = sum(p[2] for p in partials)
    s4 = sum(p[3] for p in partials)
    l2_paths = np.concatenate([p[4] for p in partials], axis=0)
    w_paths = np.concatenate([p[5] for p in partials], axis=0)
    max_drift = max(p[6] for p in partials)

    m = float(n_paths)
    mean = s1 / m
    mean_sq = s2 / m
    if n_paths > 1:
        var = (s2 - m * mean**2) / (m - 1.0)
        var_of_sq = (s4 - m * mean_sq**2) / (m - 1.0)
        sem_sq = np.sqrt(np.maximum(var_of_sq, 0.0) / m)
    else:
        var = np.zeros_like(mean)
        sem_sq = np.zeros_like(mean)
    m2 = np.maximum(s2 / m - mean**2, 0.0)
    m4 = (s4 - 4.0 * mean * s3 + 6.0 * mean**2 * s2) / m - 3.0 * mean**4
    with np.errstate(divide="ignore", invalid="ignore"):
        kurt = np.where(m2 > 0.0, m4 / m2**2 - 3.0, 0.0)

    return EnsembleSummary(
        times=actual,
        mean=mean,
        var=var,
        mean_sq=mean_sq,
        sem_sq=sem_sq,
        excess_kurtosis=kurt,
        l2_paths=l2_paths,
        w_paths=w_paths,
        max_rel_l2_drift=max_drift,
        n_paths=n_paths,
        master_seed=master_seed,
        params=params,
        scheme=scheme,
    )


@dataclass(frozen=True)
class CoupledDistance:
    """Weighted-norm distance between two ensembles driven by the same noise."""

    times: np.ndarray
    mean_dist_w: np.ndarray
    sem_dist_w: np.ndarray
    initial_dist_w: float
    n_paths: int


def simulate_coupled_pair(
    params: ModelParams,
    eta: np.ndarray,
    rho: np.ndarray,
    scheme: IntegratorScheme,
    times: np.ndarray,
    n_paths: int,
    master_seed: int,
) -> CoupledDistance:
    """Drive two copies from eta and rho through identical noise per path.

    The contraction estimate couples solutions through the same Brownian
    increments, so the distance statistics are paired by construction.
    """
    _check_stability(params, scheme)
    actual, steps = _step_grid(times, scheme.dt)
    n = params.n_modes
    eta = np.asarray(eta, dtype=float)
    rho = np.asarray(rho, dtype=float)
    dist = np.empty((n_paths, len(actual)))
    for i in range(n_paths):
        rng = spawned_rng(master_seed, i)
        xa = eta.copy()
        xb = rho.copy()
        dist[i, 0] = weighted_norm_sq_batch(params, xa - xb)
        for j, n_steps in enumerate(steps):
            z = rng.standard_normal((int(n_steps), n - 1))
            _interval_scan(params, scheme, xa, z, scheme.dt)
            _interval_scan(params, scheme, xb, z, scheme.dt)
            dist[i, j + 1] = weighted_norm_sq_batch(params, xa - xb)
        if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(xb))):
            raise NonFiniteStateError(f"non-finite state in coupled path {i}")
    return CoupledDistance(
        times=actual,
        mean_dist_w=dist.mean(axis=0),
        sem_dist_w=dist.std(axis=0, ddof=1) / math.sqrt(n_paths),
        initial_dist_w=float(weighted_norm_sq_batch(params, eta - rho)),
        n_paths=n_paths,
    )


def flow_matrix(
    params: ModelParams,
    scheme: IntegratorScheme,
    t_final: float,
    master_seed: int,
    path_index: int = 0,
) -> np.ndarray:
    """Assemble the linear time-t map of one noise realization, column by column.

    Every basis vector is pushed through the same increment stream, so the
    result is exactly the matrix the path kernel applies.  Under the
    conservative truncation with rotation splitting it is orthogonal up to
    roundoff.
    """
    n = params.n_modes
    actual, steps = _step_grid(np.array([0.0, t_final]), scheme.dt)
    rng = spawned_rng(master_seed, path_index)
    noise = [rng.standard_normal((int(k), n - 1)) for k in steps]
    cols = np.empty((n, n))
    for j in range(n):
        x = np.zeros(n)
        x[j] = 1.0
        for z in noise:
            _interval_scan(params, scheme, x, z, scheme.dt)
        cols[:, j] = x
    return cols
