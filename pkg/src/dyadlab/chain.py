"""The dual birth-death chain: simulation, mass loss, and boundary criteria.

The chain read off the dual q-matrix moves down five times faster than up
(jump probability 1/(1 + lam^2) upward) and is killed at state 1 with rate
lam^2 - 1, so for lam > 1 its observed mass loss is killing-dominated: the
classical reachable-boundary (explosion) series diverges, while the
entrance-boundary series governing uniqueness of the forward equations
converges.  Both series are computed in log space; the headline ``converged``
verdict keys on the entrance series, which is finite exactly when the rate
series sum n/k_n^2 is.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ModelParams, spawned_rng
from .tridiag import TridiagonalOperator, integrate_linear

_WILSON_Z99 = 2.5758293035489004
_MAX_JUMPS = 10**7


class Outcome(enum.Enum):
    ALIVE = "alive"
    KILLED = "killed"
    EXPLODED = "exploded"


@dataclass(frozen=True)
class BDChainSpec:
    """Birth/death rate functions on states 1, 2, ... plus killing at state 1.

    ``death(n)`` is only consulted for n >= 2; rates must be finite and
    nonnegative wherever the simulation can reach.  ``log_birth``/``log_death``
    are optional exact log-rate functions for the boundary series, whose
    products span magnitudes far outside float64 (rates themselves overflow
    past lam**(2n) ~ 1e308).
    """

    birth: Callable[[int], float]
    death: Callable[[int], float]
    kill_at_1: float = 0.0
    log_birth: Callable[[int], float] | None = None
    log_death: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kill_at_1 < 0.0:
            raise ValueError("killing rate must be nonnegative")


@dataclass(frozen=True)
class ChainPath:
    jump_times: np.ndarray  # starts at 0.0 with the initial state
    states: np.ndarray
    outcome: Outcome
    outcome_time: float  # t_max if ALIVE, kill time, or explosion upper bound

    def state_at(self, t: float) -> int:
        idx = int(np.searchsorted(self.jump_times, t, side="right")) - 1
        return int(self.states[idx])


@dataclass(frozen=True)
class DishonestyEstimate:
    estimate: float  # fraction of paths not alive at t
    ci_low: float
    ci_high: float
    killed_fraction: float
    exploded_fraction: float
    alive_fraction: float
    n_paths: int
    seed: int


@dataclass(frozen=True)
class BoundaryCriterionResult:
    """Partial sums and verdicts of the two classical boundary series.

    ``value``/``converged`` refer to the entrance (forward-uniqueness)
    series sum_n pi_n * sum_{i<=n} 1/(b_i pi_i); ``reuter_value`` is the
    reachable-boundary explosion series with the roles of the two factors
    swapped.  Killing never enters either series; ``killing_excluded``
    records that a positive killing rate was present and ignored (it only
    adds mass loss, so dishonesty conclusions stay conservative).
    """

    value: float
    converged: bool
    reuter_value: float
    reuter_converged: bool
    n_terms: int
    killing_excluded: bool


def dyadic_chain(params: ModelParams) -> BDChainSpec:
    """Closed-form rates of the dual chain, valid for every state.

    b_1 = 1, b_n = lam**(2n-2), a_n = lam**(2n), killing lam^2 - 1 at
    state 1; identical to reading the rates off the truncated dual q-matrix.
    """
    lam = float(params.lam)
    log_lam = math.log(lam)

    def birth(n: int) -> float:
        return lam ** (2 * (n - 1))

    def death(n: int) -> float:
        return lam ** (2 * n)

    return BDChainSpec(
        birth=birth,
        death=death,
        kill_at_1=lam**2 - 1.0,
        log_birth=lambda n: 2.0 * (n - 1) * log_lam,
        log_death=lambda n: 2.0 * n * log_lam,
    )


def chain_from_qmatrix(qmatrix: TridiagonalOperator) -> BDChainSpec:
    """Read birth/death/killing rates off a conservative-or-subconservative q-matrix.

    b_n is the (n, n+1) entry, a_n the (n, n-1) entry, and the killing rate
    at state 1 is the row-1 deficit -A(1,1) - A(1,2).  Rejects matrices with
    nonpositive off-diagonal entries.
    """
    if np.any(qmatrix.sup <= 0.0) or np.any(qmatrix.sub <= 0.0):
        raise ValueError("q-matrix off-diagonals must be strictly positive")
    sup = qmatrix.sup.copy()
    sub = qmatrix.sub.copy()
    n_states = qmatrix.size
    kill = float(-qmatrix.diag[0] - qmatrix.sup[0])
    if kill < -1e-12:
        raise ValueError("row 1 has negative deficit; not a killing q-matrix")

    def birth(n: int) -> float:
        if not 1 <= n <= n_states - 1:
            raise IndexError(f"birth rate unavailable at state {n} (matrix size {n_states})")
        return float(sup[n - 1])

    def death(n: int) -> float:
        if not 2 <= n <= n_states:
            raise IndexError(f"death rate unavailable at state {n} (matrix size {n_states})")
        return float(sub[n - 2])

    return BDChainSpec(birth=birth, death=death, kill_at_1=max(kill, 0.0))


def _tail_passage_bound(spec: BDChainSpec, n_from: int, max_terms: int = 400) -> float:
    """Upper bound on the expected passage time spent at states >= n_from.

    Sums 1/(a_m + b_m); returns inf when the partial sums show no geometric
    decay within the budget.
    """
    total = 0.0
    first = None
    term = math.inf
    for m in range(n_from, n_from + max_terms):
        rate = spec.birth(m) + (spec.death(m) if m >= 2 else 0.0)
        if rate <= 0.0:
            return math.inf
        term = 1.0 / rate
        if first is None:
            first = term
        total += term
        if term < 1e-18 * total:
            return total
    if first is not None and term < 1e-12 * first:
        return total
    return math.inf


def simulate_chain(
    spec: BDChainSpec,
    t_max: float,
    n_max: int = 200,
    master_seed: int = 0,
    path_index: int = 0,
    rng: np.random.Generator | None = None,
) -> ChainPath:
    """Gillespie simulation from state 1 with a sentinel-level explosion test.

    Reaching ``n_max`` declares EXPLODED only when the analytic bound on the
    expected remaining passage time beyond the sentinel is below
    1e-6 * t_max (truncation error then provably negligible); otherwise the
    sentinel doubles and simulation continues.
    """
    if rng is None:
        rng = spawned_rng(master_seed, path_index)
    t = 0.0
    n = 1
    times = [0.0]
    states = [1]
    sentinel = n_max
    for _ in range(_MAX_JUMPS):
        b = spec.birth(n)
        a = spec.death(n) if n >= 2 else 0.0
        c = spec.kill_at_1 if n == 1 else 0.0
        total = b + a + c
        if total <= 0.0:
            return ChainPath(np.array(times), np.array(states), Outcome.ALIVE, t_max)
        wait = rng.exponential(1.0 / total)
        if t + wait >= t_max:
            return ChainPath(np.array(times), np.array(states), Outcome.ALIVE, t_max)
        t += wait
        u = rng.random() * total
        if u < b:
            n += 1
        elif u < b + a:
            n -= 1
        else:
            # killed in place: no state change is recorded, only the outcome
            return ChainPath(np.array(times), np.array(states), Outcome.KILLED, t)
        times.append(t)
        states.append(n)
        if n >= sentinel:
            bound = _tail_passage_bound(spec, sentinel)
            if bound < 1e-6 * t_max:
                return ChainPath(
                    np.array(times), np.array(states), Outcome.EXPLODED, t + bound
                )
            sentinel *= 2
    raise RuntimeError(f"exceeded {_MAX_JUMPS} jumps; rates look degenerate")


def boundary_criterion(
    spec: BDChainSpec, n_terms: int = 200
) -> BoundaryCriterionResult:
    """Partial sums of the entrance and reachable-boundary series in log space.

    pi_1 = 1, pi_{n+1} = pi_n b_n / a_{n+1}; products span lam**(n^2)-type
    magnitudes, hence the log-space accumulation.  Convergence verdicts come
    from tail term ratios plus Cauchy-increment smallness of the partial sums.
    Pure-birth chains (all deaths zero) reduce to the first-passage series
    sum 1/b_n, reported through the reuter fields with the headline verdict
    following it.
    """
    if n_terms < 10:
        raise ValueError("need n_terms >= 10")
    if spec.log_birth is not None and spec.log_death is not None:
        log_b = np.array([spec.log_birth(n) for n in range(1, n_terms + 1)])
        log_a = np.array([spec.log_death(n) for n in range(2, n_terms + 1)])
        pure_birth = False
    else:
        births = np.array([spec.birth(n) for n in range(1, n_terms + 1)])
        deaths = np.array([spec.death(n) for n in range(2, n_terms + 1)])
        if np.any(births <= 0.0):
            raise ValueError("birth rates must be positive for the boundary series")
        pure_birth = bool(np.all(deaths == 0.0))
        if not pure_birth and np.any(deaths <= 0.0):
            raise ValueError("death rates must be positive from state 2 on (or all zero)")
        if not pure_birth:
            log_b = np.log(births)
            log_a = np.log(deaths)
    if pure_birth:
        log_terms = -np.log(births)
        log_partials = np.logaddexp.accumulate(log_terms)
        conv = _log_series_verdict(log_terms, log_partials)
        return BoundaryCriterionResult(
            value=math.nan,
            converged=conv,
            reuter_value=float(np.exp(log_partials[-1])),
            reuter_converged=conv,
            n_terms=n_terms,
            killing_excluded=spec.kill_at_1 > 0.0,
        )

    log_pi = np.concatenate(([0.0], np.cumsum(log_b[:-1] - log_a)))
    log_inv = -(log_b + log_pi)
    lse_pi = np.logaddexp.accumulate(log_pi)
    lse_inv = np.logaddexp.accumulate(log_inv)

    entrance_log_terms = log_pi + lse_inv
    reuter_log_terms = log_inv + lse_pi
    entrance_log_partials = np.logaddexp.accumulate(entrance_log_terms)
    reuter_log_partials = np.logaddexp.accumulate(reuter_log_terms)
    with np.errstate(over="ignore"):
        entrance_value = float(np.exp(entrance_log_partials[-1]))
        reuter_value = float(np.exp(reuter_log_partials[-1]))

    return BoundaryCriterionResult(
        value=entrance_value,
        converged=_log_series_verdict(entrance_log_terms, entrance_log_partials),
        reuter_value=reuter_value,
        reuter_converged=_log_series_verdict(reuter_log_terms, reuter_log_partials),
        n_terms=n_terms,
        killing_excluded=spec.kill_at_1 > 0.0,
    )


# spec operation name used throughout the experiment drivers
explosion_criterion = boundary_criterion


def _log_series_verdict(log_terms: np.ndarray, log_partials: np.ndarray) -> bool:
    """Ratio-test-plus-Cauchy verdict for a positive series given in log space.

    Converged means the tail term ratios stay strictly below 1 and the last
    term is negligible (1e-12 relative) against the partial sum; a series
    that merely has not settled within the term budget reports False.
    """
    tail = log_terms[-20:]
    shrinking = bool(np.max(np.diff(tail)) < -1e-9) if len(tail) > 1 else False
    cauchy = bool(log_terms[-1] - log_partials[-1] <= math.log(1e-12))
    return shrinking and cauchy


def wilson_interval(successes: int, trials: int, z: float = _WILSON_Z99):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def dishonesty_probability(
    spec: BDChainSpec,
    t: float,
    n_paths: int,
    master_seed: int,
    n_max: int = 200,
) -> DishonestyEstimate:
    """Fraction of paths not alive at time t, with a Wilson 99% interval.

    Killed + exploded + alive fractions sum to 1 exactly by bookkeeping.
    """
    if n_paths < 100:
        raise ValueError("need n_paths >= 100 for a meaningful interval")
    counts = {Outcome.ALIVE: 0, Outcome.KILLED: 0, Outcome.EXPLODED: 0}
    for i in range(n_paths):
        if t <= 0.0:
            counts[Outcome.ALIVE] += 1
            continue
        path = simulate_chain(spec, t, n_max=n_max, master_seed=master_seed, path_index=i)
        counts[path.outcome] += 1
    not_alive = counts[Outcome.KILLED] + counts[Outcome.EXPLODED]
    lo, hi = wilson_interval(not_alive, n_paths)
    return DishonestyEstimate(
        estimate=not_alive / n_paths,
        ci_low=lo,
        ci_high=hi,
        killed_fraction=counts[Outcome.KILLED] / n_paths,
        exploded_fraction=counts[Outcome.EXPLODED] / n_paths,
        alive_fraction=counts[Outcome.ALIVE] / n_paths,
        n_paths=n_paths,
        seed=master_seed,
    )


def survival_curve(
    qmatrix: TridiagonalOperator,
    times: np.ndarray,
    tolerance: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic occupation probabilities of the chain started at state 1.

    Integrates the forward equations d/dt p = p A (as the adjoint system
    p' = A^T p) with the shared stiff machinery; returns (survival, p) with
    survival(t) = sum_n p_n(t).  1 - survival is the deterministic mass-loss
    oracle the Gillespie estimate is checked against.
    """
    p0 = np.zeros(qmatrix.size)
    p0[0] = 1.0
    profiles = integrate_linear(
        qmatrix.transpose(), p0, times, tolerance=tolerance, enforce_nonnegative=True
    )
    return profiles.sum(axis=1), profiles
