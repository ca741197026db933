"""Model parameters, wavenumbers, norms, and the shared observable catalog.

Every other module depends only on this one.  All value types are immutable
and all functions are pure, so concurrent use needs no coordination.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DivergentSeriesError(ValueError):
    """Raised when a series value is requested outside its region of convergence."""


class Truncation(enum.Enum):
    """How the finite system treats its last mode.

    ABSORBING keeps the full damping on mode N while the matching noise term
    is cut off (the mode bleeds energy); CONSERVATIVE zeroes the last coupling
    coefficient instead, so the truncated dynamics is a pure rotation and the
    total squared amplitude is an exact invariant.
    """

    ABSORBING = "absorbing"
    CONSERVATIVE = "conservative"


@dataclass(frozen=True)
class ModelParams:
    """Coupling ratio, truncation size, and equilibrium variance.

    ``lam`` is the geometric ratio of the coupling coefficients
    k_n = lam**n (k_0 = 0 by convention).  ``lam == 1`` is admitted solely
    for the no-spectral-gap experiments; anything needing the summable rate
    series must reject it.  ``r`` is the per-coordinate variance of the
    invariant Gaussian.
    """

    lam: float
    n_modes: int
    r: float = 1.0
    truncation: Truncation = Truncation.ABSORBING

    def __post_init__(self):
        if not self.lam >= 1.0:
            raise ValueError(f"lam must be >= 1, got {self.lam}")
        if self.n_modes < 2:
            raise ValueError(f"n_modes must be >= 2, got {self.n_modes}")
        if not self.r > 0.0:
            raise ValueError(f"r must be > 0, got {self.r}")
        try:
            top = float(self.lam) ** (2 * (self.n_modes + 1))
        except OverflowError:
            top = float("inf")
        if not np.isfinite(top):
            raise ValueError(
                f"k_sq overflows float64 at lam={self.lam}, n_modes={self.n_modes}"
            )

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """k_0..k_{N+1} with k_0 = 0, computed once and cached."""
        k = float(self.lam) ** np.arange(self.n_modes + 2, dtype=float)
        k[0] = 0.0
        k.setflags(write=False)
        return k

    @cached_property
    def k_sq(self) -> np.ndarray:
        ksq = self.wavenumbers**2
        ksq.setflags(write=False)
        return ksq

    @property
    def summable(self) -> bool:
        """Whether the rate series sum n/k_n**2 converges (lam > 1)."""
        return self.lam > 1.0


class ObservableKind(enum.Enum):
    COORDINATE = "coordinate"
    CENTERED_SQUARE = "centered_square"


@dataclass(frozen=True)
class Observable:
    """A test function from the catalog: x_l or x_l**2 - r (1-based l)."""

    kind: ObservableKind
    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"observable index must be >= 1, got {self.index}")

    @classmethod
    def coordinate(cls, index: int) -> "Observable":
        return cls(ObservableKind.COORDINATE, index)

    @classmethod
    def centered_square(cls, index: int) -> "Observable":
        return cls(ObservableKind.CENTERED_SQUARE, index)

    def evaluate(self, x: np.ndarray, r: float) -> np.ndarray:
        """Evaluate on states of shape (..., N); returns shape (...)."""
        v = np.asarray(x)[..., self.index - 1]
        if self.kind is ObservableKind.COORDINATE:
            return v
        return v * v - r


def wavenumber(params: ModelParams, n: int) -> float:
    """k_n = lam**n for n >= 1, with the boundary convention k_0 = 0."""
    if n < 0 or n > params.n_modes + 1:
        raise ValueError(f"n out of range: {n}")
    return float(params.wavenumbers[n])


def weighted_norm_sq(params: ModelParams, x: np.ndarray) -> float:
    """Squared weighted norm sum_n k_n**-2 x_n**2 over the supplied modes."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] > params.n_modes:
        raise ValueError("state longer than n_modes")
    w = params.k_sq[1 : x.shape[-1] + 1]
    return float(np.sum(x * x / w))


def weighted_norm_sq_batch(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Vectorized weighted_norm_sq for states of shape (..., n)."""
    x = np.asarray(x, dtype=float)
    w = params.k_sq[1 : x.shape[-1] + 1]
    return np.sum(x * x / w, axis=-1)


def l2_norm_sq(x: np.ndarray) -> float:
    """Total squared amplitude sum x_n**2 (the conserved quantity)."""
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * x))


def relaxation_time(params: ModelParams) -> float:
    """Time constant of the exponential equilibration rate: sum_n n / k_n**2.

    Uses the closed form x / (1 - x)**2 with x = lam**-2 rather than a
    truncated sum, eliminating truncation ambiguity in tolerances; a test
    cross-checks it against partial sums.  Diverges for lam <= 1.
    """
    if not params.summable:
        raise DivergentSeriesError(
            f"sum n/k_n**2 diverges for lam={params.lam} (need lam > 1)"
        )
    x = float(params.lam) ** -2
    return x / (1.0 - x) ** 2


def gradient_energy(params: ModelParams, f: Observable) -> float:
    """Equilibrium Dirichlet energy sum_n |d_n f|^2 in L2 of the invariant Gaussian.

    Closed forms for the catalog: a coordinate has gradient e_l (energy 1);
    a centered square has gradient weight 2 x_l, whose equilibrium second
    moment gives 4 r.
    """
    if f.index > params.n_modes:
        raise ValueError(f"observable index {f.index} exceeds n_modes={params.n_modes}")
    if f.kind is ObservableKind.COORDINATE:
        return 1.0
    return 4.0 * params.r


def spawned_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (master_seed, key...).

    The same (seed, key) always yields the same stream regardless of how
    many other streams were spawned, so parallel work is schedule-independent.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=key))
