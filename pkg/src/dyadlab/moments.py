"""Deterministic second-moment evolution and its dual probability system.

The per-mode second moments q_n(t) close into a linear tridiagonal ODE whose
generator coincides with the weighted Laplacian of :mod:`dyadlab.heat` (the
moment/heat correspondence; asserted in tests).  Rescaling q_n by k_n^2 c
turns the system into forward Kolmogorov equations d/dt p = p A for a
birth-death q-matrix A with a mass deficit in row 1: the killing rate
lam^2 - 1 at state 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, Truncation
from .tridiag import Boundary, TridiagonalOperator, integrate_linear


@dataclass(frozen=True)
class MomentTrajectory:
    times: np.ndarray
    q: np.ndarray  # (n_times, n_modes), entrywise nonnegative

    def weighted_energy(self, params: ModelParams) -> np.ndarray:
        """sum_n k_n**-2 q_n(t): nonincreasing under the absorbing truncation."""
        w = 1.0 / params.k_sq[1 : self.q.shape[1] + 1]
        return self.q @ w

    @property
    def total(self) -> np.ndarray:
        return self.q.sum(axis=1)


def moment_rhs(params: ModelParams, q: np.ndarray) -> np.ndarray:
    """Right-hand side of the closed second-moment system.

    Component n is -k_{n-1}^2 (q_n - q_{n-1}) + k_n^2 (q_{n+1} - q_n) with
    q_0 = 0 and either q_{N+1} = 0 (absorbing) or k_N = 0 (conservative).
    """
    q = np.asarray(q, dtype=float)
    n = params.n_modes
    if q.shape != (n,):
        raise ValueError(f"q must have shape ({n},)")
    ksq = params.k_sq
    up = np.zeros(n)  # k_{n-1}^2 (q_{n-1} - q_n)
    up[1:] = ksq[1:n] * (q[:-1] - q[1:])
    up[0] = 0.0  # k_0 = 0
    down = np.zeros(n)  # k_n^2 (q_{n+1} - q_n)
    down[:-1] = ksq[1:n] * (q[1:] - q[:-1])
    if params.truncation is Truncation.ABSORBING:
        down[-1] = ksq[n] * (0.0 - q[-1])
    return up + down


def moment_operator(params: ModelParams) -> TridiagonalOperator:
    """Matrix of the second-moment system: symmetric tridiagonal with k^2 couplings."""
    n = params.n_modes
    ksq = params.k_sq
    off = ksq[1:n].copy()
    diag = -(ksq[1 : n + 1] + ksq[0:n])
    if params.truncation is Truncation.CONSERVATIVE:
        diag = diag.copy()
        diag[-1] = -ksq[n - 1]
        boundary = Boundary.CONSERVATIVE_RIGHT
    else:
        boundary = Boundary.DIRICHLET_RIGHT
    return TridiagonalOperator(sub=off, diag=diag, sup=off, boundary=boundary)


def integrate_moments(
    params: ModelParams,
    q0: np.ndarray,
    times: np.ndarray,
    tolerance: float = 1e-8,
) -> MomentTrajectory:
    """Integrate the stiff moment ODE at the requested output times.

    A-stable implicit stepping (see :mod:`dyadlab.tridiag`); the stiffness
    ratio is lam**(2N-2), which rules out explicit methods entirely.  Output
    stays entrywise nonnegative (clamped at the -1e-12 solver tolerance).
    """
    q0 = np.asarray(q0, dtype=float)
    if np.any(q0 < 0.0):
        raise ValueError("second moments must be nonnegative")
    op = moment_operator(params)
    q = integrate_linear(op, q0, times, tolerance=tolerance, enforce_nonnegative=True)
    return MomentTrajectory(times=np.asarray(times, dtype=float), q=q)


def dual_qmatrix(params: ModelParams, n_states: int) -> TridiagonalOperator:
    """q-matrix A of the dual birth-death chain, truncated at n_states.

    Row n: down rate k_n^2, diagonal -(k_n^2 + k_{n-1}^2), up rate
    k_n^4 / k_{n+1}^2 (= k_{n-1}^2 for geometric wavenumbers, and 1 in row 1
    for every lam).  Rows 2..N sum to zero; row 1 has deficit lam^2 - 1, the
    killing rate at state 1.
    """
    if n_states < 2:
        raise ValueError("need at least 2 states")
    lam = float(params.lam)
    k = lam ** np.arange(n_states + 2, dtype=float)
    k[0] = 0.0
    ksq = k * k
    if not np.isfinite(ksq[n_states + 1]):
        raise ValueError(f"k_sq overflows float64 at n_states={n_states}")
    sub = ksq[2 : n_states + 1].copy()  # entry (n, n-1) = k_n^2, n = 2..N
    diag = -(ksq[1 : n_states + 1] + ksq[0:n_states])
    sup = ksq[1:n_states] ** 2 / ksq[2 : n_states + 1]  # entry (n, n+1)
    return TridiagonalOperator(
        sub=sub, diag=diag, sup=sup, boundary=Boundary.DIRICHLET_RIGHT
    )


def dual_probabilities(params: ModelParams, q: np.ndarray, c: float) -> np.ndarray:
    """p_n = q_n / (k_n^2 c): the dual-chain occupation probabilities.

    With c equal to the initial weighted energy, sum(p) starts at 1 and its
    decay under the absorbing evolution is the mass-loss (dishonesty) signal.
    """
    if not c > 0.0:
        raise ValueError("normalizing constant must be positive")
    q = np.asarray(q, dtype=float)
    ksq = params.k_sq[1 : q.shape[-1] + 1]
    return q / (ksq * c)
