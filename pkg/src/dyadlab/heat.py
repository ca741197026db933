"""Weighted discrete Laplacian, its heat semigroup, and spectral-gap machinery.

The operator acts on site functions as
    (L f)(i) = k_i^2 (f(i+1) - f(i)) + k_{i-1}^2 (f(i-1) - f(i)),
with k_0 = 0 at the left edge.  DIRICHLET_RIGHT pins f(N+1) = 0 (the
mass-leaking minimal approximant); CONSERVATIVE_RIGHT zeroes k_N so column
sums vanish and total mass is conserved.  Entries span lam**(2N), so the
eigenvalue search runs on a rescaled copy of the operator: the practical
size limit is where gap / max_entry underflows (N around 480 for lam = 2,
guarded by ScalingLimitError).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams
from .tridiag import Boundary, TridiagonalOperator, integrate_linear

_PIVMIN = 1e-300
_SCALE_FLOOR = 1e-280


class ScalingLimitError(ValueError):
    """Operator too large for the rescaled eigenvalue search."""


class MassUnderflowError(RuntimeError):
    """Total mass decayed below the representable fitting floor."""


class GapMethod(enum.Enum):
    STURM_BISECTION = "sturm_bisection"
    RATE_FIT = "rate_fit"


@dataclass(frozen=True)
class GapResult:
    gap: float
    n_sites: int
    method: GapMethod


@dataclass(frozen=True)
class HeatTrajectory:
    times: np.ndarray
    profiles: np.ndarray  # (n_times, n_sites)

    @property
    def mass(self) -> np.ndarray:
        return self.profiles.sum(axis=1)


@dataclass(frozen=True)
class MassDecayFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    times: np.ndarray
    mass: np.ndarray

    def as_gap_result(self, n_sites: int) -> GapResult:
        return GapResult(gap=self.rate, n_sites=n_sites, method=GapMethod.RATE_FIT)


def weighted_laplacian(
    params: ModelParams,
    n_sites: int | None = None,
    boundary: Boundary = Boundary.DIRICHLET_RIGHT,
) -> TridiagonalOperator:
    """Build the weighted Laplacian on sites 1..n_sites.

    Symmetric by construction: the coupling between sites i and i+1 is
    k_i^2 on both off-diagonals.  At lam = 1 this is the standard discrete
    Laplacian (all weights 1).
    """
    n = params.n_modes if n_sites is None else n_sites
    if n < 2:
        raise ValueError("need at least 2 sites")
    lam = float(params.lam)
    k = lam ** np.arange(n + 1, dtype=float)
    k[0] = 0.0
    ksq = k * k
    diag = -(ksq[1 : n + 1] + ksq[0:n])
    off = ksq[1:n].copy()
    if boundary is Boundary.CONSERVATIVE_RIGHT:
        diag = diag.copy()
        diag[-1] = -ksq[n - 1]
    return TridiagonalOperator(sub=off, diag=diag, sup=off, boundary=boundary)


def evolve_heat(
    op: TridiagonalOperator,
    h0: np.ndarray,
    times: np.ndarray,
    tolerance: float = 1e-10,
) -> HeatTrajectory:
    """Evolve h' = op @ h with the shared stiff implicit machinery.

    Positivity is enforced for nonnegative initial data (discrete maximum
    principle), matching the semigroup it approximates.
    """
    h0 = np.asarray(h0, dtype=float)
    nonneg = bool(np.all(h0 >= 0.0))
    profiles = integrate_linear(
        op, h0, times, tolerance=tolerance, enforce_nonnegative=nonneg
    )
    return HeatTrajectory(times=np.asarray(times, dtype=float), profiles=profiles)


def _sturm_count(diag: np.ndarray, off: np.ndarray, x: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal matrix below x."""
    count = 0
    d = diag[0] - x
    if d < 0.0:
        count += 1
    for i in range(1, len(diag)):
        den = d if d != 0.0 else -_PIVMIN
        d = (diag[i] - x) - (off[i - 1] * off[i - 1]) / den
        if d < 0.0:
            count += 1
    return count


def eigenvalue_from_top(
    op: TridiagonalOperator, index: int = 0, rel_tol: float = 1e-10
) -> float:
    """index-th largest eigenvalue of a symmetric tridiagonal operator.

    Works on the operator rescaled by its largest entry, so the Sturm
    recurrence never overflows; the bisection bracket comes from Gershgorin
    discs of the rescaled matrix.
    """
    if not op.is_symmetric:
        raise ValueError("Sturm bisection requires a symmetric operator")
    n = op.size
    if not 0 <= index < n:
        raise ValueError(f"index out of range: {index}")
    scale = max(float(np.max(np.abs(op.diag))), float(np.max(np.abs(op.sup))), _PIVMIN)
    diag = op.diag / scale
    off = op.sup / scale
    radius = np.zeros(n)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    target = n - index
    # iterate to full float resolution if needed: eigenvalues as small as
    # gap/scale ~ 1e-300 require ~1000 halvings of the Gershgorin bracket
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _sturm_count(diag, off, mid) >= target:
            hi = mid
        else:
            lo = mid
        if (hi - lo) <= rel_tol * max(abs(lo), abs(hi)):
            break
    return 0.5 * (lo + hi) * scale


def spectral_gap(op: TridiagonalOperator, rel_tol: float = 1e-10) -> GapResult:
    """Magnitude of the spectral abscissa of the Dirichlet-truncated operator."""
    if op.boundary is not Boundary.DIRICHLET_RIGHT:
        raise ValueError(
            "spectral_gap needs DIRICHLET_RIGHT (the conservative operator has eigenvalue 0)"
        )
    top = eigenvalue_from_top(op, 0, rel_tol)
    scale = max(float(np.max(np.abs(op.diag))), 1.0)
    if 0.0 < abs(top) / scale < _SCALE_FLOOR:
        raise ScalingLimitError(
            f"gap/scale = {abs(top) / scale:.3e} below safe rescaling floor; reduce n_sites"
        )
    return GapResult(gap=-top, n_sites=op.size, method=GapMethod.STURM_BISECTION)


def relaxation_rate(op: TridiagonalOperator, rel_tol: float = 1e-10) -> float:
    """Decay rate toward the uniform profile for the mass-conserving operator.

    This is the magnitude of the second-from-top eigenvalue (the top one is 0
    on constants).
    """
    if op.boundary is not Boundary.CONSERVATIVE_RIGHT:
        raise ValueError("relaxation_rate is defined for CONSERVATIVE_RIGHT")
    return -eigenvalue_from_top(op, 1, rel_tol)


def mass_decay_fit(
    op: TridiagonalOperator,
    h0: np.ndarray,
    window: tuple[float, float],
    n_samples: int = 25,
    tolerance: float = 1e-10,
) -> MassDecayFit:
    """Least-squares exponential rate of total-mass decay over a time window.

    The caller supplies a window past the transients (2x the relaxation time
    constant is the usual left edge).  Returns the fitted rate (positive for
    decay), the log intercept, and R^2 over the window samples.
    """
    t_lo, t_hi = window
    if not 0.0 <= t_lo < t_hi:
        raise ValueError(f"bad window {window}")
    if n_samples < 4:
        raise ValueError("need at least 4 samples for a meaningful fit")
    sample_times = np.linspace(t_lo, t_hi, n_samples)
    times = np.concatenate(([0.0], sample_times)) if t_lo > 0 else sample_times
    traj = evolve_heat(op, h0, times, tolerance=tolerance)
    mass = traj.mass[-n_samples:]
    # below ~50x the integrator's absolute tolerance the samples are solver
    # noise, not decay; 1e-280 is the hard representability floor
    if np.any(mass < max(1e-280, 50.0 * tolerance)):
        raise MassUnderflowError("total mass underflowed before the window end")
    logm = np.log(mass)
    design = np.vstack([sample_times, np.ones_like(sample_times)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, logm, rcond=None)
    resid = logm - design @ np.array([slope, intercept])
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((logm - logm.mean()) ** 2))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res < 1e-24 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return MassDecayFit(
        rate=-float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        window=(float(t_lo), float(t_hi)),
        times=sample_times,
        mass=mass,
    )
