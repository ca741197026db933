"""Compiled inner loops for path simulation.

Each kernel advances one path in place through a pre-drawn block of standard
normals; drawing stays in numpy so the per-path generator contract is owned
by the caller.  fastmath is deliberately off: the rotation sweeps must keep
their exact-orthogonality roundoff behavior.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def em_scan(x, z, damp, kvec_scaled):
    """Euler-Maruyama sweep over z.shape[0] steps of standard normals.

    z has n_modes - 1 columns (the last mode's own noise term multiplies the
    truncated zero mode and never enters); kvec_scaled = k * sqrt(dt) folds
    the increment scale into the couplings, damp[n] = 1 - dt * a_n holds the
    whole drift.
    """
    n_steps = z.shape[0]
    n = x.shape[0]
    y = np.empty(n)
    a = x
    b = y
    for s in range(n_steps):
        b[0] = damp[0] * a[0] - kvec_scaled[1] * a[1] * z[s, 0]
        for j in range(1, n - 1):
            b[j] = (
                damp[j] * a[j]
                + kvec_scaled[j] * a[j - 1] * z[s, j - 1]
                - kvec_scaled[j + 1] * a[j + 1] * z[s, j]
            )
        b[n - 1] = damp[n - 1] * a[n - 1] + kvec_scaled[n - 1] * a[n - 2] * z[s, n - 2]
        tmp = a
        a = b
        b = tmp
    if a is not x:
        for j in range(n):
            x[j] = a[j]


@njit(cache=True)
def rot_scan_strang(x, cos_h, sin_h, damp):
    """Symmetric splitting sweep: half-angle planes 1..N-1, damping, then N-1..1.

    cos_h/sin_h are cosines/sines of the half angles theta_n / 2; damp is the
    exact last-mode factor exp(-k_N^2 dt / 2) (1.0 for the conservative
    truncation).
    """
    n_steps = cos_h.shape[0]
    planes = cos_h.shape[1]
    for s in range(n_steps):
        for j in range(planes):
            c = cos_h[s, j]
            sn = sin_h[s, j]
            a = x[j]
            b = x[j + 1]
            x[j] = c * a - sn * b
            x[j + 1] = sn * a + c * b
        x[planes] *= damp
        for j in range(planes - 1, -1, -1):
            c = cos_h[s, j]
            sn = sin_h[s, j]
            a = x[j]
            b = x[j + 1]
            x[j] = c * a - sn * b
            x[j + 1] = sn * a + c * b


@njit(cache=True)
def rot_scan_lie(x, cos_a, sin_a, damp):
    """Lexicographic splitting sweep: full-angle planes 1..N-1, then damping."""
    n_steps = cos_a.shape[0]
    planes = cos_a.shape[1]
    for s in range(n_steps):
        for j in range(planes):
            c = cos_a[s, j]
            sn = sin_a[s, j]
            a = x[j]
            b = x[j + 1]
            x[j] = c * a - sn * b
            x[j + 1] = sn * a + c * b
        x[planes] *= damp
