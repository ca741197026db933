import numpy as np
import pytest
import scipy.linalg

import dyadlab.tridiag as tridiag
from dyadlab.tridiag import (
    Boundary,
    StepSizeUnderflowError,
    TridiagonalOperator,
    integrate_linear,
    solve_tridiagonal,
    thomas_solve,
)


def _random_dominant_system(rng, n):
    sub = rng.standard_normal(n - 1)
    sup = rng.standard_normal(n - 1)
    diag = np.abs(sub).sum() + np.abs(sup).sum() + 1.0 + rng.random(n)
    rhs = rng.standard_normal(n)
    return sub, diag, sup, rhs


def test_thomas_matches_dense_and_lapack():
    rng = np.random.default_rng(1)
    for n in (2, 3, 7, 40):
        sub, diag, sup, rhs = _random_dominant_system(rng, n)
        dense = np.diag(diag) + np.diag(sup, 1) + np.diag(sub, -1)
        expected = np.linalg.solve(dense, rhs)
        np.testing.assert_allclose(thomas_solve(sub, diag, sup, rhs), expected, rtol=1e-12)
        np.testing.assert_allclose(
            solve_tridiagonal(sub, diag, sup, rhs), expected, rtol=1e-12
        )


def test_operator_matvec_and_dense():
    rng = np.random.default_rng(2)
    op = TridiagonalOperator(
        sub=rng.standard_normal(5),
        diag=rng.standard_normal(6),
        sup=rng.standard_normal(5),
        boundary=Boundary.DIRICHLET_RIGHT,
    )
    v = rng.standard_normal(6)
    np.testing.assert_allclose(op.matvec(v), op.to_dense() @ v, rtol=1e-14)
    np.testing.assert_allclose(op.transpose().to_dense(), op.to_dense().T)


def test_operator_shape_validation():
    with pytest.raises(ValueError):
        TridiagonalOperator(
            sub=np.zeros(3), diag=np.zeros(3), sup=np.zeros(2),
            boundary=Boundary.DIRICHLET_RIGHT,
        )


def test_integrate_zero_stays_zero():
    op = TridiagonalOperator(
        sub=np.ones(3), diag=-2 * np.ones(4), sup=np.ones(3),
        boundary=Boundary.DIRICHLET_RIGHT,
    )
    out = integrate_linear(op, np.zeros(4), np.array([0.0, 0.5, 1.0]))
    assert np.all(out == 0.0)


def test_integrate_matches_expm():
    rng = np.random.default_rng(3)
    n = 6
    sub = np.abs(rng.standard_normal(n - 1)) + 0.5
    diag = -(np.abs(rng.standard_normal(n)) + 2.0)
    op = TridiagonalOperator(sub=sub, diag=diag, sup=sub, boundary=Boundary.DIRICHLET_RIGHT)
    y0 = rng.random(n)
    times = np.array([0.0, 0.3, 1.0])
    out = integrate_linear(op, y0, times, tolerance=1e-10)
    for j, t in enumerate(times):
        expected = scipy.linalg.expm(t * op.to_dense()) @ y0
        np.testing.assert_allclose(out[j], expected, atol=5e-10)


def test_integrate_times_validation():
    op = TridiagonalOperator(
        sub=np.ones(2), diag=-np.ones(3), sup=np.ones(2),
        boundary=Boundary.DIRICHLET_RIGHT,
    )
    with pytest.raises(ValueError):
        integrate_linear(op, np.zeros(3), np.array([0.0, -1.0]))
    with pytest.raises(ValueError):
        integrate_linear(op, np.zeros(2), np.array([0.0, 1.0]))


def test_substep_underflow_signalled(monkeypatch):
    monkeypatch.setattr(tridiag, "MAX_SUBSTEPS", 64)
    op = TridiagonalOperator(
        sub=np.ones(3), diag=-2 * np.ones(4), sup=np.ones(3),
        boundary=Boundary.DIRICHLET_RIGHT,
    )
    with pytest.raises(StepSizeUnderflowError):
        integrate_linear(op, np.ones(4), np.array([0.0, 1.0]), tolerance=0.0)


def test_nonnegativity_enforced_under_coarse_ringing():
    # huge first step: the trapezoidal rule rings, the implicit-Euler
    # fallback and clamp must keep the profile essentially nonnegative
    lam, n = 2.0, 10
    ksq = lam ** (2 * np.arange(n + 1))
    ksq[0] = 0.0
    diag = -(ksq[1 : n + 1] + ksq[0:n])
    off = ksq[1:n]
    op = TridiagonalOperator(sub=off, diag=diag, sup=off, boundary=Boundary.DIRICHLET_RIGHT)
    h0 = np.zeros(n)
    h0[0] = 1.0
    out = integrate_linear(
        op, h0, np.array([0.0, 1.0]), tolerance=1.0,
        enforce_nonnegative=True, start_nsub=1,
    )
    assert out.min() >= -1e-12
