"""Dense symmetric / SPD kernels used by the graph, estimator and analysis code.

All matrices here are small (desk scale), so full dense factorizations are
used throughout: Cholesky for SPD solves, a full symmetric eigendecomposition
for spectral queries.  Tolerances are module constants and can be overridden
per call.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ContractViolation, SingularMatrixError

# |A - A.T| <= SYMMETRY_RTOL * max|A| counts as symmetric.
SYMMETRY_RTOL = 1e-12
# Cholesky pivots below SPD_PIVOT_RTOL * trace(A) count as singular.
SPD_PIVOT_RTOL = 1e-14
# ||A X - B|| <= SOLVE_RESIDUAL_RTOL * ||B|| must hold after a solve.
SOLVE_RESIDUAL_RTOL = 1e-10
# Eigen residual tolerance, relative to 1 + ||A||.
EIGEN_RTOL = 1e-9


def check_finite_matrix(a, name="matrix") -> np.ndarray:
    """Return ``a`` as a 2-D float array, rejecting non-finite entries."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"{name} must be square 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} has non-finite entries")
    return a


def as_symmetric(a, rtol=None, name="matrix") -> np.ndarray:
    """Validate symmetry within tolerance and return the symmetrized copy.

    Positive definiteness is deliberately not checked here; it surfaces at
    factorization time (spd_solve) where the pivot floor applies.
    """
    a = check_finite_matrix(a, name)
    tol = (SYMMETRY_RTOL if rtol is None else rtol) * max(1.0, np.abs(a).max(initial=0.0))
    gap = np.abs(a - a.T).max(initial=0.0)
    if gap > tol:
        raise ContractViolation(f"{name} is not symmetric: max |A - A.T| = {gap:g} > {tol:g}")
    return 0.5 * (a + a.T)


def sherman_morrison_downdate(P, phi):
    """Rank-one covariance downdate.

    Returns ``(P_bar, b)`` with ``b = 1 / (1 + phi^T P phi)`` and
    ``P_bar = P - b (P phi)(P phi)^T``, i.e. the exact inverse of
    ``P^{-1} + phi phi^T``.
    """
    P = np.asarray(P, dtype=float)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != phi.shape[0]:
        raise ContractViolation(f"dimension mismatch: P {P.shape}, phi {phi.shape}")
    v = P @ phi
    quad = float(phi @ v)
    if not np.isfinite(quad):
        raise ContractViolation("non-finite quadratic form phi^T P phi")
    b = 1.0 / (1.0 + quad)
    P_bar = P - b * np.outer(v, v)
    # symmetrize: roundoff breaks P_bar = P_bar.T at the last bit
    return 0.5 * (P_bar + P_bar.T), b


def spd_factor(A, pivot_rtol=None):
    """Cholesky factor of a symmetric positive definite matrix.

    Raises SingularMatrixError when a pivot falls below
    ``pivot_rtol * trace(A)`` or the factorization fails outright.
    """
    A = np.asarray(A, dtype=float)
    try:
        c, low = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"Cholesky failed: {exc}") from None
    floor = (SPD_PIVOT_RTOL if pivot_rtol is None else pivot_rtol) * max(np.trace(A), 0.0)
    pivots = np.diag(c) ** 2
    if pivots.min(initial=np.inf) < floor:
        raise SingularMatrixError(
            f"pivot {pivots.min():g} below floor {floor:g}; matrix numerically singular"
        )
    return c, low


def factor_solve(factor, B):
    """Solve with a factor from :func:`spd_factor`; B may be a vector or matrix."""
    return scipy.linalg.cho_solve(factor, np.asarray(B, dtype=float), check_finite=False)


def spd_solve(A, B, pivot_rtol=None):
    """Solve ``A X = B`` for symmetric positive definite ``A``."""
    A = as_symmetric(A, name="A")
    B = np.asarray(B, dtype=float)
    if B.shape[0] != A.shape[0]:
        raise ContractViolation(f"dimension mismatch: A {A.shape}, B {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ContractViolation("B has non-finite entries")
    return factor_solve(spd_factor(A, pivot_rtol), B)


def spd_inverse(A, pivot_rtol=None):
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    X = spd_solve(A, np.eye(np.asarray(A).shape[0]), pivot_rtol)
    return 0.5 * (X + X.T)


def sym_eigen_extremes(A, rtol=None):
    """(smallest, largest) eigenvalue of a symmetric matrix.

    Uses a full dense symmetric eigendecomposition; input must be symmetric
    within tolerance or a ContractViolation is raised.
    """
    A = as_symmetric(A, rtol, name="A")
    vals = np.linalg.eigvalsh(A)
    return float(vals[0]), float(vals[-1])


def psd_order_holds(A, B, tol=0.0) -> bool:
    """True when ``A <= B`` in the positive semidefinite order, within ``tol``.

    Decided by the smallest eigenvalue of the symmetrized difference B - A.
    """
    A = as_symmetric(A, name="A")
    B = as_symmetric(B, name="B")
    if A.shape != B.shape:
        raise ContractViolation(f"shape mismatch: A {A.shape}, B {B.shape}")
    smallest, _ = sym_eigen_extremes(B - A)
    return smallest >= -tol
