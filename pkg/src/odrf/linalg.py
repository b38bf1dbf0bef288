"""Small dense symmetric linear algebra used by the split finders.

Matrices here are tiny (mtry + 1 on a side), so everything works on plain
numpy arrays. LAPACK's symmetric eigensolver backs :func:`sym_eig`; a cyclic
Jacobi solver is kept alongside as an independent reference.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

PIVOT_FLOOR = 1e-12
NULL_TOL = 1e-10
TIKHONOV_SCALE = 1e-4


class NotPositiveDefinite(np.linalg.LinAlgError):
    pass


class EigenPair(NamedTuple):
    value: float
    vector: np.ndarray


def _check_symmetric(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.abs(A).max() if A.size else 0.0
    if np.abs(A - A.T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return A


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of every column made positive
    if V.size == 0:
        return V
    rows = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[rows, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig(A) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix.

    Returns ``(values, vectors)`` with values ascending and the matching
    orthonormal eigenvectors in the columns of ``vectors``.
    """
    A = _check_symmetric(A)
    w, V = np.linalg.eigh(A)
    return w, _fix_signs(V)


def jacobi_eigh(A, tol=1e-15, max_sweeps=60) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for symmetric matrices (ascending order)."""
    A = _check_symmetric(A).copy()
    d = A.shape[0]
    V = np.eye(d)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * max(np.linalg.norm(A), 1e-300):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], _fix_signs(V[:, order])


def cholesky(A) -> np.ndarray | None:
    """Lower Cholesky factor, or None when A is not numerically positive definite.

    A pivot at or below ``1e-12 * trace(A) / d`` counts as failure, which makes
    this the rank-deficiency detector for the split finders.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    tr = np.trace(A)
    if d == 0 or not tr > 0:
        return None
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(L)) ** 2 <= PIVOT_FLOOR * tr / d:
        return None
    return L


def log_det_psd(A) -> float:
    L = cholesky(A)
    if L is None:
        raise NotPositiveDefinite("log-determinant needs a positive definite matrix")
    return float(2.0 * np.sum(np.log(np.diag(L))))


def null_space_basis(P, tol=NULL_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of a PSD matrix.

    Directions whose eigenvalue is at most ``tol * lambda_max`` are kept; a
    full-rank input yields a ``(d, 0)`` array.
    """
    w, V = sym_eig(P)
    lam_max = max(float(w[-1]), 0.0) if w.size else 0.0
    return V[:, w <= tol * lam_max]


def tikhonov_delta(H, scale=TIKHONOV_SCALE) -> float:
    d = H.shape[0]
    tr = float(np.trace(H))
    return scale * tr / d if tr > 0 else scale


def _pencil(num, L_den):
    """Eigenpairs of num r = lam den r given den = L L^T; ascending lam."""
    Y = solve_triangular(L_den, num, lower=True)
    C = solve_triangular(L_den, Y.T, lower=True)
    C = 0.5 * (C + C.T)
    w, U = np.linalg.eigh(C)
    R = solve_triangular(L_den.T, U, lower=False)
    return w, R


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    return _fix_signs(v[:, None])[:, 0]


def rayleigh_quotient(P, Q, r) -> float:
    num = float(r @ P @ r)
    den = float(r @ Q @ r)
    if den <= 1e-300:
        return np.inf if num > 0 else np.nan
    return num / den


def _null_plane(num, den, tol):
    # Algorithm: restrict to null(num), maximise the den form there.
    O = null_space_basis(num, tol)
    if O.shape[1] == 0:
        raise NotPositiveDefinite("numerator reported rank-deficient but has no null space")
    w, U = np.linalg.eigh(O.T @ den @ O)
    return _unit(O @ U[:, -1])


def solve_generalized_rayleigh(P, Q, reg="none", delta=None, delta_scale=TIKHONOV_SCALE,
                               tol=NULL_TOL) -> tuple[EigenPair, EigenPair]:
    """Extreme generalized Rayleigh-quotient directions of the pencil (P, Q).

    ``r_min`` minimises r'Pr / r'Qr and ``r_max`` minimises r'Qr / r'Pr; both
    come out of one decomposition of ``P r = lam Q r`` (smallest and largest
    lam). Each returned value is r'Pr / r'Qr on the matrices actually solved.

    Args:
        P, Q: symmetric PSD matrices of equal size.
        reg: ``"none"`` (Q must be positive definite), ``"tikhonov"`` (each
            matrix failing Cholesky gets ``delta * I`` added) or
            ``"nullspace"`` (a rank-deficient numerator is handled by
            maximising the other form inside its null space).
        delta: absolute Tikhonov shift; when None each failing matrix H
            gets ``delta_scale * trace(H) / dim(H)``.
    """
    P = _check_symmetric(P)
    Q = _check_symmetric(Q)
    if P.shape != Q.shape:
        raise ValueError(f"dimension mismatch: {P.shape} vs {Q.shape}")
    d = P.shape[0]

    if reg == "tikhonov":
        LP = cholesky(P)
        if LP is None:
            P = P + (delta if delta is not None else tikhonov_delta(P, delta_scale)) * np.eye(d)
        LQ = cholesky(Q)
        if LQ is None:
            Q = Q + (delta if delta is not None else tikhonov_delta(Q, delta_scale)) * np.eye(d)
            LQ = cholesky(Q)
        if LQ is None:
            raise NotPositiveDefinite("denominator not positive definite after Tikhonov shift")
        reg = "none"

    if reg == "none":
        LQ = cholesky(Q)
        if LQ is None:
            raise NotPositiveDefinite("Q is not positive definite")
        w, R = _pencil(P, LQ)
        lo, hi = _unit(R[:, 0]), _unit(R[:, -1])
        return (EigenPair(rayleigh_quotient(P, Q, lo), lo),
                EigenPair(rayleigh_quotient(P, Q, hi), hi))

    if reg != "nullspace":
        raise ValueError(f"unknown regularization {reg!r}")

    LP = cholesky(P)
    LQ = cholesky(Q)
    if LP is None:
        lo = _null_plane(P, Q, tol)
    elif LQ is not None:
        lo = _unit(_pencil(P, LQ)[1][:, 0])
    else:
        lo = _unit(_pencil(Q, LP)[1][:, -1])
    if LQ is None:
        hi = _null_plane(Q, P, tol)
    else:
        hi = _unit(_pencil(P, LQ)[1][:, -1])
    return (EigenPair(rayleigh_quotient(P, Q, lo), lo),
            EigenPair(rayleigh_quotient(P, Q, hi), hi))
