"""Dense matrix kernels: Lyapunov solves, Riccati and information-form steps.

All functions are pure and operate on small float64 numpy arrays.  Symmetric
outputs are re-symmetrized as ``(M + M.T) / 2`` before being returned.
"""

import numpy as np
import scipy.linalg as sla

from .errors import (
    MatrixOverflowError,
    NotPositiveDefiniteError,
    NotStableError,
    NumericalBreakdownError,
    SingularMatrixError,
)

SYM_TOL = 1e-9
PD_PIVOT = 1e-12
STABLE_MARGIN = 1e-9
POWER_LIMIT = 1e150
PSD_CLIP = -1e-9
PSD_HARD = -1e-6


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def as_square(M, name="matrix"):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def max_norm(M):
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def symmetrize(M):
    return (M + M.T) / 2.0


def is_symmetric(M, tol=SYM_TOL):
    return max_norm(M - M.T) <= tol * (1.0 + max_norm(M))


def is_positive_definite(M, pivot=PD_PIVOT):
    """Cholesky-based test; pivots must exceed ``pivot`` relative to scale."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return True
    if not is_symmetric(M):
        return False
    try:
        c = np.linalg.cholesky(symmetrize(M))
    except np.linalg.LinAlgError:
        return False
    return float(np.min(np.diag(c)) ** 2) > pivot * max(1.0, max_norm(M))


def require_positive_definite(M, name="matrix"):
    if not is_positive_definite(M):
        raise NotPositiveDefiniteError(f"{name} is not symmetric positive definite")


def spectral_radius(M):
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def clip_psd(M, floor=PSD_CLIP, hard=PSD_HARD):
    """Project a symmetric matrix back into the PSD cone.

    Eigenvalues in ``[hard, floor)`` are treated as roundoff and raised to zero;
    anything below ``hard`` is a genuine breakdown.
    """
    M = symmetrize(np.asarray(M, dtype=float))
    if M.size == 0:
        return M
    w, v = np.linalg.eigh(M)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w.min() < hard * scale:
        raise NumericalBreakdownError(f"covariance eigenvalue {w.min():.3e} below {hard}")
    if w.min() >= floor * scale:
        return M
    w = np.where(w < 0.0, 0.0, w)
    return symmetrize((v * w) @ v.T)


def solve(A, B, what="solve"):
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{what}: {exc}") from None
    if not np.all(np.isfinite(X)):
        raise SingularMatrixError(f"{what}: non-finite result")
    return X


def inv(M, what="inverse"):
    M = np.asarray(M, dtype=float)
    return solve(M, np.eye(M.shape[0]), what)


def solve_discrete_lyapunov(As, Qs, tol=1e-12, max_doublings=64):
    """Solve ``P = As P As' + Qs`` for stable ``As``.

    Uses the doubling form of the fixed-point iteration: after ``j`` rounds
    the iterate equals ``2**j`` plain iterations started from ``Qs``.

    Raises
    ------
    NotStableError
        If the spectral radius of ``As`` is within ``1e-9`` of one or larger.
    NotPositiveDefiniteError
        If ``Qs`` is not symmetric positive definite.
    """
    As = as_square(As, "As")
    Qs = as_square(Qs, "Qs")
    if As.shape != Qs.shape:
        raise ValueError(f"shape mismatch {As.shape} vs {Qs.shape}")
    if As.size == 0:
        return np.zeros((0, 0))
    rho = spectral_radius(As)
    if rho >= 1.0 - STABLE_MARGIN:
        raise NotStableError(f"spectral radius {rho} is not < 1")
    require_positive_definite(Qs, "Qs")

    P = symmetrize(Qs)
    Ak = As.copy()
    for _ in range(max_doublings):
        incr = symmetrize(Ak @ P @ Ak.T)
        P = P + incr
        Ak = Ak @ Ak
        if max_norm(incr) <= tol * max_norm(P):
            break
    # a couple of plain sweeps polish the last ulps
    for _ in range(2):
        P = symmetrize(As @ P @ As.T + Qs)
    resid = max_norm(P - As @ P @ As.T - Qs)
    if resid > 1e-10 * max_norm(P):
        raise NotStableError(f"Lyapunov iteration did not converge (residual {resid:.2e})")
    return P


def riccati_bound_step(Pbar, L, H, Q):
    """One step of ``L P L' - L P H' (H P H' + Q)^{-1} H P L'``."""
    require_positive_definite(Q, "Q")
    S = symmetrize(H @ Pbar @ H.T + Q)
    LPH = L @ Pbar @ H.T
    try:
        cf = sla.cho_factor(S)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("innovation covariance H P H' + Q is singular") from None
    out = L @ Pbar @ L.T - LPH @ sla.cho_solve(cf, LPH.T)
    return symmetrize(out)


def _invertible(L):
    s = max_norm(L)
    if s == 0.0:
        return False
    return abs(np.linalg.det(L / s)) > 1e-12


def lyapunov_info_step(Ybar, L, H, Qinv):
    """One step of ``L'^{-1} Y L^{-1} + L'^{-1} H' Qinv H L^{-1}``."""
    if not _invertible(L):
        raise SingularMatrixError("weighting matrix L is numerically singular")
    Linv = inv(L, "L^{-1}")
    G = H @ Linv
    out = Linv.T @ Ybar @ Linv + G.T @ Qinv @ G
    return symmetrize(out)


def inversion_lemma(B, U, C, V):
    """Woodbury identity: ``(B + U C V)^{-1}`` via the inverses of ``B`` and ``C``."""
    Binv = inv(B, "B^{-1}")
    Cinv = inv(C, "C^{-1}")
    inner = Cinv + V @ Binv @ U
    return Binv - Binv @ U @ solve(inner, V @ Binv, "C^{-1} + V B^{-1} U")


def block_inverse_parts(B, p):
    """Lower blocks ``(C22, C21)`` of ``C = B^{-1}`` split after row/column ``p``.

    ``C22 = (B22 - B21 B11^{-1} B12)^{-1}`` and ``C21 = -C22 B21 B11^{-1}``.
    """
    B11, B12 = B[:p, :p], B[:p, p:]
    B21, B22 = B[p:, :p], B[p:, p:]
    B11inv = inv(B11, "B11^{-1}")
    C22 = inv(B22 - B21 @ B11inv @ B12, "Schur complement")
    C21 = -C22 @ B21 @ B11inv
    return C22, C21


def matrix_power(M, m):
    """``M**m`` by repeated squaring, refusing to produce entries above 1e150."""
    M = as_square(M, "M")
    if m < 0:
        raise ValueError("exponent must be non-negative")
    result = np.eye(M.shape[0])
    base = M.copy()
    while m:
        if m & 1:
            result = result @ base
            if not np.all(np.isfinite(result)) or max_norm(result) > POWER_LIMIT:
                raise MatrixOverflowError("matrix power exceeds 1e150")
        m >>= 1
        if m:
            base = base @ base
            if not np.all(np.isfinite(base)) or max_norm(base) > POWER_LIMIT:
                raise MatrixOverflowError("matrix power exceeds 1e150")
    return result
