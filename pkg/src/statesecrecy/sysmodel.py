"""Linear system validation and open-loop prediction.

The system ``x[k+1] = A x[k] + w[k+1]`` must be supplied with ``A`` in real
Jordan block order: every unstable state precedes every stable one and the
stable-to-unstable coupling block is zero.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import matops
from .errors import (
    BadIndexError,
    NotBlockOrderedError,
    NumericalBreakdownError,
    SingularAError,
    UnitCircleEigenvalueError,
)

UNIT_CIRCLE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PartitionedSystem:
    A: np.ndarray
    Q: np.ndarray
    Sigma0: np.ndarray
    n_u: int
    n_s: int
    eig_mags: tuple

    @property
    def n(self):
        return self.n_u + self.n_s

    @property
    def A_u(self):
        return self.A[: self.n_u, : self.n_u]

    @property
    def A_s(self):
        return self.A[self.n_u :, self.n_u :]

    @property
    def Q_s(self):
        return self.Q[self.n_u :, self.n_u :]

    @property
    def Q_12(self):
        return self.Q[: self.n_u, self.n_u :]

    def __eq__(self, other):
        if not isinstance(other, PartitionedSystem):
            return NotImplemented
        return (
            self.n_u == other.n_u
            and self.n_s == other.n_s
            and self.eig_mags == other.eig_mags
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.Q, other.Q)
            and np.array_equal(self.Sigma0, other.Sigma0)
        )

    def __hash__(self):
        return hash((self.n_u, self.n_s, self.eig_mags, self.A.tobytes()))


@dataclass(frozen=True, eq=False)
class SteadyInfo:
    Y_inf: np.ndarray
    P_s_inf: np.ndarray


def _diagonal_blocks(A):
    """Split ``A`` into its irreducible block-upper-triangular diagonal blocks."""
    n = A.shape[0]
    cuts = [0]
    for p in range(1, n):
        if not np.any(A[p:, :p]):
            cuts.append(p)
    cuts.append(n)
    return list(zip(cuts[:-1], cuts[1:]))


def _state_magnitudes(A):
    mags = []
    for lo, hi in _diagonal_blocks(A):
        block_mags = np.sort(np.abs(np.linalg.eigvals(A[lo:hi, lo:hi])))[::-1]
        if hi - lo > 1 and (block_mags.max() > 1.0) != (block_mags.min() > 1.0):
            raise NotBlockOrderedError(
                f"states {lo}..{hi - 1} mix stable and unstable modes in one block"
            )
        mags.extend(float(m) for m in block_mags)
    return mags


def validate_system(A, Q, Sigma0):
    """Check the standing assumptions and return the partitioned system.

    Raises
    ------
    UnitCircleEigenvalueError, SingularAError, NotBlockOrderedError,
    NotPositiveDefiniteError
    """
    A = matops.as_square(A, "A")
    Q = matops.as_square(Q, "Q")
    Sigma0 = matops.as_square(Sigma0, "Sigma0")
    n = A.shape[0]
    if Q.shape != (n, n) or Sigma0.shape != (n, n):
        raise ValueError("A, Q and Sigma0 must share one square shape")
    matops.require_positive_definite(Q, "Q")
    matops.require_positive_definite(Sigma0, "Sigma0")

    mags = _state_magnitudes(A)
    for i, m in enumerate(mags):
        if abs(m - 1.0) <= UNIT_CIRCLE_TOL:
            raise UnitCircleEigenvalueError(f"state {i} has |lambda| = {m} on the unit circle")
        if m < UNIT_CIRCLE_TOL:
            raise SingularAError(f"state {i} has a zero eigenvalue; see perturb_singular")
    unstable = [m > 1.0 for m in mags]
    n_u = sum(unstable)
    if any(unstable[n_u:]) or not all(unstable[:n_u]):
        raise NotBlockOrderedError("unstable states must be listed before stable states")
    if np.any(A[n_u:, :n_u]):
        raise NotBlockOrderedError("stable-to-unstable block of A must be zero")
    return PartitionedSystem(
        A=A.copy(),
        Q=matops.symmetrize(Q),
        Sigma0=matops.symmetrize(Sigma0),
        n_u=n_u,
        n_s=n - n_u,
        eig_mags=tuple(mags),
    )


def perturb_singular(A, indices, delta):
    """Shift zero diagonal Jordan entries by ``delta``.

    ``indices`` are state numbers counted from 1, as in the CSV columns.
    """
    A = matops.as_square(A, "A").copy()
    if delta <= 0:
        raise ValueError("delta must be positive")
    for i in indices:
        if not 1 <= i <= A.shape[0] or A[i - 1, i - 1] != 0.0:
            raise BadIndexError(f"state {i} does not name a zero diagonal entry")
        A[i - 1, i - 1] += delta
    return A


def open_loop_cov_step(P, sys):
    return matops.symmetrize(sys.A @ P @ sys.A.T + sys.Q)


def steady_info_matrix(sys):
    """Limit of the open-loop information matrix.

    Zero everywhere except the stable block, which is the inverse of the
    stable-part Lyapunov solution.
    """
    n, nu = sys.n, sys.n_u
    P_s = matops.solve_discrete_lyapunov(sys.A_s, sys.Q_s)
    Y = np.zeros((n, n))
    if sys.n_s:
        Y[nu:, nu:] = matops.symmetrize(matops.inv(P_s, "P_s_inf^{-1}"))
    resid = matops.max_norm(open_loop_info_step(Y, sys) - Y)
    if resid > 1e-9 * max(1.0, matops.max_norm(Y)):
        raise NumericalBreakdownError(
            f"steady information matrix is not a fixed point (residual {resid:.2e})"
        )
    return SteadyInfo(Y_inf=Y, P_s_inf=P_s)


def _info_gain(Y, sys):
    F = matops.inv(sys.A.T, "A'^{-1}")
    W = matops.inv(sys.Q, "Q^{-1}")
    M = F @ Y @ F.T
    # K = M (M + W)^{-1}, via the transposed solve
    K = matops.solve((M + W).T, M.T, "F Y F' + W").T
    return F, W, K


def open_loop_info_step(Y, sys):
    """Information-form open-loop update with ``F = A'^{-1}`` and ``W = Q^{-1}``.

    Written as ``(F - K F) Y (F - K F)' + K W K'`` so that it runs directly on
    singular (positive semidefinite) information matrices.
    """
    F, W, K = _info_gain(Y, sys)
    Fc = F - K @ F
    return matops.symmetrize(Fc @ Y @ Fc.T + K @ W @ K.T)


def weighting_matrix(sys, steady):
    """``L = A + Q (A')^{-1} Y_inf``."""
    F = matops.inv(sys.A.T, "A'^{-1}")
    return sys.A + sys.Q @ F @ steady.Y_inf


class GainLimits(NamedTuple):
    gain_error: float
    closed_loop_error: float
    K: np.ndarray
    K_limit: np.ndarray
    F_closed: np.ndarray
    F_closed_limit: np.ndarray


def gain_limit_diagnostics(sys, horizon):
    """Distance of the open-loop information gains from their limits.

    Iterates the information recursion ``horizon`` times from ``Sigma0^{-1}``,
    then compares ``K`` with ``-(L')^{-1} H'`` and ``F - K F`` with ``(L')^{-1}``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    steady = steady_info_matrix(sys)
    L = weighting_matrix(sys, steady)
    H = sys.A - L
    LTinv = matops.inv(L.T, "L'^{-1}")

    Y = matops.symmetrize(matops.inv(sys.Sigma0, "Sigma0^{-1}"))
    for _ in range(horizon):
        Y = open_loop_info_step(Y, sys)
    F, _, K = _info_gain(Y, sys)
    Fc = F - K @ F
    K_lim = -LTinv @ H.T
    return GainLimits(
        gain_error=matops.max_norm(K - K_lim),
        closed_loop_error=matops.max_norm(Fc - LTinv),
        K=K,
        K_limit=K_lim,
        F_closed=Fc,
        F_closed_limit=LTinv,
    )
