"""User, eavesdropper and bound covariance recursions.

The eavesdropper filter is an exact Gaussian filter over the augmented state
``s[k] = (x[k], x[t])``, where ``t`` is the current reference time.  Each
intercepted packet is a noiseless linear observation ``z = [I, -L**(k-t)] s``,
and a user reception (known from the acknowledgments) re-stacks the pair so
that the current state becomes the new reference.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg as sla

from . import matops
from .errors import NumericalBreakdownError, TooShortError
from .sysmodel import open_loop_cov_step

MIN_TRAJECTORY = 20


def user_cov_step(P_u, gamma_u, sys):
    """Zero after a reception (the user decodes exactly), else open-loop growth."""
    if gamma_u:
        return np.zeros((sys.n, sys.n))
    return open_loop_cov_step(P_u, sys)


@dataclass(frozen=True, eq=False)
class GaussBelief:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True, eq=False)
class EavesdropperFilter:
    """Belief over ``(x[k], x[t])`` after processing step ``k``.

    The covariance is carried as a square-root factor ``sqrt_cov`` with
    ``cov = sqrt_cov @ sqrt_cov.T``.  Once an unstable state has been lost its
    variance grows like ``|lambda|**(2k)``; the factor only grows like
    ``|lambda|**k``, which keeps the innovation of each intercepted packet
    accurate for long horizons.

    ``k == -1`` is the prior for step 0: ``x[0] ~ N(0, Sigma0)`` with a
    deterministic zero reference.
    """

    mean: np.ndarray
    sqrt_cov: np.ndarray
    t: int
    k: int

    @property
    def n(self):
        return self.mean.shape[0] // 2

    @property
    def belief(self):
        return GaussBelief(self.mean, matops.symmetrize(self.sqrt_cov @ self.sqrt_cov.T))

    @property
    def x_hat(self):
        return self.mean[: self.n]

    @property
    def P(self):
        Sx = self.sqrt_cov[: self.n]
        return matops.symmetrize(Sx @ Sx.T)


def initial_filter(sys):
    n = sys.n
    S = np.zeros((2 * n, 2 * n))
    S[:n, :n] = np.linalg.cholesky(sys.Sigma0)
    return EavesdropperFilter(np.zeros(2 * n), S, t=-1, k=-1)


def _lower_factor(M):
    """Square lower-triangular ``F`` with ``F F' = M M'``."""
    r = M.shape[0]
    F = np.linalg.qr(M.T, mode="r").T
    if F.shape[1] < r:
        F = np.hstack([F, np.zeros((r, r - F.shape[1]))])
    return F


def _condition(mean, S, C, z):
    # QR of the pre-array [[C S], [S]] gives [[Se, 0], [G, S_post]],
    # with Se Se' the innovation covariance and G Se^{-1} the gain.
    m = C.shape[0]
    post = np.linalg.qr(np.vstack([C @ S, S]).T, mode="r").T
    Se, G = post[:m, :m], post[m:, :m]
    S_post = post[m:, m:]
    d = np.abs(np.diag(Se))
    if d.min() <= 1e-12 * max(1.0, d.max()):
        raise NumericalBreakdownError("innovation covariance is singular")
    innov = sla.solve_triangular(Se, z - C @ mean, lower=True)
    S_post = np.hstack([S_post, np.zeros((S.shape[0], S.shape[1] - S_post.shape[1]))])
    return mean + G @ innov, S_post


def eav_filter_step(f, h_k, gamma_e, gamma_u, k, code, sys):
    """Advance the eavesdropper to step ``k``.

    Parameters
    ----------
    h_k : array or None
        The intercepted packet; must be present exactly when ``gamma_e`` is 1.
    gamma_u : int
        Whether the sensor's reference moves to step ``k`` (the effective user
        outcome, i.e. reception times acknowledgment).
    """
    if k != f.k + 1:
        raise ValueError(f"filter is at step {f.k}, cannot process step {k}")
    if bool(gamma_e) != (h_k is not None):
        raise ValueError("h_k must be given exactly when gamma_e is 1")
    n = sys.n
    mean = f.mean.copy()
    S = f.sqrt_cov.copy()

    if k > 0:
        A = sys.A
        mean[:n] = A @ mean[:n]
        S[:n] = A @ S[:n]
        noise = np.zeros((2 * n, n))
        noise[:n] = np.linalg.cholesky(sys.Q)
        S = _lower_factor(np.hstack([S, noise]))

    if gamma_e:
        C = np.hstack([np.eye(n), -matops.matrix_power(code.L, k - f.t)])
        try:
            mean, S = _condition(mean, S, C, np.asarray(h_k, dtype=float))
        except NumericalBreakdownError as exc:
            raise NumericalBreakdownError(f"step {k}: {exc}") from None
    if not (np.all(np.isfinite(S)) and np.all(np.isfinite(mean))):
        raise NumericalBreakdownError(f"step {k}: non-finite filter state")

    t = f.t
    if gamma_u:
        mean[n:] = mean[:n]
        S[n:] = S[:n]
        t = k
    return EavesdropperFilter(mean, S, t=t, k=k)


@dataclass(frozen=True, eq=False)
class BoundTrajectory:
    """Covariance and information bounds for steps ``k0 .. k0 + len - 1``."""

    k0: int
    Pbar_seq: np.ndarray
    Ybar_seq: np.ndarray

    def __len__(self):
        return self.Pbar_seq.shape[0]

    @property
    def steps(self):
        return np.arange(self.k0, self.k0 + len(self))


def bound_trajectory(P_k0, k0, horizon, code, sys):
    """Iterate the covariance bound and its information form from ``P_k0``.

    Covers steps ``k0 .. horizon`` inclusive.
    """
    if horizon < k0:
        raise ValueError("horizon must be >= k0")
    P = matops.symmetrize(np.asarray(P_k0, dtype=float))
    matops.require_positive_definite(P, "P_k0")
    Y = matops.symmetrize(matops.inv(P, "P_k0^{-1}"))
    Qinv = matops.inv(sys.Q, "Q^{-1}")
    Ps, Ys = [P], [Y]
    for _ in range(horizon - k0):
        P = matops.riccati_bound_step(P, code.L, code.H, sys.Q)
        Y = matops.lyapunov_info_step(Y, code.L, code.H, Qinv)
        Ps.append(P)
        Ys.append(Y)
    return BoundTrajectory(k0, np.array(Ps), np.array(Ys))


def open_loop_sequence(sys, horizon):
    """Open-loop covariances for steps ``0 .. horizon``."""
    P = sys.Sigma0
    out = [P]
    for _ in range(horizon):
        P = open_loop_cov_step(P, sys)
        out.append(P)
    return np.array(out)


def growth_factor(values, steps):
    """Per-step growth factor fitted to ``log(values)`` by least squares."""
    slope = np.polyfit(np.asarray(steps, dtype=float), np.log(values), 1)[0]
    return float(np.exp(slope))


class DivergenceReport(NamedTuple):
    state: int
    rate: float
    target_rate: float
    growth: float
    target_growth: float
    rate_ok: bool
    bound_ok: bool

    @property
    def passed(self):
        return self.rate_ok and self.bound_ok


def divergence_rate_check(traj, sys, rel_tol=0.02):
    """Growth of the unstable diagonal entries of the covariance bound.

    The fitted growth factor over the second half of the trajectory is compared
    with ``|lambda_i|**2``; the explicit floor ``c |lambda_i|**(2 (k - k0))``
    with ``c = lambda_min(Pbar[k0])`` is checked at every step.
    """
    if len(traj) - 1 < MIN_TRAJECTORY:
        raise TooShortError(f"need at least {MIN_TRAJECTORY} steps past k0")
    c = float(np.linalg.eigvalsh(traj.Pbar_seq[0]).min())
    offsets = np.arange(len(traj))
    half = len(traj) // 2
    reports = []
    for i in range(sys.n_u):
        lam = sys.eig_mags[i]
        diag = traj.Pbar_seq[:, i, i]
        growth = growth_factor(diag[half:], offsets[half:])
        floor = c * lam ** (2.0 * offsets)
        reports.append(
            DivergenceReport(
                state=i,
                rate=float(np.log(growth)),
                target_rate=2.0 * float(np.log(lam)),
                growth=growth,
                target_growth=lam**2,
                rate_ok=abs(growth / lam**2 - 1.0) <= rel_tol,
                bound_ok=bool(np.all(diag >= floor * (1.0 - 1e-9))),
            )
        )
    return reports


class StableGapReport(NamedTuple):
    state: int
    liminf_gap: float
    final_gap: float
    liminf_ok: bool
    converged: Optional[bool]

    @property
    def passed(self):
        return self.liminf_ok and self.converged is not False


def stable_gap_check(traj, sys, converge_tol=1e-4, converge_len=100):
    """Gap ``[Pbar[k] - P_op[k]]_ii`` for the stable states.

    ``liminf_gap`` is the minimum over the last quarter of the trajectory.
    ``converged`` is only judged when the trajectory spans ``converge_len``
    steps past ``k0``; otherwise it is ``None``.
    """
    if len(traj) - 1 < MIN_TRAJECTORY:
        raise TooShortError(f"need at least {MIN_TRAJECTORY} steps past k0")
    horizon = traj.k0 + len(traj) - 1
    P_op = open_loop_sequence(sys, horizon)[traj.k0 :]
    quarter = len(traj) - max(1, len(traj) // 4)
    reports = []
    for i in range(sys.n_u, sys.n):
        gap = traj.Pbar_seq[:, i, i] - P_op[:, i, i]
        converged = None
        if len(traj) - 1 >= converge_len:
            converged = bool(abs(gap[-1]) <= converge_tol)
        reports.append(
            StableGapReport(
                state=i,
                liminf_gap=float(gap[quarter:].min()),
                final_gap=float(gap[-1]),
                liminf_ok=bool(gap[quarter:].min() >= -1e-6),
                converged=converged,
            )
        )
    return reports
