"""State-Secrecy Code design and the sensor/user state machines.

The sensor transmits ``z[k] = x[k] - L**(k - t) x[t]`` where ``t`` is the last
acknowledged reception.  The user, holding ``x[t]``, inverts this exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from . import matops
from .errors import DesignMismatchError, DesyncError
from .sysmodel import steady_info_matrix, weighting_matrix

VARIANTS = ("full", "diagonal_baseline", "none")


@dataclass(frozen=True, eq=False)
class SecrecyCode:
    """Weighting matrix ``L`` with ``H = A - L``.

    ``variant`` is ``"full"`` for the State-Secrecy Code, ``"diagonal_baseline"``
    for the block-diagonal weighting without the cross term, and ``"none"`` for
    the uncoded passthrough ``L = 0``.
    """

    L: np.ndarray
    H: np.ndarray
    Y_inf: np.ndarray
    P_s_inf: np.ndarray
    variant: str
    n_u: int

    @property
    def invertible(self):
        return self.variant != "none"


def _block_form(sys, steady):
    # L = [[A_u, A_12 + Q_12 A_s'^{-1} P^{-1}], [0, A_s + Q_s A_s'^{-1} P^{-1}]]
    nu = sys.n_u
    L = sys.A.copy()
    if sys.n_s:
        Pinv = steady.Y_inf[nu:, nu:]
        G = matops.inv(sys.A_s.T, "A_s'^{-1}") @ Pinv
        L[:nu, nu:] += sys.Q_12 @ G
        L[nu:, nu:] += sys.Q_s @ G
    return L


def _stable_similarity(sys, steady):
    """``P A_s'^{-1} P^{-1}``, the purely stable weighting block."""
    P = steady.P_s_inf
    return P @ matops.inv(sys.A_s.T, "A_s'^{-1}") @ matops.inv(P, "P_s_inf^{-1}")


def design_code(sys, variant="full"):
    """Build the weighting matrix for ``sys``.

    For the full variant, ``L`` from ``A + Q A'^{-1} Y_inf`` is cross-checked
    against its block form, its spectrum against ``eig(A_u)`` and
    ``1/eig(A_s)``, and ``Y_inf`` against the information-bound fixed point.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    steady = steady_info_matrix(sys)
    nu, n = sys.n_u, sys.n

    if variant == "none":
        L = np.zeros((n, n))
        return SecrecyCode(L, sys.A - L, steady.Y_inf, steady.P_s_inf, variant, nu)

    if variant == "diagonal_baseline":
        L = np.zeros((n, n))
        L[:nu, :nu] = sys.A_u
        if sys.n_s:
            L[nu:, nu:] = _stable_similarity(sys, steady)
        return SecrecyCode(L, sys.A - L, steady.Y_inf, steady.P_s_inf, variant, nu)

    L = weighting_matrix(sys, steady)
    H = sys.A - L
    scale = max(1.0, matops.max_norm(L))
    gap = matops.max_norm(L - _block_form(sys, steady))
    if gap > 1e-10 * scale:
        raise DesignMismatchError(f"weighting matrix forms disagree by {gap:.2e}")

    expected = np.sort(np.concatenate([sys.eig_mags[:nu], 1.0 / np.asarray(sys.eig_mags[nu:])]))
    got = np.sort(np.abs(np.linalg.eigvals(L)))
    if np.max(np.abs(got - expected), initial=0.0) > 1e-6 * scale or np.min(got, initial=2.0) <= 1.0:
        raise DesignMismatchError(f"eig(L) magnitudes {got} differ from {expected}")

    Y = steady.Y_inf
    Qinv = matops.inv(sys.Q, "Q^{-1}")
    resid = matops.max_norm(matops.lyapunov_info_step(Y, L, H, Qinv) - Y)
    if resid > 1e-9 * max(1.0, matops.max_norm(Y)):
        raise DesignMismatchError(f"Y_inf is not a fixed point of the bound recursion ({resid:.2e})")
    return SecrecyCode(L, H, Y, steady.P_s_inf, variant, nu)


def fixed_point_residual(code, sys):
    Qinv = matops.inv(sys.Q, "Q^{-1}")
    Y = code.Y_inf
    return matops.max_norm(matops.lyapunov_info_step(Y, code.L, code.H, Qinv) - Y)


@dataclass(frozen=True, eq=False)
class EncoderState:
    """Sensor side: last acknowledged reception time and the state sent then."""

    t: int = -1
    x_ref: np.ndarray = None

    def reference(self, n):
        return np.zeros(n) if self.x_ref is None else self.x_ref


def encode(state, x_k, k, code):
    """``z = x_k - L**(k - t) x_ref``; the state itself is not advanced."""
    if k <= state.t:
        raise ValueError(f"step {k} is not after reference time {state.t}")
    x_k = np.asarray(x_k, dtype=float)
    M = matops.matrix_power(code.L, k - state.t)
    return x_k - M @ state.reference(x_k.shape[0])


def reconstruct(state, z_k, k, code):
    """The state the user recovers from ``z_k`` given reference ``state``."""
    z_k = np.asarray(z_k, dtype=float)
    return z_k + matops.matrix_power(code.L, k - state.t) @ state.reference(z_k.shape[0])


def process_ack(state, k, z_k, code, gamma_u, gamma_a=1):
    """Move the reference to step ``k`` iff the packet and its ACK both arrived.

    The stored reference is the user's reconstruction from ``z_k``, not the raw
    state: both ends then hold bit-identical references, and rounding in one
    decode cannot be amplified by ``L`` in later ones.
    """
    if k <= state.t:
        raise ValueError(f"step {k} is not after reference time {state.t}")
    if gamma_u and gamma_a:
        return EncoderState(t=k, x_ref=reconstruct(state, z_k, k, code))
    return state


@dataclass(frozen=True, eq=False)
class DecoderState:
    """User side.

    With reliable acknowledgments only the latest decoded state is needed.
    With lossy acknowledgments (``lossy=True``) the sensor may keep encoding
    against an older reception, so decoded states are retained in ``history``
    until a packet names a later reference time.
    """

    t: int = -1
    x_ref: np.ndarray = None
    lossy: bool = False
    history: dict = field(default_factory=dict)


def decode(state, z_k, k, gamma_u, code, ref_time=None):
    """Return ``(x_hat or None, new_state)``.

    ``ref_time`` is the reference time sent in-band by the sensor.  It is
    mandatory in lossy mode; in reliable mode it is optional and, when given,
    must agree with the decoder's own reference time.
    """
    if not gamma_u:
        return None, state
    z_k = np.asarray(z_k, dtype=float)
    n = z_k.shape[0]
    if state.lossy:
        if ref_time is None:
            raise DesyncError("lossy-ACK decoding needs the in-band reference time")
        if ref_time == -1:
            x_ref = np.zeros(n)
        elif ref_time in state.history:
            x_ref = state.history[ref_time]
        else:
            raise DesyncError(f"no decoded state stored for reference time {ref_time}")
        t = ref_time
    else:
        if ref_time is not None and ref_time != state.t:
            raise DesyncError(f"sensor reference {ref_time} != decoder reference {state.t}")
        t = state.t
        x_ref = np.zeros(n) if state.x_ref is None else state.x_ref
    if k <= t:
        raise DesyncError(f"step {k} is not after reference time {t}")
    x_hat = reconstruct(EncoderState(t, x_ref), z_k, k, code)
    if state.lossy:
        history = {s: x for s, x in state.history.items() if s >= t}
        history[k] = x_hat
        return x_hat, DecoderState(t=k, x_ref=x_hat, lossy=True, history=history)
    return x_hat, DecoderState(t=k, x_ref=x_hat)
