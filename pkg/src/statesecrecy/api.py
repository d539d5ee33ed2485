"""scikit-learn style wrappers around the code design, codec and eavesdropper filter.

Trajectories are arrays of shape ``(T + 1, n)`` indexed by step.  Outcome
sequences ``gamma_u``, ``gamma_e`` and ``gamma_a`` have length ``T + 1``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import codec
from .estimators import eav_filter_step, initial_filter
from .sysmodel import validate_system


def _outcomes(gamma, T1, default=1):
    if gamma is None:
        return np.full(T1, default, dtype=np.int8)
    g = np.asarray(gamma).astype(np.int8).ravel()
    if g.shape[0] != T1:
        raise ValueError(f"outcome sequence has {g.shape[0]} entries, expected {T1}")
    if not np.all((g == 0) | (g == 1)):
        raise ValueError("outcomes must be 0 or 1")
    return g


class _SystemMixin:
    def _fit_system(self):
        self.system_ = validate_system(
            np.asarray(self.A, dtype=float),
            np.asarray(self.Q, dtype=float),
            np.asarray(self.Sigma0, dtype=float),
        )
        self.code_ = codec.design_code(self.system_, self.variant)
        self.n_features_in_ = self.system_.n
        return self

    def _check_traj(self, X, allow_nan=False):
        check_is_fitted(self, "code_")
        X = check_array(X, dtype=float, ensure_all_finite="allow-nan" if allow_nan else True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} state columns, got {X.shape[1]}")
        return X


class StateSecrecyEncoder(_SystemMixin, TransformerMixin, BaseEstimator):
    """Sensor-side encoder and user-side decoder for one system.

    ``fit`` designs the weighting matrix and exposes ``L_``, ``H_``,
    ``Y_inf_``, ``P_s_inf_`` and ``eig_L_``.  ``transform`` encodes a state
    trajectory given which packets reached the user; ``inverse_transform``
    decodes it, leaving NaN rows at steps the user missed.
    """

    def __init__(self, A=None, Q=None, Sigma0=None, variant="full"):
        self.A = A
        self.Q = Q
        self.Sigma0 = Sigma0
        self.variant = variant

    def fit(self, X=None, y=None):
        self._fit_system()
        self.L_ = self.code_.L
        self.H_ = self.code_.H
        self.Y_inf_ = self.code_.Y_inf
        self.P_s_inf_ = self.code_.P_s_inf
        self.eig_L_ = np.linalg.eigvals(self.code_.L)
        return self

    def transform(self, X, gamma_u=None, gamma_a=None):
        X = self._check_traj(X)
        gu = _outcomes(gamma_u, X.shape[0])
        ga = _outcomes(gamma_a, X.shape[0])
        enc = codec.EncoderState()
        Z = np.empty_like(X)
        for k, x in enumerate(X):
            Z[k] = codec.encode(enc, x, k, self.code_)
            enc = codec.process_ack(enc, k, Z[k], self.code_, gu[k], ga[k])
        return Z

    def inverse_transform(self, Z, gamma_u=None, gamma_a=None):
        Z = self._check_traj(Z, allow_nan=True)
        gu = _outcomes(gamma_u, Z.shape[0])
        ga = _outcomes(gamma_a, Z.shape[0])
        lossy = not np.all(ga == 1)
        dec = codec.DecoderState(lossy=lossy)
        # the reference time travels with each packet when ACKs may drop
        ref = -1
        out = np.full_like(Z, np.nan)
        for k in range(Z.shape[0]):
            x_hat, dec = codec.decode(dec, Z[k] if gu[k] else None, k, gu[k], self.code_,
                                      ref_time=ref if lossy else None)
            if x_hat is not None:
                out[k] = x_hat
            if gu[k] and ga[k]:
                ref = k
        return out


class EavesdropperEstimator(_SystemMixin, BaseEstimator):
    """Optimal eavesdropper estimate of the state from intercepted packets.

    ``predict`` returns the conditional means; the matching error covariances
    are stored in ``covariances_`` after each call.
    """

    def __init__(self, A=None, Q=None, Sigma0=None, variant="full"):
        self.A = A
        self.Q = Q
        self.Sigma0 = Sigma0
        self.variant = variant

    def fit(self, X=None, y=None):
        return self._fit_system()

    def predict(self, Z, gamma_e, gamma_u=None, gamma_a=None):
        """Filter packets ``Z`` (rows where ``gamma_e`` is 0 are ignored)."""
        Z = self._check_traj(Z, allow_nan=True)
        T1 = Z.shape[0]
        ge = _outcomes(gamma_e, T1)
        eff = _outcomes(gamma_u, T1) * _outcomes(gamma_a, T1)
        if np.any(~np.isfinite(Z[ge == 1])):
            raise ValueError("intercepted packets must be finite")
        f = initial_filter(self.system_)
        means = np.empty_like(Z)
        covs = np.empty((T1, Z.shape[1], Z.shape[1]))
        for k in range(T1):
            f = eav_filter_step(f, Z[k] if ge[k] else None, ge[k], eff[k], k, self.code_, self.system_)
            means[k] = f.x_hat
            covs[k] = f.P
        self.covariances_ = covs
        return means
