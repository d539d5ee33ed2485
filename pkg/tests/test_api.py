import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from statesecrecy import EavesdropperEstimator, StateSecrecyEncoder
from statesecrecy.channel import ChannelTrace
from statesecrecy.harness import example_scenario, run_trial

from conftest import EXAMPLE_A, EXAMPLE_Q


def make(cls=StateSecrecyEncoder, **kw):
    return cls(A=EXAMPLE_A, Q=EXAMPLE_Q, Sigma0=EXAMPLE_Q, **kw)


def test_params_and_clone():
    enc = make(variant="diagonal_baseline")
    assert enc.get_params()["variant"] == "diagonal_baseline"
    twin = clone(enc)
    assert twin.get_params()["variant"] == "diagonal_baseline" and twin is not enc
    enc.set_params(variant="full")
    assert enc.variant == "full"


def test_not_fitted():
    with pytest.raises(NotFittedError):
        make().transform(np.zeros((3, 2)))
    with pytest.raises(NotFittedError):
        make(EavesdropperEstimator).predict(np.zeros((3, 2)), [1, 1, 1])


def test_fitted_attributes():
    enc = make().fit()
    assert np.allclose(enc.L_, [[1.2, 0.582857], [0, 1.428571]], atol=1e-5)
    assert np.allclose(np.sort(enc.eig_L_.real), [1.2, 1 / 0.7])
    assert enc.Y_inf_[1, 1] == pytest.approx(0.51)
    assert enc.n_features_in_ == 2


def test_round_trip():
    r = run_trial(example_scenario(horizon=60), 0)
    enc = make().fit()
    Z = enc.transform(r.states, gamma_u=r.gamma_u)
    X = enc.inverse_transform(Z, gamma_u=r.gamma_u)
    got = r.gamma_u == 1
    assert np.all(np.isnan(X[~got]))
    err = np.linalg.norm(X[got] - r.states[got], axis=1) / np.linalg.norm(r.states[got], axis=1)
    assert err.max() <= 1e-10


def test_round_trip_lossy_acks():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 2))
    gu = (rng.random(40) < 0.8).astype(int)
    ga = (rng.random(40) < 0.6).astype(int)
    enc = make().fit()
    out = enc.inverse_transform(enc.transform(X, gu, ga), gu, ga)
    assert np.allclose(out[gu == 1], X[gu == 1], atol=1e-9)


def test_fit_transform_defaults():
    X = np.random.default_rng(2).standard_normal((5, 2))
    enc = make()
    Z = enc.fit_transform(X)
    assert np.allclose(enc.inverse_transform(Z), X)


def test_shape_validation():
    enc = make().fit()
    with pytest.raises(ValueError):
        enc.transform(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        enc.transform(np.zeros((4, 2)), gamma_u=[1, 0])
    with pytest.raises(ValueError):
        enc.transform(np.full((4, 2), np.nan))


def test_eavesdropper_matches_runner():
    sc = example_scenario(horizon=50)
    r = run_trial(sc, 3)
    enc = make().fit()
    Z = enc.transform(r.states, r.gamma_u)
    Z[r.gamma_e == 0] = np.nan
    eav = make(EavesdropperEstimator).fit()
    means = eav.predict(Z, r.gamma_e, r.gamma_u)
    assert np.allclose(eav.covariances_, r.eav_cov, rtol=1e-12, atol=1e-12)
    assert np.allclose((means - r.states) ** 2, r.eav_sqerr, rtol=1e-8, atol=1e-10)


def test_invalid_system_on_fit():
    with pytest.raises(ValueError):
        StateSecrecyEncoder(A=[[1.0]], Q=[[1.0]], Sigma0=[[1.0]]).fit()
