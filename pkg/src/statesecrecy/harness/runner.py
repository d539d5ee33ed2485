"""Monte-Carlo trial runner."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import codec
from ..channel import NOISE_STREAM, ChannelTrace, first_critical_time, sample_trace, stream_rng
from ..errors import NumericalError
from ..estimators import (
    bound_trajectory,
    eav_filter_step,
    initial_filter,
    user_cov_step,
)
from ..sysmodel import open_loop_cov_step

log = logging.getLogger(__name__)


def trial_seed(base_seed, trial_index):
    """64-bit seed for one trial, derived from the batch seed and trial id."""
    ss = np.random.SeedSequence([int(base_seed), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(eq=False)
class TrialRecord:
    """Per-step outcome of one simulated run (arrays indexed by step ``k``)."""

    trial: int
    seed: int
    k0: Optional[int]
    gamma_u: np.ndarray
    gamma_e: np.ndarray
    gamma_a: np.ndarray
    states: np.ndarray
    user_cov: np.ndarray
    eav_cov: np.ndarray
    open_loop_cov: np.ndarray
    bound_cov: np.ndarray
    user_sqerr: np.ndarray
    eav_sqerr: np.ndarray
    user_rel_err: np.ndarray
    user_est: np.ndarray
    eav_est: np.ndarray
    Ybar: Optional[np.ndarray] = None

    @property
    def horizon(self):
        return len(self.gamma_u) - 1

    @property
    def has_bound(self):
        return self.k0 is not None and self.Ybar is not None

    @staticmethod
    def _diag(cov):
        return np.diagonal(cov, axis1=1, axis2=2).copy()

    @property
    def user_mmse(self):
        return self._diag(self.user_cov)

    @property
    def eav_mmse(self):
        return self._diag(self.eav_cov)

    @property
    def open_loop_mmse(self):
        return self._diag(self.open_loop_cov)

    @property
    def bound_mmse(self):
        return self._diag(self.bound_cov)

    def intercepts_all_after_k0(self):
        return self.k0 is not None and bool(np.all(self.gamma_e[self.k0 + 1 :] == 1))


def run_trial(scenario, trial_index, trace=None):
    """Simulate one trial.

    When ``trace`` is given it replaces the sampled channel outcomes; the
    process noise still comes from the trial's own seed, so replays of one
    trace with different ``trial_index`` values give independent noise.
    """
    sys = scenario.system
    code = scenario.code
    n, T = sys.n, scenario.horizon
    seed = trial_seed(scenario.base_seed, trial_index)
    if trace is None:
        trace = sample_trace(scenario.channel_model, T, seed)
    elif len(trace) != T + 1:
        raise ValueError(f"trace has {len(trace)} steps, scenario needs {T + 1}")
    lossy = scenario.ack_mode == "lossy"
    if not lossy:
        trace = ChannelTrace(trace.gamma_u, trace.gamma_e, np.ones(T + 1), seed=trace.seed)

    noise = stream_rng(seed, NOISE_STREAM).standard_normal((T + 1, n))
    chol_S0 = np.linalg.cholesky(sys.Sigma0)
    chol_Q = np.linalg.cholesky(sys.Q)

    states = np.empty((T + 1, n))
    user_cov = np.empty((T + 1, n, n))
    eav_cov = np.empty((T + 1, n, n))
    ol_cov = np.empty((T + 1, n, n))
    user_sqerr = np.empty((T + 1, n))
    eav_sqerr = np.empty((T + 1, n))
    user_rel = np.full(T + 1, np.nan)
    user_est = np.empty((T + 1, n))
    eav_est = np.empty((T + 1, n))

    enc = codec.EncoderState()
    dec = codec.DecoderState(lossy=lossy)
    filt = initial_filter(sys)
    x = chol_S0 @ noise[0]
    x_user = np.zeros(n)
    P_u = P_op = None

    for k in range(T + 1):
        gu, ge = int(trace.gamma_u[k]), int(trace.gamma_e[k])
        ga = int(trace.gamma_a[k])
        if k > 0:
            x = sys.A @ x + chol_Q @ noise[k]
        states[k] = x
        try:
            z = codec.encode(enc, x, k, code)
            x_dec, dec = codec.decode(dec, z, k, gu, code, ref_time=enc.t)
            filt = eav_filter_step(filt, z if ge else None, ge, gu * ga, k, code, sys)
        except NumericalError as exc:
            raise type(exc)(f"trial {trial_index}, step {k}: {exc}") from None
        enc = codec.process_ack(enc, k, z, code, gu, ga)

        if k == 0:
            P_u = np.zeros((n, n)) if gu else sys.Sigma0.copy()
            P_op = sys.Sigma0.copy()
        else:
            P_u = user_cov_step(P_u, gu, sys)
            P_op = open_loop_cov_step(P_op, sys)
        if x_dec is not None:
            x_user = x_dec
            user_rel[k] = np.linalg.norm(x_dec - x) / max(np.linalg.norm(x), 1e-300)
        elif k > 0:
            x_user = sys.A @ x_user

        user_cov[k] = P_u
        ol_cov[k] = P_op
        eav_cov[k] = filt.P
        user_est[k] = x_user
        eav_est[k] = filt.x_hat
        user_sqerr[k] = (x_user - x) ** 2
        eav_sqerr[k] = (filt.x_hat - x) ** 2

    k0 = first_critical_time(trace)
    bound_cov = np.full((T + 1, n, n), np.nan)
    Ybar = None
    if k0 is not None and code.invertible:
        traj = bound_trajectory(eav_cov[k0], k0, T, code, sys)
        bound_cov[k0:] = traj.Pbar_seq
        Ybar = traj.Ybar_seq

    return TrialRecord(
        trial=trial_index,
        seed=seed,
        k0=k0,
        gamma_u=trace.gamma_u.copy(),
        gamma_e=trace.gamma_e.copy(),
        gamma_a=trace.gamma_a.copy(),
        states=states,
        user_cov=user_cov,
        eav_cov=eav_cov,
        open_loop_cov=ol_cov,
        bound_cov=bound_cov,
        user_sqerr=user_sqerr,
        eav_sqerr=eav_sqerr,
        user_rel_err=user_rel,
        user_est=user_est,
        eav_est=eav_est,
        Ybar=Ybar,
    )


def record_trace(record):
    return ChannelTrace(record.gamma_u, record.gamma_e, record.gamma_a, seed=record.seed)


@dataclass
class MonteCarloResult:
    summary: dict
    records: list
    failures: dict = field(default_factory=dict)


def _safe_trial(scenario, i):
    try:
        return i, run_trial(scenario, i), None
    except NumericalError as exc:
        return i, None, str(exc)


def run_monte_carlo(scenario, workers=1, verify=True):
    """Run every trial of ``scenario`` and merge results by trial id.

    Numerical failures are collected per trial instead of aborting the batch.
    ``workers > 1`` spreads trials over processes; the merged output does not
    depend on the worker count.
    """
    indices = range(scenario.trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_trial, [scenario] * len(indices), indices, chunksize=8))
    else:
        results = [_safe_trial(scenario, i) for i in indices]
    results.sort(key=lambda r: r[0])
    records = [rec for _, rec, _ in results if rec is not None]
    failures = {i: msg for i, _, msg in results if msg is not None}
    for i, msg in failures.items():
        log.warning("trial %d failed: %s", i, msg)

    k0s = np.array([r.k0 for r in records if r.k0 is not None], dtype=float)
    summary = {
        "trials": scenario.trials,
        "completed": len(records),
        "failed": len(failures),
        "critical_trials": int(k0s.size),
        "mean_first_critical": float(k0s.mean()) if k0s.size else None,
        "median_first_critical": float(np.median(k0s)) if k0s.size else None,
        "first_critical_counts": {int(k): int(c) for k, c in zip(*np.unique(k0s, return_counts=True))},
    }
    if verify and records:
        from .report import verify_secrecy

        report = verify_secrecy(records, scenario)
        summary["secrecy_passed"] = report.passed
        summary["secrecy"] = {c.name: c.passed for c in report.conditions}
    return MonteCarloResult(summary=summary, records=records, failures=failures)
