"""Empirical perfect-secrecy verdicts over a batch of trial records."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoCriticalTrialsWarning
from ..estimators import BoundTrajectory, divergence_rate_check, growth_factor

USER_TOL = 1e-10
RATE_TOL = 0.02
RATIO = 100.0
RATIO_STEPS = 15
GAP_TOL = 1e-3
GAP_STEPS = 60
RATE_STEPS = 20


@dataclass
class Condition:
    name: str
    checked: int = 0
    failed: int = 0
    details: list = field(default_factory=list)

    @property
    def passed(self):
        return self.failed == 0

    def record(self, ok, detail=None):
        self.checked += 1
        if not ok:
            self.failed += 1
            if detail and len(self.details) < 10:
                self.details.append(detail)


@dataclass
class SecrecyReport:
    conditions: list
    critical_trials: int
    total_trials: int
    warnings: list = field(default_factory=list)

    @property
    def passed(self):
        return self.critical_trials > 0 and all(c.passed for c in self.conditions)

    def condition(self, name):
        return next(c for c in self.conditions if c.name == name)

    def to_dict(self):
        return {
            "passed": self.passed,
            "critical_trials": self.critical_trials,
            "total_trials": self.total_trials,
            "warnings": list(self.warnings),
            "conditions": {
                c.name: {"passed": c.passed, "checked": c.checked, "failed": c.failed,
                         "details": list(c.details)}
                for c in self.conditions
            },
        }

    def to_text(self):
        lines = [f"critical trials: {self.critical_trials}/{self.total_trials}"]
        for c in self.conditions:
            verdict = "PASS" if c.passed else "FAIL"
            lines.append(f"{verdict} {c.name}: {c.checked - c.failed}/{c.checked} checks passed")
            lines.extend(f"    {d}" for d in c.details)
        lines.extend(f"warning: {w}" for w in self.warnings)
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def verify_secrecy(records, scenario):
    """Check the three secrecy conditions on the trials that saw a critical event.

    * ``user_optimal``: decoded state equals the true state at every reception.
    * ``unstable_divergence``: per unstable state, the fitted growth factor
      of the eavesdropper variance matches ``|lambda|**2`` within 2% where the
      eavesdropper intercepted every packet after ``k0`` (and on the attached
      covariance bound otherwise), and the final variance is at least 100x
      its value at ``k0`` once 15 steps have elapsed.
    * ``stable_convergence``: per stable state, the final eavesdropper
      variance is within 1e-3 of the open-loop one once 60 steps have elapsed.
    """
    if not records:
        raise ValueError("no trial records to verify")
    sys = scenario.system
    critical = [r for r in records if r.k0 is not None]
    user = Condition("user_optimal")
    unstable = Condition("unstable_divergence")
    stable = Condition("stable_convergence")
    report = SecrecyReport([user, unstable, stable], len(critical), len(records))
    if not critical:
        msg = "no trial contains a critical event; secrecy cannot be established"
        warnings.warn(msg, NoCriticalTrialsWarning, stacklevel=2)
        report.warnings.append(msg)
        return report

    for r in critical:
        T, k0 = r.horizon, r.k0
        errs = r.user_rel_err[~np.isnan(r.user_rel_err)]
        worst = float(errs.max()) if errs.size else 0.0
        user.record(worst <= USER_TOL, f"trial {r.trial}: user relative error {worst:.3e}")

        P = r.eav_mmse
        for i in range(sys.n_u):
            target = sys.eig_mags[i] ** 2
            if T - k0 >= RATIO_STEPS:
                ratio = P[T, i] / P[k0, i]
                unstable.record(ratio >= RATIO,
                                f"trial {r.trial} state {i}: growth ratio {ratio:.3g} < {RATIO:g}")
            if T - k0 < RATE_STEPS:
                continue
            if r.intercepts_all_after_k0():
                seg = P[k0:, i]
                half = len(seg) // 2
                g = growth_factor(seg[half:], np.arange(half, len(seg)))
                unstable.record(abs(g / target - 1.0) <= RATE_TOL,
                                f"trial {r.trial} state {i}: growth factor {g:.4f} vs {target:.4f}")
        if r.has_bound and T - k0 >= RATE_STEPS and sys.n_u:
            traj = BoundTrajectory(k0, r.bound_cov[k0:], r.Ybar)
            for rep in divergence_rate_check(traj, sys, rel_tol=RATE_TOL):
                unstable.record(rep.passed,
                                f"trial {r.trial} state {rep.state}: bound growth {rep.growth:.4f} "
                                f"vs {rep.target_growth:.4f}, floor ok={rep.bound_ok}")

        if T - k0 >= GAP_STEPS:
            for i in range(sys.n_u, sys.n):
                gap = abs(P[T, i] - r.open_loop_mmse[T, i])
                stable.record(gap <= GAP_TOL, f"trial {r.trial} state {i}: final gap {gap:.3e}")
    return report
