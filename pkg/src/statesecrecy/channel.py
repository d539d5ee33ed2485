"""Packet-dropping channel with a user output, an eavesdropper output and ACKs.

Outcomes are i.i.d. across steps.  Sampling uses numpy's PCG64 generator
seeded from ``SeedSequence([seed, CHANNEL_STREAM])``; process noise draws from
the disjoint stream ``NOISE_STREAM`` so the two are independent by
construction.

Trace text format, one step per line after an optional ``#`` header::

    # k gamma_u gamma_e gamma_a
    0 1 0 1
    1 1 1 1
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BadProbabilitiesError

CHANNEL_STREAM = 0
NOISE_STREAM = 1


def stream_rng(seed, stream):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), stream])))


@dataclass(frozen=True)
class ChannelModel:
    """Joint per-step distribution of ``(gamma_u, gamma_e)`` plus ACK success."""

    p11: float = 0.7
    p10: float = 0.1
    p01: float = 0.1
    p00: float = 0.1
    p_ack: float = 1.0
    force_critical_at_zero: bool = False

    def __post_init__(self):
        probs = (self.p11, self.p10, self.p01, self.p00, self.p_ack)
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise BadProbabilitiesError(f"probabilities must lie in [0, 1]: {probs}")
        total = self.p11 + self.p10 + self.p01 + self.p00
        if abs(total - 1.0) > 1e-12:
            raise BadProbabilitiesError(f"joint outcome probabilities sum to {total}, not 1")

    @property
    def reliable_ack(self):
        return self.p_ack == 1.0


@dataclass(frozen=True, eq=False)
class ChannelTrace:
    gamma_u: np.ndarray
    gamma_e: np.ndarray
    gamma_a: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("gamma_u", "gamma_e", "gamma_a"):
            arr = np.asarray(getattr(self, name), dtype=np.int8)
            if arr.ndim != 1 or not np.all((arr == 0) | (arr == 1)):
                raise ValueError(f"{name} must be a 1-D 0/1 sequence")
            object.__setattr__(self, name, arr)
        if not (len(self.gamma_u) == len(self.gamma_e) == len(self.gamma_a)):
            raise ValueError("outcome sequences differ in length")

    def __len__(self):
        return len(self.gamma_u)

    def __eq__(self, other):
        if not isinstance(other, ChannelTrace):
            return NotImplemented
        return (
            np.array_equal(self.gamma_u, other.gamma_u)
            and np.array_equal(self.gamma_e, other.gamma_e)
            and np.array_equal(self.gamma_a, other.gamma_a)
        )

    @property
    def horizon(self):
        return len(self) - 1

    @property
    def effective_user(self):
        return effective_user_outcome(self.gamma_u, self.gamma_a)

    @classmethod
    def from_outcomes(cls, outcomes, gamma_a=None):
        """Build a trace from ``(gamma_u, gamma_e)`` pairs; ACKs default to reliable."""
        arr = np.asarray(outcomes, dtype=np.int8).reshape(-1, 2)
        ga = np.ones(len(arr), dtype=np.int8) if gamma_a is None else gamma_a
        return cls(arr[:, 0], arr[:, 1], ga)

    def to_text(self):
        lines = ["# k gamma_u gamma_e gamma_a"]
        for k, (u, e, a) in enumerate(zip(self.gamma_u, self.gamma_e, self.gamma_a)):
            lines.append(f"{k} {u} {e} {a}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"bad trace line {raw!r}")
            rows.append([int(p) for p in parts])
        if not rows:
            raise ValueError("empty trace")
        arr = np.array(rows)
        if not np.array_equal(arr[:, 0], np.arange(len(arr))):
            raise ValueError("trace steps must be 0, 1, 2, ... in order")
        return cls(arr[:, 1], arr[:, 2], arr[:, 3])


def sample_trace(model, horizon, seed):
    """Draw outcomes for steps ``0 .. horizon``."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    rng = stream_rng(seed, CHANNEL_STREAM)
    size = horizon + 1
    joint = rng.choice(4, size=size, p=[model.p11, model.p10, model.p01, model.p00])
    gamma_u = np.isin(joint, (0, 1)).astype(np.int8)
    gamma_e = np.isin(joint, (0, 2)).astype(np.int8)
    gamma_a = (rng.random(size) < model.p_ack).astype(np.int8)
    if model.force_critical_at_zero:
        gamma_u[0], gamma_e[0], gamma_a[0] = 1, 0, 1
    return ChannelTrace(gamma_u, gamma_e, gamma_a, seed=int(seed))


def effective_user_outcome(gamma_u, gamma_a):
    """A reception only moves the sensor's reference if its ACK also arrives."""
    return np.asarray(gamma_u) * np.asarray(gamma_a)


def critical_times(trace):
    eff = trace.effective_user
    return np.flatnonzero((eff == 1) & (trace.gamma_e == 0))


def first_critical_time(trace):
    """First step where the reference advances while the eavesdropper misses."""
    times = critical_times(trace)
    return int(times[0]) if times.size else None
