"""Scenario files.

A scenario is a JSON document (schema version 1)::

    {
      "version": 1,
      "system": {"A": [[1.2, 0], [0, 0.7]],
                 "Q": [[1, 0.8], [0.8, 1]],
                 "Sigma0": [[1, 0.8], [0.8, 1]],
                 "perturb": {"indices": [], "delta": 0.01}},
      "channel": {"p11": 0.7, "p10": 0.1, "p01": 0.1, "p00": 0.1},
      "ack": {"mode": "reliable"},
      "variant": "full",
      "horizon": 120,
      "trials": 500,
      "base_seed": 20180101,
      "force_critical_at_zero": false
    }

``ack`` may instead be ``{"mode": "lossy", "p_ack": 0.9}``.  ``perturb`` is
optional and shifts zero diagonal entries of ``A`` (state numbers from 1)
before validation.
"""

import dataclasses
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..channel import ChannelModel
from ..codec import VARIANTS, design_code
from ..errors import InvalidInputError, ScenarioError
from ..sysmodel import perturb_singular, validate_system

SCHEMA_VERSION = 1

EXAMPLE_A = ((1.2, 0.0), (0.0, 0.7))
EXAMPLE_Q = ((1.0, 0.8), (0.8, 1.0))


def _as_tuple(M):
    return tuple(tuple(float(v) for v in row) for row in M)


@dataclass(frozen=True)
class Scenario:
    A: tuple
    Q: tuple
    Sigma0: tuple
    p11: float = 0.7
    p10: float = 0.1
    p01: float = 0.1
    p00: float = 0.1
    variant: str = "full"
    horizon: int = 120
    trials: int = 500
    base_seed: int = 20180101
    ack_mode: str = "reliable"
    p_ack: float = 1.0
    force_critical_at_zero: bool = False
    perturb_indices: tuple = ()
    perturb_delta: float = 0.0

    def __post_init__(self):
        for name in ("A", "Q", "Sigma0"):
            object.__setattr__(self, name, _as_tuple(getattr(self, name)))
        object.__setattr__(self, "perturb_indices", tuple(int(i) for i in self.perturb_indices))
        if self.variant not in VARIANTS:
            raise ScenarioError(f"unknown variant {self.variant!r}")
        if self.horizon < 0 or self.trials < 1:
            raise ScenarioError("horizon must be >= 0 and trials >= 1")
        if self.ack_mode not in ("reliable", "lossy"):
            raise ScenarioError(f"ack mode must be 'reliable' or 'lossy', got {self.ack_mode!r}")
        if self.ack_mode == "reliable" and self.p_ack != 1.0:
            raise ScenarioError("reliable acknowledgments require p_ack = 1")
        # touch the derived objects so invalid scenarios fail on load
        self.system
        self.channel_model

    @cached_property
    def system(self):
        A = np.array(self.A)
        if self.perturb_indices:
            A = perturb_singular(A, self.perturb_indices, self.perturb_delta)
        return validate_system(A, np.array(self.Q), np.array(self.Sigma0))

    @cached_property
    def channel_model(self):
        return ChannelModel(
            p11=self.p11,
            p10=self.p10,
            p01=self.p01,
            p00=self.p00,
            p_ack=self.p_ack,
            force_critical_at_zero=self.force_critical_at_zero,
        )

    @cached_property
    def code(self):
        return design_code(self.system, self.variant)

    def with_overrides(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes) if changes else self

    def to_dict(self):
        system = {"A": [list(r) for r in self.A], "Q": [list(r) for r in self.Q],
                  "Sigma0": [list(r) for r in self.Sigma0]}
        if self.perturb_indices:
            system["perturb"] = {"indices": list(self.perturb_indices), "delta": self.perturb_delta}
        ack = {"mode": self.ack_mode}
        if self.ack_mode == "lossy":
            ack["p_ack"] = self.p_ack
        return {
            "version": SCHEMA_VERSION,
            "system": system,
            "channel": {"p11": self.p11, "p10": self.p10, "p01": self.p01, "p00": self.p00},
            "ack": ack,
            "variant": self.variant,
            "horizon": self.horizon,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "force_critical_at_zero": self.force_critical_at_zero,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            version = d.get("version")
            if version != SCHEMA_VERSION:
                raise ScenarioError(f"unsupported scenario version {version!r}")
            system = d["system"]
            channel = d.get("channel", {})
            ack = d.get("ack", {"mode": "reliable"})
            perturb = system.get("perturb", {})
            mode = ack.get("mode", "reliable")
            return cls(
                A=system["A"],
                Q=system["Q"],
                Sigma0=system["Sigma0"],
                p11=float(channel.get("p11", 0.7)),
                p10=float(channel.get("p10", 0.1)),
                p01=float(channel.get("p01", 0.1)),
                p00=float(channel.get("p00", 0.1)),
                variant=d.get("variant", "full"),
                horizon=int(d.get("horizon", 120)),
                trials=int(d.get("trials", 500)),
                base_seed=int(d.get("base_seed", 20180101)),
                ack_mode=mode,
                p_ack=float(ack.get("p_ack", 1.0)) if mode == "lossy" else 1.0,
                force_critical_at_zero=bool(d.get("force_critical_at_zero", False)),
                perturb_indices=perturb.get("indices", ()),
                perturb_delta=float(perturb.get("delta", 0.0)),
            )
        except InvalidInputError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from None


def load_scenario(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    return Scenario.from_dict(data)


def save_scenario(scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)
        fh.write("\n")


def example_scenario(**overrides):
    """The two-state example: one unstable and one stable mode, correlated noise."""
    return Scenario(A=EXAMPLE_A, Q=EXAMPLE_Q, Sigma0=EXAMPLE_Q).with_overrides(**overrides)
