"""Tester constants and the shipped calibrated defaults."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path


@dataclass(frozen=True)
class TesterConfig:
    """Universal constants of the testers.

    ``C`` scales the sample budget, ``C_thresh`` scales both the collision
    rejection gate and the acceptance threshold on ``Z``, and ``c_abort`` scales
    the ``N_q`` abort gate of the basic testers.
    """

    C: float = 1.0
    C_thresh: float = 1.0
    c_abort: float = 10.0
    max_retries: int = 64
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        for name in ("C", "C_thresh", "c_abort"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if int(self.max_retries) != self.max_retries or self.max_retries < 1:
            raise ValueError("max_retries must be a positive integer")

    def with_(self, **changes) -> "TesterConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        if not d["notes"]:
            del d["notes"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TesterConfig":
        known = {"C", "C_thresh", "c_abort", "max_retries", "notes"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: d[k] for k in known & set(d)}
        if "max_retries" in kwargs:
            kwargs["max_retries"] = int(kwargs["max_retries"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "TesterConfig":
        data = json.loads(Path(path).read_text())
        # Calibration output wraps the config with its measurement log.
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        return cls.from_dict(data)


TESTERS = ("closeness", "independence", "collections", "unequal")

# Produced by demos/calibrate_constants.py (`disttest calibrate` on the grids in
# calibration/, delta=0.1, 300 reps, seed 7); calibration/<tester>.json holds each log.
DEFAULT_CONFIGS: dict[str, TesterConfig] = {
    "closeness": TesterConfig(
        C=1.0, C_thresh=1.8247030219685796, c_abort=10.0,
        notes="calibration/closeness.json",
    ),
    "independence": TesterConfig(
        C=0.7, C_thresh=1.4740535384525284, c_abort=2.0,
        notes="calibration/independence.json",
    ),
    "collections": TesterConfig(
        C=0.35, C_thresh=1.7782965052151938, c_abort=5.0,
        notes="calibration/collections.json",
    ),
    "unequal": TesterConfig(
        C=1.4, C_thresh=2.115506219768125, c_abort=5.0,
        notes="calibration/unequal.json",
    ),
}


def default_config(tester: str) -> TesterConfig:
    try:
        return DEFAULT_CONFIGS[tester]
    except KeyError:
        raise ValueError(f"unknown tester {tester!r}; expected one of {TESTERS}") from None
