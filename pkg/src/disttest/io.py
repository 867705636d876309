"""File formats: distribution JSON, sample files, instance dumps.

Sample files hold one sample per line, 1-indexed: a single integer for ``[n]``
or ``x,y`` for ``[n] x [m]``. Blank lines are ignored. In memory everything is
0-indexed.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .prob_core import Categorical, JointDistribution

FILE_MASS_TOL = 1e-6


class InputError(ValueError):
    """Malformed input file; the message names the file and, when known, the line."""


def _check_mass(probs: np.ndarray, where: str) -> np.ndarray:
    if not np.all(np.isfinite(probs)):
        raise InputError(f"{where}: probabilities must be finite")
    if np.any(probs < 0):
        raise InputError(f"{where}: negative probability")
    total = math.fsum(probs.ravel())
    if abs(total - 1) > FILE_MASS_TOL:
        raise InputError(f"{where}: total mass {total!r} is not within {FILE_MASS_TOL:g} of 1")
    return probs / total


def parse_distribution(data: dict, where: str = "<distribution>") -> Categorical | JointDistribution:
    """Build a distribution from ``{"n", "probs"}`` or ``{"n", "m", "probs"}`` (row-major)."""
    if not isinstance(data, dict) or "n" not in data or "probs" not in data:
        raise InputError(f"{where}: expected an object with keys 'n' and 'probs'")
    try:
        probs = np.array(data["probs"], dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{where}: 'probs' is not a numeric array") from None
    n = data["n"]
    if "m" in data:
        m = data["m"]
        if probs.shape != (n, m):
            raise InputError(f"{where}: 'probs' has shape {probs.shape}, expected ({n}, {m})")
        return JointDistribution(_check_mass(probs, where))
    if probs.shape != (n,):
        raise InputError(f"{where}: 'probs' has shape {probs.shape}, expected ({n},)")
    return Categorical(_check_mass(probs, where))


def load_distribution(path) -> Categorical | JointDistribution:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return parse_distribution(data, str(path))


def distribution_to_dict(dist) -> dict:
    probs = np.asarray(dist.probs)
    out = {"n": int(probs.shape[0]), "probs": probs.tolist()}
    if probs.ndim == 2:
        out["m"] = int(probs.shape[1])
    return out


def read_samples(path, n: int, m: int | None = None) -> np.ndarray:
    """Read a 1-indexed sample file into a 0-indexed array.

    Returns shape ``(N,)`` when ``m`` is ``None`` and ``(N, 2)`` otherwise.
    """
    path = Path(path)
    out = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            fields = [f.strip() for f in text.split(",")]
            want = 1 if m is None else 2
            if len(fields) != want:
                raise InputError(f"{path}:{lineno}: expected {want} comma-separated integer(s), got {text!r}")
            try:
                values = [int(f) for f in fields]
            except ValueError:
                raise InputError(f"{path}:{lineno}: not an integer sample: {text!r}") from None
            bounds = (n,) if m is None else (n, m)
            for v, b in zip(values, bounds):
                if not 1 <= v <= b:
                    raise InputError(f"{path}:{lineno}: value {v} outside 1..{b}")
            out.append(values)
    arr = np.array(out, dtype=np.int64).reshape(-1, 1 if m is None else 2) - 1
    return arr[:, 0] if m is None else arr


def write_samples(path, samples) -> None:
    samples = np.asarray(samples, dtype=np.int64) + 1
    if samples.ndim == 1:
        lines = (str(v) for v in samples)
    else:
        lines = (f"{x},{y}" for x, y in samples)
    Path(path).write_text("".join(line + "\n" for line in lines))


class SamplesExhaustedError(RuntimeError):
    pass


class FileSampler:
    """Serves samples from a fixed array in a random order, without replacement."""

    def __init__(self, samples, source: str = "<samples>"):
        self.samples = np.asarray(samples)
        self.source = source
        self._order = None
        self._pos = 0

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self._order is None:
            self._order = rng.permutation(self.samples.shape[0])
        if self._pos + size > self._order.size:
            raise SamplesExhaustedError(
                f"{self.source}: needed {self._pos + size} samples but the file holds {self._order.size}"
            )
        idx = self._order[self._pos:self._pos + size]
        self._pos += size
        return self.samples[idx]


def instance_dump(pd, *, case: str, variant: str | None, seed: int, **meta) -> dict:
    out = {
        "shape": list(pd.shape),
        "variant": variant,
        "case": case,
        "seed": seed,
        "resamples": pd.resamples,
        "masses": pd.masses.tolist(),
    }
    out.update(meta)
    return out
