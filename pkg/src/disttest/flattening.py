"""Split (flattened) distributions and sub-bin assignment of samples.

A :class:`SplitMap` subdivides base element ``i`` into ``a_i = 1 + f_i`` sub-bins,
where ``f_i`` counts occurrences of ``i`` in the flattening multiset. Flattened
elements are ``(base, sub)`` pairs with ``0 <= sub < a_i``. For the array fast
path used by the testers, a pair is encoded as the integer ``offset[base] + sub``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .prob_core import Categorical, JointDistribution


class FlattenedElement(NamedTuple):
    base: int
    sub: int


@dataclass(frozen=True, eq=False)
class SplitMap:
    subdivisions: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.subdivisions, dtype=np.int64)
        if a.ndim != 1 or a.size == 0 or np.any(a < 1):
            raise ValueError("subdivisions must be a nonempty sequence of positive integers")
        a.setflags(write=False)
        object.__setattr__(self, "subdivisions", a)
        offsets = np.concatenate(([0], np.cumsum(a)[:-1]))
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)

    @property
    def n(self) -> int:
        return self.subdivisions.shape[0]

    @property
    def size(self) -> int:
        """Number of elements of the split domain."""
        return int(self.subdivisions.sum())

    @classmethod
    def identity(cls, n: int) -> "SplitMap":
        return cls(np.ones(n, dtype=np.int64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SplitMap):
            return NotImplemented
        return np.array_equal(self.subdivisions, other.subdivisions)

    def __repr__(self) -> str:
        return f"SplitMap(n={self.n}, size={self.size})"


def build_split_map(sample_multiset, n: int) -> SplitMap:
    """Subdivide each element ``i`` of ``[n]`` into ``1 + (multiplicity of i)`` sub-bins."""
    s = np.asarray(sample_multiset, dtype=np.int64).ravel()
    if s.size and (s.min() < 0 or s.max() >= n):
        raise ValueError(f"flattening multiset contains indices outside [0, {n})")
    return SplitMap(1 + np.bincount(s, minlength=n))


def split_sample(i: int, split: SplitMap, rng: np.random.Generator) -> FlattenedElement:
    """Route base element ``i`` to a uniformly random sub-bin."""
    return FlattenedElement(int(i), int(rng.integers(split.subdivisions[i])))


def split_codes(base: np.ndarray, split: SplitMap, rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`split_sample`: integer codes in ``[0, split.size)``.

    The code of ``(i, j)`` is ``offset_i + j``; one rng draw per sample.
    """
    base = np.asarray(base, dtype=np.int64)
    sub = rng.integers(0, split.subdivisions[base])
    return split.offsets[base] + sub


def decode(code: int, split: SplitMap) -> FlattenedElement:
    i = int(np.searchsorted(split.offsets, code, side="right")) - 1
    return FlattenedElement(i, int(code - split.offsets[i]))


def split_distribution(p: Categorical, split: SplitMap) -> Categorical:
    """The explicit split distribution: mass ``p_i / a_i`` on every sub-bin of ``i``.

    Sub-bins are laid out in code order (see :func:`split_codes`).
    """
    if p.n != split.n:
        raise ValueError(f"domain sizes differ: {p.n} vs {split.n}")
    return Categorical(np.repeat(p.probs / split.subdivisions, split.subdivisions))


def split_weights(probs: np.ndarray, split: SplitMap) -> np.ndarray:
    """Unvalidated counterpart of :func:`split_distribution` for raw vectors."""
    probs = np.asarray(probs, dtype=float)
    return np.repeat(probs / split.subdivisions, split.subdivisions)


def row_col_split_sample(
    s: tuple[int, int], fx: SplitMap, fy: SplitMap, rng: np.random.Generator
) -> tuple[FlattenedElement, FlattenedElement]:
    """Split both coordinates of a pair with independent sub-bin draws."""
    x, y = s
    return split_sample(x, fx, rng), split_sample(y, fy, rng)


def row_col_split_distribution(
    p: JointDistribution, fx: SplitMap | None = None, fy: SplitMap | None = None
) -> JointDistribution:
    """Explicit row- and/or column-split of a joint distribution."""
    grid = p.probs
    if fx is not None:
        if fx.n != p.n:
            raise ValueError("row split map does not match n")
        grid = np.repeat(grid / fx.subdivisions[:, None], fx.subdivisions, axis=0)
    if fy is not None:
        if fy.n != p.m:
            raise ValueError("column split map does not match m")
        grid = np.repeat(grid / fy.subdivisions[None, :], fy.subdivisions, axis=1)
    return JointDistribution(grid / grid.sum())
