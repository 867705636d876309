"""The four-histogram statistic ``Z``, flag splitting and collision counts.

Two layers are provided. The mapping layer works on arbitrary hashable domain
elements and is what the definitions read like. The ``*_codes`` layer works on
nonnegative integer codes in numpy arrays and is what the testers run; both
compute identical integers.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, NamedTuple

import numpy as np


class Counts4(NamedTuple):
    p0: int
    p1: int
    q0: int
    q1: int


class FourWayHistogram(dict):
    """Mapping ``element -> Counts4`` over elements with at least one occurrence."""

    def __init__(self, data=()):
        super().__init__()
        for key, value in dict(data).items():
            self[key] = value

    @classmethod
    def from_samples(cls, p0: Iterable, p1: Iterable, q0: Iterable, q1: Iterable) -> "FourWayHistogram":
        counters = [Counter(s) for s in (p0, p1, q0, q1)]
        keys = set().union(*counters)
        return cls({u: Counts4(*(c[u] for c in counters)) for u in keys})

    def __setitem__(self, key, value):
        value = Counts4(*value)
        if sum(value) == 0:
            self.pop(key, None)
        else:
            super().__setitem__(key, value)


def z_statistic(h: Mapping[Hashable, tuple[int, int, int, int]]) -> int:
    """``sum_u |p0-q0| + |p1-q1| - |p0-p1| - |q0-q1|`` with counts ordered ``(p0, p1, q0, q1)``."""
    z = 0
    for p0, p1, q0, q1 in h.values():
        z += abs(p0 - q0) + abs(p1 - q1) - abs(p0 - p1) - abs(q0 - q1)
    return z


def flag_split(samples, rng: np.random.Generator):
    """Flag each sample independently with probability 1/2.

    Returns ``(flagged, unflagged)`` preserving input order within each part.
    """
    samples = list(samples)
    flags = rng.random(len(samples)) < 0.5
    flagged = [s for s, f in zip(samples, flags) if f]
    unflagged = [s for s, f in zip(samples, flags) if not f]
    return flagged, unflagged


@dataclass(frozen=True)
class CollisionCounts:
    N: int
    N_p: int
    N_q: int


def collision_counts(sp: Iterable[Hashable], sq: Iterable[Hashable]) -> CollisionCounts:
    """Non-singleton counts for a p-multiset and a q-multiset.

    ``N_p`` counts p-samples sharing their value with another p-sample, ``N_q``
    counts q-samples sharing their value with any other sample, and ``N`` counts
    all samples whose value occurs at least twice overall.
    """
    sp, sq = list(sp), list(sq)
    cp, cq = Counter(sp), Counter(sq)
    n_p = sum(c for c in cp.values() if c >= 2)
    n_q = sum(c for u, c in cq.items() if c + cp[u] >= 2)
    n_all = sum(c + cq[u] for u, c in cp.items() if c + cq[u] >= 2)
    n_all += sum(c for u, c in cq.items() if u not in cp and c >= 2)
    return CollisionCounts(N=n_all, N_p=n_p, N_q=n_q)


def collision_counts_codes(sp: np.ndarray, sq: np.ndarray) -> CollisionCounts:
    """:func:`collision_counts` for integer-coded samples."""
    sp = np.asarray(sp, dtype=np.int64)
    sq = np.asarray(sq, dtype=np.int64)
    values, inverse, counts = np.unique(
        np.concatenate((sp, sq)), return_inverse=True, return_counts=True
    )
    p_counts = np.bincount(inverse[: sp.size], minlength=values.size)
    total = counts[inverse]
    n_all = int(np.count_nonzero(total >= 2))
    n_q = int(np.count_nonzero(total[sp.size:] >= 2))
    n_p = int(np.count_nonzero(p_counts[inverse[: sp.size]] >= 2))
    return CollisionCounts(N=n_all, N_p=n_p, N_q=n_q)


def z_statistic_codes(
    p_codes: np.ndarray, p_flags: np.ndarray, q_codes: np.ndarray, q_flags: np.ndarray
) -> int:
    """``Z`` for integer-coded samples; flagged samples form the ``0`` histograms."""
    p_codes = np.asarray(p_codes, dtype=np.int64)
    q_codes = np.asarray(q_codes, dtype=np.int64)
    p_flags = np.asarray(p_flags, dtype=bool)
    q_flags = np.asarray(q_flags, dtype=bool)
    values, inverse = np.unique(np.concatenate((p_codes, q_codes)), return_inverse=True)
    size = values.size
    ip, iq = inverse[: p_codes.size], inverse[p_codes.size:]
    p0 = np.bincount(ip[p_flags], minlength=size)
    p1 = np.bincount(ip[~p_flags], minlength=size)
    q0 = np.bincount(iq[q_flags], minlength=size)
    q1 = np.bincount(iq[~q_flags], minlength=size)
    return z_from_counts(p0, p1, q0, q1)


def z_from_counts(p0, p1, q0, q1) -> int:
    """``Z`` from four aligned dense count vectors."""
    p0, p1, q0, q1 = (np.asarray(c, dtype=np.int64) for c in (p0, p1, q0, q1))
    terms = np.abs(p0 - q0) + np.abs(p1 - q1) - np.abs(p0 - p1) - np.abs(q0 - q1)
    return int(terms.sum())
