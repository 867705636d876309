"""Randomised lower-bound ensembles, pseudo-distributions and the closeness-to-independence reduction."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .prob_core import Categorical, JointDistribution, poissonized_histogram

PSEUDO_MASS_RANGE = (1 / 100, 100.0)


class Case(str, enum.Enum):
    COMPLETENESS = "completeness"
    SOUNDNESS = "soundness"


class Variant(str, enum.Enum):
    FIRST_TERM = "first_term"
    SECOND_TERM = "second_term"


class PseudoDistributionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PseudoDistribution:
    """A nonnegative measure on ``[n]`` or ``[n] x [m]``.

    ``resamples`` counts how many generated draws were rejected for falling
    outside the allowed total mass before this one was kept.
    """

    masses: np.ndarray
    resamples: int = 0

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float)
        if masses.ndim not in (1, 2) or masses.size == 0:
            raise ValueError("masses must be a nonempty 1-d or 2-d array")
        if not np.all(np.isfinite(masses)) or np.any(masses < 0):
            raise ValueError("masses must be finite and nonnegative")
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.masses.shape

    @property
    def total(self) -> float:
        return math.fsum(self.masses.ravel())

    def normalized(self) -> Categorical | JointDistribution:
        total = self.total
        if total <= 0:
            raise PseudoDistributionError("cannot normalise a zero measure")
        cls = JointDistribution if self.masses.ndim == 2 else Categorical
        return cls(self.masses / total)

    def to_dict(self) -> dict:
        return {"shape": list(self.shape), "masses": self.masses.tolist(), "resamples": self.resamples}


def is_pseudo_distribution(pd) -> bool:
    """True iff all masses are nonnegative and the total lies in ``[1/100, 100]``."""
    masses = np.asarray(getattr(pd, "masses", getattr(pd, "probs", pd)), dtype=float)
    if masses.size == 0 or np.any(masses < 0) or not np.all(np.isfinite(masses)):
        return False
    total = math.fsum(masses.ravel())
    lo, hi = PSEUDO_MASS_RANGE
    return lo <= total <= hi


@dataclass(frozen=True)
class EnsembleSpec:
    case: Case
    variant: Variant
    n: int
    m: int
    k: float
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.n < 1 or self.m < 1 or self.k <= 0:
            raise ValueError("n, m and k must be positive")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.variant is Variant.FIRST_TERM and self.k > self.n:
            raise ValueError("the heavy-row probability k/n must not exceed 1")


def _keep_valid(draw, strict: bool, max_resamples: int) -> PseudoDistribution:
    for resamples in range(max_resamples + 1):
        masses = draw()
        if is_pseudo_distribution(masses):
            return PseudoDistribution(masses, resamples=resamples)
        if strict:
            raise PseudoDistributionError(
                f"generated measure has total mass {masses.sum():.4g}, outside [1/100, 100]"
            )
    raise PseudoDistributionError(f"no valid pseudo-distribution after {max_resamples} resamples")


def _independence_masses(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    n, m, k, eps = spec.n, spec.m, spec.k, spec.eps
    if spec.case is Case.COMPLETENESS:
        light = np.full((n, m), 1 / (n * m))
    else:
        signs = np.where(rng.random((n, m)) < 0.5, 1.0, -1.0)
        light = (1 + eps * signs) / (n * m)
    if spec.variant is Variant.SECOND_TERM:
        # Conditioning on every row being light: rows are independent, so this
        # is exactly the light branch everywhere.
        return light
    heavy_rows = rng.random(n) < k / n
    return np.where(heavy_rows[:, None], 1 / (k * m), light)


def gen_independence_hard(
    spec: EnsembleSpec, rng: np.random.Generator, *, strict: bool = False,
    max_resamples: int = 1000,
) -> PseudoDistribution:
    """Draw one measure on ``[n] x [m]`` from the independence lower-bound ensemble.

    Rows are heavy (``1/(km)`` everywhere) with probability ``k/n`` for the
    first-term variant; light cells are ``1/(nm)`` under completeness and
    ``(1 +- eps)/(nm)`` by independent fair coins under soundness.
    """
    return _keep_valid(lambda: _independence_masses(spec, rng), strict, max_resamples)


def gen_unequal_hard(
    n: int, k: float, K: float, eps: float, case: Case, rng: np.random.Generator,
    *, strict: bool = False, max_resamples: int = 1000,
) -> tuple[PseudoDistribution, PseudoDistribution]:
    """Draw ``(p, q)`` from the unequal-sample closeness ensemble on ``[n]``."""
    case = Case(case)
    if not (1 <= k <= K <= n):
        raise ValueError("need 1 <= k <= K <= n")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")

    def draw():
        heavy = rng.random(n) < K / n
        p = np.where(heavy, 1 / K, eps / n)
        if case is Case.COMPLETENESS:
            q = p.copy()
        else:
            q_light = np.where(rng.random(n) < 0.5, 0.0, 2 * eps / n)
            q = np.where(heavy, 1 / K, q_light)
        return p, q

    for resamples in range(max_resamples + 1):
        p, q = draw()
        if is_pseudo_distribution(p) and is_pseudo_distribution(q):
            return PseudoDistribution(p, resamples), PseudoDistribution(q, resamples)
        if strict:
            raise PseudoDistributionError("generated pair is not a pair of pseudo-distributions")
    raise PseudoDistributionError(f"no valid pair after {max_resamples} resamples")


class ReductionSampler:
    """Samples ``(x, c)`` from ``1/2 {0} x p + 1/2 {1} x q`` using one source draw per output.

    The second coordinate is the label ``c`` (0 for ``p``, 1 for ``q``).
    """

    def __init__(self, sampler_p, sampler_q):
        self.sampler_p = sampler_p
        self.sampler_q = sampler_q

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        labels = (rng.random(size) >= 0.5).astype(np.int64)
        xs = np.empty(size, dtype=np.int64)
        n_p = int(np.count_nonzero(labels == 0))
        xs[labels == 0] = _call(self.sampler_p, n_p, rng)
        xs[labels == 1] = _call(self.sampler_q, size - n_p, rng)
        return np.column_stack((xs, labels))


def _call(sampler, size, rng):
    return np.asarray(getattr(sampler, "sample", sampler)(size, rng), dtype=np.int64)


def reduce_closeness_to_independence(sampler_p, sampler_q) -> ReductionSampler:
    """Wrap two samplers on ``[n]`` into a sampler on ``[n] x {0, 1}``.

    The result is a product distribution iff ``p == q``.
    """
    return ReductionSampler(sampler_p, sampler_q)


def reduction_distribution(p: Categorical, q: Categorical) -> JointDistribution:
    """The explicit joint law realised by :func:`reduce_closeness_to_independence`."""
    if p.n != q.n:
        raise ValueError("p and q must share a domain")
    return JointDistribution(np.column_stack((p.probs, q.probs)) / 2)


def sample_pseudo_poissonized(pd: PseudoDistribution, k: float, rng: np.random.Generator) -> np.ndarray:
    """Per-element counts, independently ``Poi(k * mass)``."""
    if not is_pseudo_distribution(pd):
        raise PseudoDistributionError("not a pseudo-distribution")
    return poissonized_histogram(pd, k, rng)
