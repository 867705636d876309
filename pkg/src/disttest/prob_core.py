"""Probability primitives: distributions, distances, seeded samplers and sample sizes.

Domain elements are 0-indexed throughout the library. Text file formats are
1-indexed and converted at the I/O boundary (see :mod:`disttest.io`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

MASS_TOL = 1e-9

# Sample sizes above this are treated as overflow of the requested budget.
MAX_SAMPLE_SIZE = 10**9


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Return an independent, reproducible random stream.

    Streams are keyed by ``(seed, stream)`` through :class:`numpy.random.SeedSequence`
    and drive a counter-based Philox generator, so distinct stream ids give
    statistically independent sequences and identical keys replay exactly.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream id must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _as_probs(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d probability array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty domain")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("probabilities must be finite and nonnegative")
    total = math.fsum(arr.ravel())
    if abs(total - 1.0) > MASS_TOL:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Categorical:
    """A distribution over ``{0, ..., n-1}``."""

    probs: np.ndarray

    def __init__(self, probs):
        object.__setattr__(self, "probs", _as_probs(probs, 1))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "Categorical":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, i: int) -> "Categorical":
        probs = np.zeros(n)
        probs[i] = 1.0
        return cls(probs)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` i.i.d. elements."""
        return _draw_indices(self.probs, size, rng)

    def __repr__(self) -> str:
        return f"Categorical(n={self.n})"


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """A distribution over ``[n] x [m]`` stored as an ``(n, m)`` grid."""

    probs: np.ndarray

    def __init__(self, probs):
        object.__setattr__(self, "probs", _as_probs(probs, 2))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def m(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def product(cls, px: Categorical, py: Categorical) -> "JointDistribution":
        return cls(np.outer(px.probs, py.probs))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` i.i.d. pairs as an integer array of shape ``(size, 2)``."""
        flat = _draw_indices(self.probs.ravel(), size, rng)
        return np.stack(np.divmod(flat, self.m), axis=1)

    def __repr__(self) -> str:
        return f"JointDistribution(n={self.n}, m={self.m})"


Distribution = Union[Categorical, JointDistribution]


def _draw_indices(probs: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    # Inverse-CDF lookup: one uniform per draw.
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    # Zero-mass trailing bins can never be returned.
    last = int(np.flatnonzero(probs)[-1])
    return np.minimum(idx, last)


def _probs_of(p) -> np.ndarray:
    return p.probs if hasattr(p, "probs") else np.asarray(p, dtype=float)


def tv_distance(p: Distribution, q: Distribution) -> float:
    """Total variation distance ``(1/2) * sum |p_i - q_i|``."""
    a, b = _probs_of(p), _probs_of(q)
    if a.shape != b.shape:
        raise ValueError(f"domain shapes differ: {a.shape} vs {b.shape}")
    return 0.5 * math.fsum(np.abs(a - b).ravel())


def kl_divergence(p: Categorical, q: Categorical) -> float:
    """KL divergence ``D(p || q)`` in nats; ``inf`` when ``p`` is not dominated by ``q``."""
    a, b = _probs_of(p), _probs_of(q)
    if a.shape != b.shape:
        raise ValueError(f"domain shapes differ: {a.shape} vs {b.shape}")
    support = a > 0
    if np.any(b[support] == 0):
        return math.inf
    terms = a[support] * np.log(a[support] / b[support])
    return max(math.fsum(terms), 0.0)


def marginals(p: JointDistribution) -> tuple[Categorical, Categorical]:
    """Row and column marginals of a joint distribution."""
    rows = p.probs.sum(axis=1)
    cols = p.probs.sum(axis=0)
    return Categorical(rows / rows.sum()), Categorical(cols / cols.sum())


def product_of_marginals(p: JointDistribution) -> JointDistribution:
    px, py = marginals(p)
    return JointDistribution.product(px, py)


def draw_categorical(p: Distribution, rng: np.random.Generator):
    """Draw a single domain element (an int, or an ``(x, y)`` tuple for joints)."""
    s = p.sample(1, rng)[0]
    if isinstance(p, JointDistribution):
        return int(s[0]), int(s[1])
    return int(s)


def draw_poisson(lam: float, rng: np.random.Generator) -> int:
    """Draw from ``Poi(lam)``."""
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"Poisson rate must be finite and nonnegative, got {lam!r}")
    return int(rng.poisson(lam))


def draw_multinomial(total: int, weights: Categorical, rng: np.random.Generator) -> np.ndarray:
    if total < 0:
        raise ValueError("total must be nonnegative")
    return rng.multinomial(int(total), _probs_of(weights))


def poissonized_histogram(p, k: float, rng: np.random.Generator) -> np.ndarray:
    """Counts with bin ``i`` independently ``Poi(k * p_i)``.

    ``p`` may be any nonnegative measure (a distribution or a pseudo-distribution),
    given as an object with ``probs``/``masses`` or a plain array.
    """
    if not math.isfinite(k) or k < 0:
        raise ValueError("k must be finite and nonnegative")
    masses = getattr(p, "masses", None)
    rates = np.asarray(masses if masses is not None else _probs_of(p), dtype=float)
    if np.any(rates < 0):
        raise ValueError("measure must be nonnegative")
    return rng.poisson(k * rates)


def _check_eps_delta(eps: float, delta: float, C: float) -> float:
    if not (0 < eps and math.isfinite(eps)):
        raise ValueError(f"eps must be positive, got {eps!r}")
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if not (0 < C and math.isfinite(C)):
        raise ValueError(f"C must be positive, got {C!r}")
    return math.log(1.0 / delta)


def _finish(value: float) -> int:
    k = math.ceil(value)
    if k > MAX_SAMPLE_SIZE:
        raise ValueError(f"sample size {k} exceeds the supported maximum {MAX_SAMPLE_SIZE}")
    return max(k, 1)


def sample_size_closeness(n: int, eps: float, delta: float, C: float) -> int:
    """Per-histogram sample budget ``k`` for equal-sample closeness testing."""
    if n < 1:
        raise ValueError("n must be at least 1")
    L = _check_eps_delta(eps, delta, C)
    value = C * (
        n ** (2 / 3) * L ** (1 / 3) / eps ** (4 / 3)
        + (math.sqrt(n * L) + L) / eps**2
    )
    return _finish(value)


def _independence_budget(n: int, m: int, eps: float, delta: float, C: float) -> int:
    L = _check_eps_delta(eps, delta, C)
    value = C * (
        n ** (2 / 3) * m ** (1 / 3) * L ** (1 / 3) / eps ** (4 / 3)
        + (math.sqrt(n * m * L) + L) / eps**2
    )
    return _finish(value)


def sample_size_independence(n: int, m: int, eps: float, delta: float, C: float) -> int:
    """Sample budget ``k`` for independence testing on ``[n] x [m]`` with ``n >= m``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if n < m:
        raise ValueError(f"independence budget requires n >= m (got n={n}, m={m}); swap axes")
    return _independence_budget(n, m, eps, delta, C)


def sample_size_collections(n: int, m: int, eps: float, delta: float, C: float) -> int:
    """Budget for testing a collection of ``m`` distributions on ``[n]``.

    Same expression as the independence budget, without the ``n >= m`` ordering.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    return _independence_budget(n, m, eps, delta, C)


def sample_size_unequal(n: int, K: int, eps: float, delta: float, C: float) -> int:
    """Small-side budget ``k`` when ``K`` extra samples are available from one side."""
    if n < 1 or K < 1:
        raise ValueError("n and K must be at least 1")
    L = _check_eps_delta(eps, delta, C)
    value = C * (n * math.sqrt(L / min(n, K)) + L) / eps**2
    return _finish(value)
