"""Instance families used by the simulation harness and calibration.

Each family builds an :class:`Instance` whose ground truth and distance are
computed with the oracle when the instance is built, never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .hard_instances import Case, EnsembleSpec, Variant, gen_independence_hard, gen_unequal_hard
from .oracle import Truth, collection_distance_lower_bound, distance_to_marginal_product
from .prob_core import Categorical, JointDistribution, tv_distance


@dataclass
class Instance:
    truth: Truth
    distance: float
    p: Any = None
    q: Any = None
    joint: JointDistribution | None = None
    info: dict = field(default_factory=dict)


def paired_perturbation(n: int, eps: float) -> tuple[Categorical, Categorical]:
    """Uniform ``p`` and ``q`` moving mass ``eps / floor(n/2)`` within matched pairs.

    ``d_TV(p, q) = eps`` exactly whenever ``eps / floor(n/2) <= 1/n``.
    """
    pairs = n // 2
    if pairs == 0:
        raise ValueError("paired perturbation needs n >= 2")
    shift = eps / pairs
    if shift > 1 / n + 1e-15:
        raise ValueError(f"eps={eps} too large for a paired perturbation of uniform({n})")
    q = np.full(n, 1 / n)
    q[0:2 * pairs:2] += shift
    q[1:2 * pairs:2] -= shift
    q = np.clip(q, 0, None)
    return Categorical.uniform(n), Categorical(q / q.sum())


def disjoint_pair(n: int) -> tuple[Categorical, Categorical]:
    if n < 2:
        raise ValueError("disjoint supports need n >= 2")
    half = n // 2
    p = np.zeros(n)
    q = np.zeros(n)
    p[:half] = 1 / half
    q[half:] = 1 / (n - half)
    return Categorical(p), Categorical(q)


def diagonal_mixture(n: int, m: int, lam: float) -> JointDistribution:
    """``(1-lam) * uniform(n x m) + lam * D`` with ``D`` uniform on ``{(x, x mod m)}``."""
    if not 0 <= lam <= 1:
        raise ValueError("mixture weight must lie in [0, 1]")
    diag = np.zeros((n, m))
    diag[np.arange(n), np.arange(n) % m] = 1 / n
    return JointDistribution((1 - lam) / (n * m) + lam * diag)


def diagonal_weight_for(n: int, m: int, eps: float) -> float:
    """Mixture weight giving marginal-product distance exactly ``eps``.

    The deviation from the marginal product is linear in the weight, so the
    distance is ``lam * d(1)``.
    """
    full = distance_to_marginal_product(diagonal_mixture(n, m, 1.0))
    lam = eps / full
    if lam > 1:
        raise ValueError(f"diagonal family cannot reach distance {eps} on [{n}] x [{m}]")
    return lam


def shifted_collection(n: int, m: int, window: int | None = None, shift: int | None = None) -> list[Categorical]:
    """``m`` uniform distributions on cyclic windows of ``[n]``, window ``i`` offset by ``i * shift``."""
    window = window or max(1, n // 2)
    shift = shift if shift is not None else max(1, n // m)
    dists = []
    for i in range(m):
        probs = np.zeros(n)
        probs[(i * shift + np.arange(window)) % n] = 1 / window
        dists.append(Categorical(probs))
    return dists


def collection_joint(dists) -> JointDistribution:
    """Joint law of ``(x, i)`` with ``i`` uniform and ``x ~ dists[i]``."""
    return JointDistribution(np.column_stack([d.probs for d in dists]) / len(dists))


def _random_simplex(size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(size))


# ---------------------------------------------------------------------------
# Family registry
# ---------------------------------------------------------------------------

FamilyBuilder = Callable[..., Instance]
FAMILIES: dict[str, dict[str, FamilyBuilder]] = {t: {} for t in ("closeness", "independence", "collections", "unequal")}


def family(tester: str, name: str):
    def register(fn):
        FAMILIES[tester][name] = fn
        return fn
    return register


def _closeness_like(p, q, eps, **info) -> Instance:
    d = tv_distance(p, q)
    if d == 0:
        truth = Truth.SHOULD_YES
    elif d >= eps - 1e-12:
        truth = Truth.SHOULD_NO
    else:
        raise ValueError(f"instance distance {d:.4f} is neither 0 nor >= eps={eps}")
    return Instance(truth, d, p=p, q=q, info=info)


@family("closeness", "uniform")
@family("unequal", "uniform")
def _uniform_pair(*, n, eps, rng, **_):
    u = Categorical.uniform(n)
    return _closeness_like(u, u, eps)


@family("closeness", "paired")
@family("unequal", "paired")
def _paired(*, n, eps, rng, **_):
    p, q = paired_perturbation(n, eps)
    return _closeness_like(p, q, eps)


@family("closeness", "disjoint")
@family("unequal", "disjoint")
def _disjoint(*, n, eps, rng, **_):
    p, q = disjoint_pair(n)
    return _closeness_like(p, q, eps)


@family("unequal", "hard_completeness")
@family("unequal", "hard_soundness")
def _unequal_hard(*, n, eps, rng, big_k, k, family_name, hard_eps=None, **_):
    K = min(big_k, n)
    if family_name.endswith("completeness"):
        pd_p, pd_q = gen_unequal_hard(n, min(k, K), K, hard_eps or 0.5, Case.COMPLETENESS, rng)
        p, q = pd_p.normalized(), pd_q.normalized()
        return Instance(Truth.SHOULD_YES, tv_distance(p, q), p=p, q=q, info={"ensemble_case": "completeness"})
    # Normalised soundness draws sit near hard_eps (1 - K/n) / (2 (1 + hard_eps)) from each other.
    hard_eps = hard_eps or min(0.99, 4 * eps)
    for _attempt in range(100):
        pd_p, pd_q = gen_unequal_hard(n, min(k, K), K, hard_eps, Case.SOUNDNESS, rng)
        p, q = pd_p.normalized(), pd_q.normalized()
        d = tv_distance(p, q)
        if d >= eps:
            return Instance(Truth.SHOULD_NO, d, p=p, q=q, info={"ensemble_case": "soundness", "hard_eps": hard_eps})
    raise ValueError(f"hard unequal ensemble with eps={hard_eps} does not reach distance {eps}")


@family("independence", "product_uniform")
def _product_uniform(*, n, m, eps, rng, **_):
    joint = JointDistribution.product(Categorical.uniform(n), Categorical.uniform(m))
    return Instance(Truth.SHOULD_YES, 0.0, joint=joint)


@family("independence", "random_product")
def _random_product(*, n, m, eps, rng, **_):
    joint = JointDistribution.product(Categorical(_random_simplex(n, rng)), Categorical(_random_simplex(m, rng)))
    return Instance(Truth.SHOULD_YES, distance_to_marginal_product(joint), joint=joint)


@family("independence", "diagonal")
def _diagonal(*, n, m, eps, rng, lam=None, **_):
    lam = diagonal_weight_for(n, m, eps) if lam is None else lam
    joint = diagonal_mixture(n, m, lam)
    d = distance_to_marginal_product(joint)
    if d < eps - 1e-9:
        raise ValueError(f"diagonal mixture with weight {lam} has distance {d:.4f} < eps")
    return Instance(Truth.SHOULD_NO, d, joint=joint, info={"lam": lam})


@family("independence", "hard_completeness")
@family("independence", "hard_soundness")
def _independence_hard(*, n, m, eps, rng, family_name, hard_eps=None, **_):
    if family_name.endswith("completeness"):
        spec = EnsembleSpec(Case.COMPLETENESS, Variant.SECOND_TERM, n, m, 1.0, hard_eps or 0.5)
        joint = gen_independence_hard(spec, rng).normalized()
        return Instance(Truth.SHOULD_YES, distance_to_marginal_product(joint), joint=joint)
    # Soundness draws land near hard_eps / 2 from their marginal product.
    hard_eps = hard_eps or min(0.99, 2.5 * eps)
    spec = EnsembleSpec(Case.SOUNDNESS, Variant.SECOND_TERM, n, m, 1.0, hard_eps)
    for _attempt in range(100):
        joint = gen_independence_hard(spec, rng).normalized()
        d = distance_to_marginal_product(joint)
        if d >= eps:
            return Instance(Truth.SHOULD_NO, d, joint=joint, info={"hard_eps": hard_eps})
    raise ValueError(f"hard soundness ensemble with eps={hard_eps} does not reach distance {eps}")


@family("collections", "identical")
def _identical(*, n, m, eps, rng, **_):
    dists = [Categorical.uniform(n)] * m
    return Instance(Truth.SHOULD_YES, 0.0, joint=collection_joint(dists))


@family("collections", "shifted")
def _shifted(*, n, m, eps, rng, window=None, shift=None, **_):
    dists = shifted_collection(n, m, window, shift)
    d = collection_distance_lower_bound(dists)
    if d < eps - 1e-12:
        raise ValueError(f"shifted collection certified distance {d:.4f} < eps={eps}")
    return Instance(Truth.SHOULD_NO, d, joint=collection_joint(dists), info={"certified_distance": d})


def build_instance(tester: str, name: str, rng: np.random.Generator, **params) -> Instance:
    try:
        builder = FAMILIES[tester][name]
    except KeyError:
        known = sorted(FAMILIES.get(tester, {}))
        raise ValueError(f"unknown family {name!r} for tester {tester!r}; known: {known}") from None
    return builder(rng=rng, family_name=name, **params)


# Families used by calibration: (completeness, soundness).
CALIBRATION_FAMILIES = {
    "closeness": ("uniform", "paired"),
    "independence": ("random_product", "diagonal"),
    "collections": ("identical", "shifted"),
    "unequal": ("uniform", "paired"),
}


# ---------------------------------------------------------------------------
# Fixed adversarial multisets for abort-rate checks
# ---------------------------------------------------------------------------


def adversarial_pair_multisets(total: int, n: int, m: int) -> dict[str, np.ndarray]:
    """Five fixed multisets of ``total`` pairs over ``[n] x [m]``."""
    idx = np.arange(total)
    return {
        "all_identical": np.zeros((total, 2), dtype=np.int64),
        "uniform_spread": np.column_stack((idx % n, (idx // n) % m)),
        "half_half": np.column_stack((np.where(idx < total // 2, 0, n - 1), np.where(idx < total // 2, 0, m - 1))),
        "heavy_row": np.column_stack((np.zeros(total, dtype=np.int64), idx % m)),
        "heavy_column": np.column_stack((idx % n, np.zeros(total, dtype=np.int64))),
    }


def adversarial_pool_pairs(size_q: int, size_p: int, n: int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Five fixed ``(pool_q, pool_p)`` pairs over ``[n]``."""
    def spread(size):
        return np.arange(size, dtype=np.int64) % n

    def zeros(size):
        return np.zeros(size, dtype=np.int64)

    def half(size):
        return np.where(np.arange(size) < size // 2, 0, n - 1).astype(np.int64)

    return {
        "all_identical": (zeros(size_q), zeros(size_p)),
        "uniform_spread": (spread(size_q), spread(size_p)),
        "half_half": (half(size_q), half(size_p)),
        "q_point_p_spread": (zeros(size_q), spread(size_p)),
        "q_spread_p_point": (spread(size_q), np.full(size_p, n - 1, dtype=np.int64)),
    }

