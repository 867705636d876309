"""Closeness, independence, collections and unequal-sample testers.

Every tester consumes a :class:`numpy.random.Generator` and is a deterministic
function of its inputs and generator state. Sample sources are objects with a
``sample(size, rng)`` method (or plain callables with that signature) returning
0-indexed elements: a 1-d integer array over ``[n]``, or an ``(size, 2)`` array
of pairs over ``[n] x [m]``.

The basic testers return a :class:`BasicOutcome` carrying the branch that
terminated the run and every intermediate quantity. ``BasicOutcome.decide``
re-evaluates the verdict for another acceptance constant without re-running,
which is what threshold calibration relies on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import TesterConfig
from .flattening import build_split_map, split_codes
from .prob_core import (
    sample_size_closeness,
    sample_size_collections,
    sample_size_independence,
    sample_size_unequal,
)
from .statistics import collision_counts_codes, z_from_counts, z_statistic_codes


class Verdict(enum.Enum):
    YES = "YES"
    NO = "NO"
    ABORT = "ABORT"

    def __str__(self) -> str:
        return self.value


class Branch(str, enum.Enum):
    ABORT_FLATTENING = "abort_flattening"
    ABORT_BUDGET = "abort_budget"
    ABORT_COLLISIONS = "abort_collisions"
    REJECT_COLLISIONS = "reject_collisions"
    REJECT_STATISTIC = "reject_statistic"
    ACCEPT = "accept"

    @property
    def is_abort(self) -> bool:
        return self.value.startswith("abort")


class RetryExhaustedError(RuntimeError):
    """Every basic-test attempt aborted."""

    def __init__(self, attempts: int, last: "BasicOutcome"):
        super().__init__(f"basic test aborted {attempts} times in a row (last: {last.branch.value})")
        self.attempts = attempts
        self.last = last


@dataclass(frozen=True)
class BasicOutcome:
    verdict: Verdict
    branch: Branch
    k: int
    log_term: float
    z_scale: float
    strict: bool = True
    collision_gate: bool = True
    N: Optional[int] = None
    N_p: Optional[int] = None
    N_q: Optional[int] = None
    Z: Optional[int] = None
    ell: Optional[int] = None
    ell_prime: Optional[int] = None
    fx_size: Optional[int] = None
    fy_size: Optional[int] = None

    def decide(self, c_thresh: float) -> Verdict:
        """Verdict this run would have produced with acceptance constant ``c_thresh``.

        Abort branches do not depend on ``c_thresh`` and stay ABORT.
        """
        if self.branch.is_abort:
            return Verdict.ABORT
        if self.collision_gate and self.N_p > 20 * self.N_q + c_thresh * self.log_term:
            return Verdict.NO
        threshold = c_thresh * self.z_scale
        accept = self.Z < threshold if self.strict else self.Z <= threshold
        return Verdict.YES if accept else Verdict.NO

    def diagnostics(self) -> dict:
        return {
            "branch": self.branch.value,
            "k": self.k,
            "N": self.N,
            "N_p": self.N_p,
            "N_q": self.N_q,
            "Z": self.Z,
            "ell": self.ell,
            "ell_prime": self.ell_prime,
            "fx_size": self.fx_size,
            "fy_size": self.fy_size,
        }


@dataclass(frozen=True)
class FullRun:
    verdict: Verdict
    attempts: int
    outcome: BasicOutcome


def _draw(sampler, size: int, rng: np.random.Generator) -> np.ndarray:
    draw = getattr(sampler, "sample", sampler)
    return np.asarray(draw(int(size), rng), dtype=np.int64)


def _check_1d(samples: np.ndarray, n: int, what: str) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 1:
        raise ValueError(f"{what} must be a 1-d array of elements")
    if samples.size and (samples.min() < 0 or samples.max() >= n):
        raise ValueError(f"{what} contains elements outside [0, {n})")
    return samples


def _check_pairs(samples: np.ndarray, n: int, m: int) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ValueError("samples must be an array of (x, y) pairs")
    if samples.size and (
        samples[:, 0].min() < 0 or samples[:, 0].max() >= n
        or samples[:, 1].min() < 0 or samples[:, 1].max() >= m
    ):
        raise ValueError(f"samples contain pairs outside [0, {n}) x [0, {m})")
    return samples


# ---------------------------------------------------------------------------
# Equal-sample closeness
# ---------------------------------------------------------------------------


def closeness_outcome(
    sampler_p, sampler_q, n: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> BasicOutcome:
    """Run the closeness tester and return its full diagnostic record."""
    k = sample_size_closeness(n, eps, delta, cfg.C)
    L = math.log(1 / delta)
    sizes = rng.multinomial(4 * k, [0.25] * 4)
    x = np.bincount(_check_1d(_draw(sampler_p, sizes[0], rng), n, "p samples"), minlength=n)
    x2 = np.bincount(_check_1d(_draw(sampler_p, sizes[1], rng), n, "p samples"), minlength=n)
    y = np.bincount(_check_1d(_draw(sampler_q, sizes[2], rng), n, "q samples"), minlength=n)
    y2 = np.bincount(_check_1d(_draw(sampler_q, sizes[3], rng), n, "q samples"), minlength=n)
    # X, X' are the p-histograms and Y, Y' the q-histograms.
    z = z_from_counts(x, x2, y, y2)
    cp, cq = x + x2, y + y2
    n_p = int(cp[cp >= 2].sum())
    n_q = int(cq[cp + cq >= 2].sum())
    n_all = int((cp + cq)[cp + cq >= 2].sum())
    z_scale = math.sqrt(k * L)
    accept = z <= cfg.C_thresh * z_scale
    return BasicOutcome(
        verdict=Verdict.YES if accept else Verdict.NO,
        branch=Branch.ACCEPT if accept else Branch.REJECT_STATISTIC,
        k=k, log_term=L, z_scale=z_scale, strict=False, collision_gate=False,
        N=n_all, N_p=n_p, N_q=n_q, Z=z,
    )


def test_closeness(
    sampler_p, sampler_q, n: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> Verdict:
    """Decide ``p == q`` versus ``d_TV(p, q) >= eps`` from samples of both."""
    return closeness_outcome(sampler_p, sampler_q, n, eps, delta, cfg, rng).verdict


test_closeness.__test__ = False  # keep pytest from collecting the name


# ---------------------------------------------------------------------------
# Shared tail of the basic testers: collision gates and the Z decision
# ---------------------------------------------------------------------------


def _gate_and_decide(
    p_codes: np.ndarray, q_codes: np.ndarray, *, k: int, L: float, abort_scale: float,
    z_scale: float, cfg: TesterConfig, rng: np.random.Generator, **record,
) -> BasicOutcome:
    base = dict(k=k, log_term=L, z_scale=z_scale, **record)
    counts = collision_counts_codes(p_codes, q_codes)
    base.update(N=counts.N, N_p=counts.N_p, N_q=counts.N_q)
    if counts.N_q > cfg.c_abort * abort_scale:
        return BasicOutcome(Verdict.ABORT, Branch.ABORT_COLLISIONS, **base)
    # Z is computed even when the collision gate rejects, so that the record
    # can be re-decided at a different acceptance constant.
    p_flags = rng.random(p_codes.size) < 0.5
    q_flags = rng.random(q_codes.size) < 0.5
    z = z_statistic_codes(p_codes, p_flags, q_codes, q_flags)
    if counts.N_p > 20 * counts.N_q + cfg.C_thresh * L:
        return BasicOutcome(Verdict.NO, Branch.REJECT_COLLISIONS, Z=z, **base)
    if z < cfg.C_thresh * z_scale:
        return BasicOutcome(Verdict.YES, Branch.ACCEPT, Z=z, **base)
    return BasicOutcome(Verdict.NO, Branch.REJECT_STATISTIC, Z=z, **base)


def _abort(branch: Branch, k: int, L: float, z_scale: float, **record) -> BasicOutcome:
    return BasicOutcome(Verdict.ABORT, branch, k=k, log_term=L, z_scale=z_scale, **record)


def _run_full(basic: Callable[[], BasicOutcome], max_retries: int) -> FullRun:
    outcome = None
    for attempt in range(1, max_retries + 1):
        outcome = basic()
        if outcome.verdict is not Verdict.ABORT:
            return FullRun(outcome.verdict, attempt, outcome)
    raise RetryExhaustedError(max_retries, outcome)


# ---------------------------------------------------------------------------
# Independence
# ---------------------------------------------------------------------------


def _independence_scales(n: int, m: int, k: int, L: float) -> tuple[float, float]:
    abort_scale = max(k / m, k * k / (m * n))
    z_scale = math.sqrt(min(k, k * k / (m * n) + k / m) * L)
    return abort_scale, z_scale


def basic_test_independence(
    samples, n: int, m: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> BasicOutcome:
    """One flatten-and-test attempt on a fixed multiset of ``100k`` pairs (``n >= m``)."""
    k = sample_size_independence(n, m, eps, delta, cfg.C)
    samples = _check_pairs(samples, n, m)
    if samples.shape[0] != 100 * k:
        raise ValueError(f"expected {100 * k} samples, got {samples.shape[0]}")
    L = math.log(1 / delta)
    abort_scale, z_scale = _independence_scales(n, m, k, L)
    total = samples.shape[0]

    in_fx = rng.random(total) < min(n / (100 * k), 1 / 100)
    in_fy = rng.random(total) < min(m / (100 * k), 1.0)
    fx_size, fy_size = int(in_fx.sum()), int(in_fy.sum())
    record = dict(fx_size=fx_size, fy_size=fy_size)
    if fx_size > 10 * n or fy_size > 10 * m:
        return _abort(Branch.ABORT_FLATTENING, k, L, z_scale, **record)

    rest = samples[~(in_fx | in_fy)]
    rest = rest[rng.permutation(rest.shape[0])]
    ell, ell_prime = (int(v) for v in rng.poisson(2 * k, size=2))
    record.update(ell=ell, ell_prime=ell_prime)
    if 2 * ell + ell_prime > rest.shape[0]:
        return _abort(Branch.ABORT_BUDGET, k, L, z_scale, **record)

    # q-samples pair the x of one sample with the y of the next.
    s_q = np.column_stack((rest[0:2 * ell:2, 0], rest[1:2 * ell:2, 1]))
    s_p = rest[2 * ell:2 * ell + ell_prime]

    split_x = build_split_map(samples[in_fx, 0], n)
    split_y = build_split_map(samples[in_fy, 1], m)

    def flatten(pairs):
        cx = split_codes(pairs[:, 0], split_x, rng)
        cy = split_codes(pairs[:, 1], split_y, rng)
        return cx * split_y.size + cy

    q_codes = flatten(s_q)
    p_codes = flatten(s_p)
    return _gate_and_decide(
        p_codes, q_codes, k=k, L=L, abort_scale=abort_scale, z_scale=z_scale,
        cfg=cfg, rng=rng, **record,
    )


def run_full_independence(
    sampler, n: int, m: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> FullRun:
    """Draw ``100k`` pairs once and retry the basic test until it does not abort.

    When ``n < m`` the axes are swapped before testing.
    """
    swap = n < m
    big, small = (m, n) if swap else (n, m)
    k = sample_size_independence(big, small, eps, delta, cfg.C)
    samples = _check_pairs(_draw(sampler, 100 * k, rng), n, m)
    if swap:
        samples = samples[:, ::-1]
    return _run_full(
        lambda: basic_test_independence(samples, big, small, eps, delta, cfg, rng),
        cfg.max_retries,
    )


def full_test_independence(
    sampler, n: int, m: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> Verdict:
    """Decide whether a joint distribution is a product or ``eps``-far from every product."""
    return run_full_independence(sampler, n, m, eps, delta, cfg, rng).verdict


# ---------------------------------------------------------------------------
# Collections of distributions
# ---------------------------------------------------------------------------


def basic_test_collections(
    samples, n: int, m: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> BasicOutcome:
    """One attempt on ``100k`` pairs ``(x, i)`` with ``i`` uniform on ``[m]`` and ``x ~ p_i``."""
    k = sample_size_collections(n, m, eps, delta, cfg.C)
    samples = _check_pairs(samples, n, m)
    if samples.shape[0] != 100 * k:
        raise ValueError(f"expected {100 * k} samples, got {samples.shape[0]}")
    L = math.log(1 / delta)
    abort_scale, z_scale = _independence_scales(n, m, k, L)
    total = samples.shape[0]

    in_fx = rng.random(total) < min(n / (100 * k), 1 / 100)
    fx_size = int(in_fx.sum())
    record = dict(fx_size=fx_size)
    if fx_size > 10 * n:
        return _abort(Branch.ABORT_FLATTENING, k, L, z_scale, **record)

    rest = samples[~in_fx]
    rest = rest[rng.permutation(rest.shape[0])]
    ell, ell_prime = (int(v) for v in rng.poisson(2 * k, size=2))
    record.update(ell=ell, ell_prime=ell_prime)
    if ell + ell_prime > rest.shape[0]:
        return _abort(Branch.ABORT_BUDGET, k, L, z_scale, **record)

    # q-samples keep x and re-draw the collection index uniformly.
    s_q = np.column_stack((rest[:ell, 0], rng.integers(0, m, size=ell)))
    s_p = rest[ell:ell + ell_prime]

    split_x = build_split_map(samples[in_fx, 0], n)
    q_codes = split_codes(s_q[:, 0], split_x, rng) * m + s_q[:, 1]
    p_codes = split_codes(s_p[:, 0], split_x, rng) * m + s_p[:, 1]
    return _gate_and_decide(
        p_codes, q_codes, k=k, L=L, abort_scale=abort_scale, z_scale=z_scale,
        cfg=cfg, rng=rng, **record,
    )


def run_full_collections(
    sampler, n: int, m: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> FullRun:
    k = sample_size_collections(n, m, eps, delta, cfg.C)
    samples = _check_pairs(_draw(sampler, 100 * k, rng), n, m)
    return _run_full(
        lambda: basic_test_collections(samples, n, m, eps, delta, cfg, rng),
        cfg.max_retries,
    )


def full_test_collections(
    sampler, n: int, m: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> Verdict:
    """Decide whether ``m`` distributions on ``[n]`` are identical or far on average."""
    return run_full_collections(sampler, n, m, eps, delta, cfg, rng).verdict


# ---------------------------------------------------------------------------
# Closeness with unequal sample sizes
# ---------------------------------------------------------------------------


def unequal_pool_sizes(n: int, K: int, eps: float, delta: float, cfg: TesterConfig) -> tuple[int, int, int]:
    """``(k, |pool_q|, |pool_p|)`` required by the unequal-sample tester."""
    k = sample_size_unequal(n, K, eps, delta, cfg.C)
    return k, 100 * (K + k), 100 * k


def basic_test_unequal(
    pool_q, pool_p, n: int, K: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> BasicOutcome:
    """One attempt given ``100(K+k)`` samples from ``q`` and ``100k`` from ``p``."""
    k, need_q, need_p = unequal_pool_sizes(n, K, eps, delta, cfg)
    pool_q = _check_1d(pool_q, n, "q pool")
    pool_p = _check_1d(pool_p, n, "p pool")
    if pool_q.size < need_q or pool_p.size < need_p:
        raise ValueError(
            f"need at least {need_q} q-samples and {need_p} p-samples, "
            f"got {pool_q.size} and {pool_p.size}"
        )
    L = math.log(1 / delta)
    abort_scale = max(k * k / K, k * k / n)
    z_scale = math.sqrt((min(k, k * k / K + k * k / n) + L) * L)

    in_f = rng.random(pool_q.size) < min(n / (100 * pool_q.size), 1 / 100)
    f_size = int(in_f.sum())
    record = dict(fx_size=f_size)
    if f_size > n or f_size > 50 * K:
        return _abort(Branch.ABORT_FLATTENING, k, L, z_scale, **record)

    rest_q = pool_q[~in_f]
    ell, ell_prime = (int(v) for v in rng.poisson(2 * k, size=2))
    record.update(ell=ell, ell_prime=ell_prime)
    if ell > min(rest_q.size, 100 * k) or ell_prime > pool_p.size:
        return _abort(Branch.ABORT_BUDGET, k, L, z_scale, **record)

    s_q = rest_q[rng.choice(rest_q.size, size=ell, replace=False)]
    s_p = pool_p[rng.choice(pool_p.size, size=ell_prime, replace=False)]
    split = build_split_map(pool_q[in_f], n)
    q_codes = split_codes(s_q, split, rng)
    p_codes = split_codes(s_p, split, rng)
    return _gate_and_decide(
        p_codes, q_codes, k=k, L=L, abort_scale=abort_scale, z_scale=z_scale,
        cfg=cfg, rng=rng, **record,
    )


def run_full_unequal(
    sampler_q, sampler_p, n: int, K: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> FullRun:
    _, need_q, need_p = unequal_pool_sizes(n, K, eps, delta, cfg)
    pool_q = _check_1d(_draw(sampler_q, need_q, rng), n, "q samples")
    pool_p = _check_1d(_draw(sampler_p, need_p, rng), n, "p samples")
    return _run_full(
        lambda: basic_test_unequal(pool_q, pool_p, n, K, eps, delta, cfg, rng),
        cfg.max_retries,
    )


def full_test_unequal(
    sampler_q, sampler_p, n: int, K: int, eps: float, delta: float, cfg: TesterConfig,
    rng: np.random.Generator,
) -> Verdict:
    """Closeness with ``O(K + k)`` samples from ``q`` and ``O(k)`` from ``p``."""
    return run_full_unequal(sampler_q, sampler_p, n, K, eps, delta, cfg, rng).verdict

