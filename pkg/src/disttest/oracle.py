"""Reference computations used to cross-check the testers.

Nothing here calls into :mod:`disttest.statistics`; the Monte Carlo ``Z`` and
the exact expectation are written out independently.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .prob_core import Categorical, JointDistribution, kl_divergence, make_rng, product_of_marginals, tv_distance

TAIL_TOL = 1e-12


class Truth(str, enum.Enum):
    SHOULD_YES = "SHOULD_YES"
    SHOULD_NO = "SHOULD_NO"


class TailBoundError(ValueError):
    pass


@dataclass(frozen=True)
class EstimateWithCI:
    estimate: float
    stderr: float
    reps: int
    failures: int = 0

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError("at least two replications are required")
        if self.stderr < 0:
            raise ValueError("standard error must be nonnegative")

    def covers(self, value: float, sigmas: float = 4.0) -> bool:
        return abs(self.estimate - value) <= sigmas * self.stderr


def distance_to_marginal_product(p: JointDistribution) -> float:
    """``d_TV(p, p_x x p_y)``, exactly."""
    return tv_distance(p, product_of_marginals(p))


def poisson_truncation(lam: float, tol: float = TAIL_TOL) -> int:
    """Smallest ``t`` with ``Pr[Poi(lam) > t] < tol``."""
    if lam == 0:
        return 0
    t = int(stats.poisson.isf(tol, lam))
    while stats.poisson.sf(t, lam) >= tol:
        t += 1
    while t > 0 and stats.poisson.sf(t - 1, lam) < tol:
        t -= 1
    return t


def _abs_diff_expectation(pa: np.ndarray, pb: np.ndarray) -> float:
    """``E|A - B|`` for independent ``A ~ pa``, ``B ~ pb`` on ``0..len-1``."""
    ia = np.arange(pa.size)[:, None]
    ib = np.arange(pb.size)[None, :]
    return math.fsum((np.outer(pa, pb) * np.abs(ia - ib)).ravel())


def exact_expected_zi(a: float, b: float, truncation: int | None = None) -> float:
    """``E[Z_i]`` for ``X, X' ~ Poi(a)`` and ``Y, Y' ~ Poi(b)``, all independent.

    Evaluates ``2 E|X-Y| - E|X-X'| - E|Y-Y'|`` by truncated double sums. With
    ``truncation=None`` the smallest point with tail mass below ``1e-12`` is
    used; an explicit truncation too small for that raises :class:`TailBoundError`.
    """
    if a < 0 or b < 0:
        raise ValueError("Poisson rates must be nonnegative")
    need = max(poisson_truncation(a), poisson_truncation(b))
    if truncation is None:
        truncation = need
    elif truncation < need:
        raise TailBoundError(
            f"truncation {truncation} leaves Poisson tail mass >= {TAIL_TOL:g}; need at least {need}"
        )
    support = np.arange(truncation + 1)
    pa = stats.poisson.pmf(support, a) if a > 0 else (support == 0).astype(float)
    pb = stats.poisson.pmf(support, b) if b > 0 else (support == 0).astype(float)
    return 2 * _abs_diff_expectation(pa, pb) - _abs_diff_expectation(pa, pa) - _abs_diff_expectation(pb, pb)


def expected_z(p: Categorical, q: Categorical, k: float) -> float:
    """Sum of :func:`exact_expected_zi` over the domain at rates ``k p_i``, ``k q_i``."""
    return math.fsum(exact_expected_zi(k * a, k * b) for a, b in zip(p.probs, q.probs))


REGIMES = ("linear", "quadratic", "scaled")


def gap_regimes(p: Categorical, q: Categorical, k: float, delta: float) -> dict[str, dict]:
    """Split the expected gap of ``Z`` by which growth rate each element is in.

    With ``c = k |p_i - q_i|`` and ``s = k (p_i + q_i)``, element ``i`` goes to the
    regime minimising ``c`` (linear), ``c^2`` (quadratic) or ``c^2 / sqrt(s)``
    (scaled), ties to the first. For each regime the result holds the l1 mass
    ``sum |p_i - q_i|``, the exact ``E[Z]`` contribution and that contribution
    as a fraction of ``sqrt(k log(1/delta))``.
    """
    diff = k * np.abs(p.probs - q.probs)
    total = k * (p.probs + q.probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(total > 0, diff**2 / np.sqrt(total), 0.0)
    which = np.argmin(np.stack((diff, diff**2, scaled)), axis=0)
    scale = math.sqrt(k * math.log(1 / delta))
    out = {}
    for j, name in enumerate(REGIMES):
        idx = np.flatnonzero(which == j)
        ez = math.fsum(exact_expected_zi(k * p.probs[i], k * q.probs[i]) for i in idx)
        out[name] = {
            "elements": int(idx.size),
            "l1_mass": math.fsum(np.abs(p.probs[idx] - q.probs[idx])),
            "expected_z": ez,
            "fraction": ez / scale,
        }
    return out


def monte_carlo_mean_z(
    p: Categorical, q: Categorical, k: float, reps: int, rng: np.random.Generator
) -> EstimateWithCI:
    """Mean and standard error of the Poissonised four-histogram statistic."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    pk, qk = k * p.probs, k * q.probs
    totals = np.empty(reps)
    chunk = max(1, 2_000_000 // max(p.n, 1))
    done = 0
    while done < reps:
        r = min(chunk, reps - done)
        x, x2 = rng.poisson(pk, size=(r, p.n)), rng.poisson(pk, size=(r, p.n))
        y, y2 = rng.poisson(qk, size=(r, q.n)), rng.poisson(qk, size=(r, q.n))
        per_bin = abs(x - y) + abs(x2 - y2) - abs(x - x2) - abs(y - y2)
        totals[done:done + r] = per_bin.sum(axis=1)
        done += r
    return EstimateWithCI(float(totals.mean()), float(totals.std(ddof=1) / math.sqrt(reps)), reps)


def empirical_error_rate(
    tester, truth: Truth, reps: int, seed: int, *, workers: int = 1
) -> EstimateWithCI:
    """Fraction of ``reps`` runs of ``tester(rng)`` whose verdict contradicts ``truth``.

    Trial ``i`` receives the stream ``make_rng(seed, i)``, so the result does not
    depend on ``workers``. Exceptions raised by the tester are counted in
    ``failures`` and excluded from the rate.
    """
    if reps < 50:
        raise ValueError("reps must be at least 50")
    truth = Truth(truth)
    wrong = "NO" if truth is Truth.SHOULD_YES else "YES"

    def one(i):
        try:
            return str(tester(make_rng(seed, i)))
        except Exception:
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            verdicts = list(pool.map(one, range(reps)))
    else:
        verdicts = [one(i) for i in range(reps)]
    completed = [v for v in verdicts if v is not None]
    failures = reps - len(completed)
    if len(completed) < 2:
        raise RuntimeError(f"{failures} of {reps} trials failed")
    rate = sum(v == wrong for v in completed) / len(completed)
    return EstimateWithCI(rate, math.sqrt(rate * (1 - rate) / len(completed)), len(completed), failures)


def kl_tv_consistency_check(p: Categorical, q: Categorical) -> bool:
    """Check ``d_TV(p, q) <= 1 - exp(-D(p||q)) / 2`` up to ``1e-12``."""
    kl = kl_divergence(p, q)
    if math.isinf(kl):
        raise ValueError("KL divergence is infinite")
    return tv_distance(p, q) <= 1 - 0.5 * math.exp(-kl) + 1e-12


def collection_distance_lower_bound(dists) -> float:
    """Lower bound on ``min_q mean_i d_TV(p_i, q)`` over distributions ``q``.

    Dropping the normalisation of ``q`` makes the problem separable per element,
    solved by the coordinate-wise median; the unconstrained optimum can only be
    smaller than the constrained one.
    """
    P = np.array([getattr(d, "probs", d) for d in dists], dtype=float)
    med = np.median(P, axis=0)
    return 0.5 * float(np.abs(P - med).sum()) / P.shape[0]


def collection_distance(dists) -> float:
    """``min_q mean_i d_TV(p_i, q)`` over distributions ``q``, by linear programming."""
    from scipy.optimize import linprog

    P = np.array([getattr(d, "probs", d) for d in dists], dtype=float)
    m, n = P.shape
    # Variables: q (n), then slacks t (m*n) with t >= |P - q|.
    c = np.concatenate((np.zeros(n), np.full(m * n, 0.5 / m)))
    eye = np.eye(n)
    rows, rhs = [], []
    for i in range(m):
        block = np.zeros((n, m * n))
        block[:, i * n:(i + 1) * n] = -np.eye(n)
        rows.append(np.hstack((eye, block)))
        rhs.append(P[i])
        rows.append(np.hstack((-eye, block)))
        rhs.append(-P[i])
    res = linprog(
        c, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
        A_eq=np.concatenate((np.ones(n), np.zeros(m * n)))[None, :], b_eq=[1.0],
        bounds=[(0, None)] * (n + m * n), method="highs",
    )
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    return float(res.fun)
