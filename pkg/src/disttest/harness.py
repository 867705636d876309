"""Batch simulation of tester error rates and calibration of the universal constants.

Trial ``i`` of an experiment with base seed ``s`` uses the stream
``make_rng(s, i)`` for everything it does, so outputs do not depend on how
trials are spread over workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .config import TESTERS, TesterConfig, default_config
from .families import CALIBRATION_FAMILIES, Instance, adversarial_pair_multisets, adversarial_pool_pairs, build_instance
from .oracle import Truth
from .prob_core import (
    make_rng,
    sample_size_closeness,
    sample_size_collections,
    sample_size_independence,
    sample_size_unequal,
)
from .testers import (
    FullRun,
    RetryExhaustedError,
    Verdict,
    basic_test_collections,
    basic_test_independence,
    basic_test_unequal,
    closeness_outcome,
    run_full_collections,
    run_full_independence,
    run_full_unequal,
    unequal_pool_sizes,
)

CSV_COLUMNS = (
    "tester", "n", "m", "K", "eps", "delta", "k_used", "truth", "verdict",
    "abort_count", "N", "N_p", "N_q", "Z", "trial_seed",
)


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class ExperimentSpec:
    tester: str
    family: str
    n: int
    eps: float
    delta: float
    reps: int
    seed: int
    m: int = 1
    big_k: Optional[int] = None
    config: Optional[TesterConfig] = None
    family_params: dict = field(default_factory=dict)
    out: Optional[str] = None

    def __post_init__(self):
        if self.tester not in TESTERS:
            raise ValueError(f"unknown tester {self.tester!r}; expected one of {TESTERS}")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ValueError("reps must be a positive integer")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.tester == "unequal" and self.big_k is None:
            raise ValueError("the unequal tester needs big_k")
        if self.config is None:
            object.__setattr__(self, "config", default_config(self.tester))
        elif isinstance(self.config, dict):
            object.__setattr__(self, "config", TesterConfig.from_dict(self.config))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "K" in d:
            d["big_k"] = d.pop("K")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config"] = self.config.to_dict()
        return d

    def budget(self) -> int:
        C = self.config.C
        if self.tester == "closeness":
            return sample_size_closeness(self.n, self.eps, self.delta, C)
        if self.tester == "independence":
            big, small = max(self.n, self.m), min(self.n, self.m)
            return sample_size_independence(big, small, self.eps, self.delta, C)
        if self.tester == "collections":
            return sample_size_collections(self.n, self.m, self.eps, self.delta, C)
        return sample_size_unequal(self.n, self.big_k, self.eps, self.delta, C)


def make_instance(spec: ExperimentSpec, rng: np.random.Generator) -> Instance:
    return build_instance(
        spec.tester, spec.family, rng, n=spec.n, m=spec.m, eps=spec.eps,
        big_k=spec.big_k, k=spec.budget(), **spec.family_params,
    )


def run_tester(spec: ExperimentSpec, inst: Instance, rng: np.random.Generator, cfg: TesterConfig | None = None) -> FullRun:
    """Run the spec's tester once on ``inst``; may raise :class:`RetryExhaustedError`."""
    cfg = cfg or spec.config
    if spec.tester == "closeness":
        outcome = closeness_outcome(inst.p, inst.q, spec.n, spec.eps, spec.delta, cfg, rng)
        return FullRun(outcome.verdict, 1, outcome)
    if spec.tester == "independence":
        return run_full_independence(inst.joint, spec.n, spec.m, spec.eps, spec.delta, cfg, rng)
    if spec.tester == "collections":
        return run_full_collections(inst.joint, spec.n, spec.m, spec.eps, spec.delta, cfg, rng)
    return run_full_unequal(inst.q, inst.p, spec.n, spec.big_k, spec.eps, spec.delta, cfg, rng)


def run_trial(spec: ExperimentSpec, index: int) -> dict:
    """One CSV row; failures are recorded in the row rather than raised."""
    rng = make_rng(spec.seed, index)
    row = {
        "tester": spec.tester, "n": spec.n, "m": spec.m,
        "K": spec.big_k if spec.big_k is not None else "",
        "eps": spec.eps, "delta": spec.delta, "k_used": spec.budget(),
        "truth": "", "verdict": "", "abort_count": 0,
        "N": "", "N_p": "", "N_q": "", "Z": "",
        "trial_seed": f"{spec.seed}:{index}",
    }
    try:
        inst = make_instance(spec, rng)
        row["truth"] = inst.truth.value
        run = run_tester(spec, inst, rng)
    except RetryExhaustedError as exc:
        row.update(verdict="RETRY_EXHAUSTED", abort_count=exc.attempts)
        return row
    except Exception as exc:  # recorded per row, the batch continues
        row.update(verdict=f"ERROR:{type(exc).__name__}")
        return row
    o = run.outcome
    row.update(
        verdict=run.verdict.value, abort_count=run.attempts - 1,
        N=o.N, N_p=o.N_p, N_q=o.N_q, Z=o.Z if o.Z is not None else "",
    )
    return row


def _map(fn, args: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, *zip(*args), chunksize=max(1, len(args) // (4 * workers))))


@dataclass
class SimulationResult:
    spec: ExperimentSpec
    rows: list[dict]
    summary: dict

    def csv_text(self) -> str:
        return rows_to_csv(self.rows)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in CSV_COLUMNS})
    return buf.getvalue()


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summarize(spec: ExperimentSpec, rows: list[dict]) -> dict:
    tallies = {"YES": 0, "NO": 0, "RETRY_EXHAUSTED": 0, "ERROR": 0}
    wrong = completed = aborts = attempts = 0
    for row in rows:
        v = row["verdict"]
        tallies["ERROR" if v.startswith("ERROR") else v] += 1
        aborts += int(row["abort_count"])
        if v in ("YES", "NO"):
            completed += 1
            attempts += int(row["abort_count"]) + 1
            if (row["truth"] == Truth.SHOULD_YES.value) != (v == "YES"):
                wrong += 1
    lo, hi = wilson_interval(wrong, completed)
    return {
        "tester": spec.tester,
        "family": spec.family,
        "reps": spec.reps,
        "seed": spec.seed,
        "k_used": spec.budget(),
        "config": spec.config.to_dict(),
        "tallies": tallies,
        "completed": completed,
        "errors": wrong,
        "error_rate": wrong / completed if completed else None,
        "wilson95": [lo, hi],
        "abort_total": aborts,
        "mean_attempts": attempts / completed if completed else None,
    }


def simulate(spec: ExperimentSpec, workers: int = 1, reps: int | None = None) -> SimulationResult:
    """Run ``reps`` (default ``spec.reps``) trials; rows are in trial order."""
    reps = spec.reps if reps is None else reps
    rows = _map(run_trial, [(spec, i) for i in range(reps)], workers)
    result = SimulationResult(spec, rows, summarize(spec, rows))
    if spec.out:
        write_outputs(result, spec.out)
    return result


def write_outputs(result: SimulationResult, out) -> tuple[Path, Path]:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.csv_text())
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return out, summary_path


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridPoint:
    n: int
    eps: float
    m: int = 1
    big_k: Optional[int] = None

    @classmethod
    def from_dict(cls, d: dict) -> "GridPoint":
        d = dict(d)
        if "K" in d:
            d["big_k"] = d.pop("K")
        return cls(**d)


class CalibrationError(RuntimeError):
    def __init__(self, message: str, log: list):
        super().__init__(message)
        self.log = log


@dataclass
class CalibrationResult:
    tester: str
    config: TesterConfig
    delta: float
    log: list

    def to_dict(self) -> dict:
        return {
            "status": "ok",
            "tester": self.tester,
            "delta": self.delta,
            "config": self.config.to_dict(),
            "log": self.log,
        }


def _outcome_trial(spec: ExperimentSpec, index: int, cfg: TesterConfig):
    """Final outcome of one trial, or ``None`` when every attempt aborted."""
    rng = make_rng(spec.seed, index)
    inst = make_instance(spec, rng)
    try:
        run = run_tester(spec, inst, rng, cfg)
    except RetryExhaustedError:
        return None, 0
    return run.outcome, run.attempts


def collect_outcomes(spec: ExperimentSpec, cfg: TesterConfig, workers: int = 1) -> list:
    return _map(_outcome_trial, [(spec, i, cfg) for i in range(spec.reps)], workers)


def error_count(outcomes, truth: Truth, c_thresh: float) -> tuple[int, int]:
    """``(wrong, completed)`` when the recorded outcomes are decided at ``c_thresh``."""
    wrong_verdict = Verdict.NO if truth is Truth.SHOULD_YES else Verdict.YES
    wrong = completed = 0
    for outcome, _ in outcomes:
        if outcome is None:
            continue
        completed += 1
        wrong += outcome.decide(c_thresh) is wrong_verdict
    return wrong, completed


def _upper(outcomes, truth, c):
    wrong, completed = error_count(outcomes, truth, c)
    return wilson_interval(wrong, completed)[1] if completed else 1.0


def _bisect(ok, lo: float, hi: float, want_low: bool, iters: int = 60) -> Optional[float]:
    """Boundary of a monotone predicate on ``[lo, hi]`` in log space.

    ``want_low``: smallest value where ``ok`` holds (``ok`` increasing);
    otherwise largest value where ``ok`` holds (``ok`` decreasing).
    """
    if want_low:
        if not ok(hi):
            return None
        if ok(lo):
            return lo
    else:
        if not ok(lo):
            return None
        if ok(hi):
            return hi
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = (a + b) / 2
        if ok(math.exp(mid)) == want_low:
            b = mid
        else:
            a = mid
    return math.exp(b if want_low else a)


def _grid_spec(tester, family, point: GridPoint, delta, reps, seed) -> ExperimentSpec:
    return ExperimentSpec(
        tester=tester, family=family, n=point.n, m=point.m, big_k=point.big_k,
        eps=point.eps, delta=delta, reps=reps, seed=seed,
    )


def abort_rates(tester: str, point: GridPoint, delta: float, cfg: TesterConfig, reps: int, seed: int) -> dict[str, float]:
    """Empirical ABORT probability of the basic tester on fixed adversarial inputs."""
    rates = {}
    if tester == "unequal":
        _, need_q, need_p = unequal_pool_sizes(point.n, point.big_k, point.eps, delta, cfg)
        inputs = adversarial_pool_pairs(need_q, need_p, point.n)
        for j, (name, (pool_q, pool_p)) in enumerate(sorted(inputs.items())):
            aborted = sum(
                basic_test_unequal(pool_q, pool_p, point.n, point.big_k, point.eps, delta, cfg,
                                   make_rng(seed, j * reps + r)).verdict is Verdict.ABORT
                for r in range(reps)
            )
            rates[name] = aborted / reps
        return rates
    if tester == "independence":
        n, m = max(point.n, point.m), min(point.n, point.m)
        k = sample_size_independence(n, m, point.eps, delta, cfg.C)
        basic = basic_test_independence
    else:
        n, m = point.n, point.m
        k = sample_size_collections(n, m, point.eps, delta, cfg.C)
        basic = basic_test_collections
    inputs = adversarial_pair_multisets(100 * k, n, m)
    for j, (name, samples) in enumerate(sorted(inputs.items())):
        aborted = sum(
            basic(samples, n, m, point.eps, delta, cfg, make_rng(seed, j * reps + r)).verdict is Verdict.ABORT
            for r in range(reps)
        )
        rates[name] = aborted / reps
    return rates


def calibrate(
    tester: str,
    grid: Sequence[GridPoint],
    delta: float,
    reps: int,
    seed: int,
    *,
    target: Optional[float] = None,
    C_grid: Sequence[float] = (0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0, 5.6, 8.0),
    c_abort_grid: Sequence[float] = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 13.0, 20.0, 40.0),
    abort_reps: int = 100,
    abort_target: float = 0.25,
    thresh_range: tuple[float, float] = (1e-3, 1e3),
    max_retries: int = 64,
    workers: int = 1,
    families: Optional[tuple[str, str]] = None,
) -> CalibrationResult:
    """Choose ``C``, then ``C_thresh``, then ``c_abort`` for one tester.

    For each ``C`` in ascending order, completeness and soundness trials are run
    on every grid point and their outcomes recorded. Because the recorded
    diagnostics do not depend on ``C_thresh``, the feasible acceptance constants
    form an interval found by bisection: the smallest value with every
    completeness Wilson upper bound at most ``target`` and the largest with
    every soundness upper bound at most ``target``. The first ``C`` with a
    nonempty interval is kept, with ``C_thresh`` at its geometric midpoint.
    Then the smallest ``c_abort`` whose abort rate on adversarial fixed inputs
    is at most ``abort_target`` and which still meets ``target`` on replay is
    chosen. Raises :class:`CalibrationError` when nothing is feasible.

    ``families`` overrides the (completeness, soundness) instance families.
    """
    if tester not in TESTERS:
        raise ValueError(f"unknown tester {tester!r}")
    if reps < 1 or not grid:
        raise ValueError("need a nonempty grid and reps >= 1")
    target = delta if target is None else target
    comp_family, sound_family = families or CALIBRATION_FAMILIES[tester]
    has_abort = tester != "closeness"
    # Generous abort gate while searching C and C_thresh.
    search_abort = max(c_abort_grid) if has_abort else 10.0
    log: list = []
    lo_c, hi_c = thresh_range

    def specs_for(point, j):
        return (
            _grid_spec(tester, comp_family, point, delta, reps, seed + 2 * j),
            _grid_spec(tester, sound_family, point, delta, reps, seed + 2 * j + 1),
        )

    chosen = None
    for C in C_grid:
        cfg = TesterConfig(C=C, C_thresh=1.0, c_abort=search_abort, max_retries=max_retries)
        recorded = []
        for j, point in enumerate(grid):
            comp_spec, sound_spec = specs_for(point, j)
            recorded.append((
                collect_outcomes(comp_spec, cfg, workers),
                collect_outcomes(sound_spec, cfg, workers),
            ))

        def comp_ok(c):
            return all(_upper(comp, Truth.SHOULD_YES, c) <= target for comp, _ in recorded)

        def sound_ok(c):
            return all(_upper(sound, Truth.SHOULD_NO, c) <= target for _, sound in recorded)

        lo = _bisect(comp_ok, lo_c, hi_c, want_low=True)
        hi = _bisect(sound_ok, lo_c, hi_c, want_low=False)
        entry = {"stage": "C", "C": C, "c_thresh_low": lo, "c_thresh_high": hi}
        entry["feasible"] = lo is not None and hi is not None and lo <= hi
        log.append(entry)
        if entry["feasible"]:
            chosen = (C, math.sqrt(lo * hi), recorded)
            break
    if chosen is None:
        raise CalibrationError("no C in the grid admits an acceptance threshold meeting the target", log)

    C, c_thresh, recorded = chosen
    for j, (comp, sound) in enumerate(recorded):
        wc, nc = error_count(comp, Truth.SHOULD_YES, c_thresh)
        ws, ns = error_count(sound, Truth.SHOULD_NO, c_thresh)
        log.append({
            "stage": "C_thresh", "point": asdict(grid[j]), "C": C, "C_thresh": c_thresh,
            "completeness_errors": [wc, nc], "soundness_errors": [ws, ns],
        })

    if not has_abort:
        config = TesterConfig(C=C, C_thresh=c_thresh, c_abort=search_abort, max_retries=max_retries)
        return CalibrationResult(tester, config, delta, log)

    for c_abort in c_abort_grid:
        cfg = TesterConfig(C=C, C_thresh=c_thresh, c_abort=c_abort, max_retries=max_retries)
        worst = 0.0
        for j, point in enumerate(grid):
            rates = abort_rates(tester, point, delta, cfg, abort_reps, seed + 1000 + j)
            worst = max(worst, max(rates.values()))
            log.append({"stage": "c_abort", "c_abort": c_abort, "point": asdict(point), "abort_rates": rates})
        if worst > abort_target:
            continue
        replay_ok = True
        for j, point in enumerate(grid):
            comp_spec, sound_spec = specs_for(point, j)
            for spec, truth in ((comp_spec, Truth.SHOULD_YES), (sound_spec, Truth.SHOULD_NO)):
                outcomes = collect_outcomes(spec, cfg, workers)
                wrong, completed = error_count(outcomes, truth, c_thresh)
                upper = wilson_interval(wrong, completed)[1] if completed else 1.0
                mean_attempts = float(np.mean([a for _, a in outcomes if a])) if completed else None
                log.append({
                    "stage": "replay", "c_abort": c_abort, "point": asdict(point), "family": spec.family,
                    "errors": [wrong, completed], "wilson_upper": upper, "mean_attempts": mean_attempts,
                })
                replay_ok &= upper <= target
        if replay_ok:
            config = TesterConfig(C=C, C_thresh=c_thresh, c_abort=c_abort, max_retries=max_retries)
            return CalibrationResult(tester, config, delta, log)
    raise CalibrationError("no c_abort in the grid keeps aborts rare and errors on target", log)
