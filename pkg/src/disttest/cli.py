"""``disttest`` command line.

Exit codes: 0 YES (or success), 1 NO (or calibration failed), 2 usage or
malformed input, 3 every basic-test attempt aborted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import TESTERS, TesterConfig, default_config
from .hard_instances import Case, EnsembleSpec, Variant, gen_independence_hard, gen_unequal_hard
from .harness import CalibrationError, ExperimentSpec, GridPoint, calibrate, simulate
from .io import FileSampler, InputError, SamplesExhaustedError, instance_dump, load_distribution, read_samples
from .prob_core import JointDistribution, make_rng
from .testers import RetryExhaustedError, closeness_outcome, run_full_collections, run_full_independence, run_full_unequal

EXIT_YES, EXIT_NO, EXIT_USAGE, EXIT_RETRY = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_jsonable)


def _jsonable(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")


def _config(args) -> TesterConfig:
    return TesterConfig.load(args.config) if args.config else default_config(args.tester)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


# -- test ---------------------------------------------------------------------


def _source(args, which: str, n: int, m: int | None, expect_joint: bool):
    """Sampler for stream ``which`` ('p' or 'q') from a sample file or a distribution file."""
    samples_path = getattr(args, f"samples_{which}")
    dist_path = getattr(args, f"dist_{which}")
    if samples_path and dist_path:
        raise UsageError(f"give either --samples-{which} or --dist-{which}, not both")
    if samples_path:
        return FileSampler(read_samples(samples_path, n, m if expect_joint else None), samples_path)
    if dist_path:
        dist = load_distribution(dist_path)
        if expect_joint != isinstance(dist, JointDistribution):
            kind = "joint" if expect_joint else "one-dimensional"
            raise InputError(f"{dist_path}: expected a {kind} distribution")
        if dist.n != n or (expect_joint and dist.m != m):
            raise InputError(f"{dist_path}: domain does not match --n/--m")
        return dist
    raise UsageError(f"missing --samples-{which} or --dist-{which}")


def _infer_dims(args) -> None:
    """Fill --n/--m from a distribution file when not given on the command line."""
    if args.n is not None and (args.m is not None or args.tester in ("closeness", "unequal")):
        return
    for path in (args.dist_p, args.dist_q):
        if path:
            dist = load_distribution(path)
            if args.n is None:
                args.n = dist.n
            if args.m is None and isinstance(dist, JointDistribution):
                args.m = dist.m
            return


def cmd_test(args) -> int:
    _infer_dims(args)
    if args.n is None:
        raise UsageError("--n is required")
    if args.tester in ("independence", "collections") and args.m is None:
        raise UsageError("--m is required")
    if args.tester == "unequal" and args.big_k is None:
        raise UsageError("--big-k is required for the unequal tester")
    cfg = _config(args)
    rng = make_rng(args.seed)
    n, m = args.n, args.m
    attempts = 1
    try:
        if args.tester == "closeness":
            outcome = closeness_outcome(
                _source(args, "p", n, None, False), _source(args, "q", n, None, False),
                n, args.eps, args.delta, cfg, rng,
            )
        elif args.tester == "independence":
            run = run_full_independence(_source(args, "p", n, m, True), n, m, args.eps, args.delta, cfg, rng)
            outcome, attempts = run.outcome, run.attempts
        elif args.tester == "collections":
            run = run_full_collections(_source(args, "p", n, m, True), n, m, args.eps, args.delta, cfg, rng)
            outcome, attempts = run.outcome, run.attempts
        else:
            run = run_full_unequal(
                _source(args, "q", n, None, False), _source(args, "p", n, None, False),
                n, args.big_k, args.eps, args.delta, cfg, rng,
            )
            outcome, attempts = run.outcome, run.attempts
    except RetryExhaustedError as exc:
        print("ABORT")
        print(_dump({"tester": args.tester, "attempts": exc.attempts, **exc.last.diagnostics()}))
        return EXIT_RETRY
    except SamplesExhaustedError as exc:
        raise InputError(str(exc)) from None
    diag = {"tester": args.tester, "attempts": attempts, "config": cfg.to_dict(), **outcome.diagnostics()}
    print(outcome.verdict.value)
    print(_dump(diag))
    return EXIT_YES if outcome.verdict.value == "YES" else EXIT_NO


# -- simulate -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    data = json.loads(Path(args.spec).read_text())
    for key in ("reps", "seed", "out"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.config:
        data["config"] = TesterConfig.load(args.config).to_dict()
    spec = ExperimentSpec.from_dict(data)
    result = simulate(spec, workers=args.workers)
    if spec.out is None:
        sys.stdout.write(result.csv_text())
    print(_dump(result.summary), file=sys.stderr if spec.out is None else sys.stdout)
    return EXIT_YES


# -- generate-hard --------------------------------------------------------------


def cmd_generate_hard(args) -> int:
    rng = make_rng(args.seed)
    case = Case(args.case)
    if args.ensemble == "independence":
        if args.m is None:
            raise UsageError("--m is required for the independence ensemble")
        spec = EnsembleSpec(case, Variant(args.variant), args.n, args.m, args.k, args.eps)
        pd = gen_independence_hard(spec, rng, strict=args.strict)
        dump = instance_dump(pd, case=case.value, variant=spec.variant.value, seed=args.seed,
                             ensemble="independence", k=args.k, eps=args.eps)
    else:
        if args.big_k is None:
            raise UsageError("--big-k is required for the unequal ensemble")
        pd_p, pd_q = gen_unequal_hard(args.n, args.k, args.big_k, args.eps, case, rng, strict=args.strict)
        dump = instance_dump(pd_p, case=case.value, variant=None, seed=args.seed,
                             ensemble="unequal", k=args.k, K=args.big_k, eps=args.eps)
        dump["masses_q"] = pd_q.masses.tolist()
    _emit(_dump(dump), args.out)
    return EXIT_YES


# -- calibrate ------------------------------------------------------------------


def _parse_grid(text: str) -> list[GridPoint]:
    path = Path(text)
    raw = json.loads(path.read_text()) if path.is_file() else json.loads(text)
    if not isinstance(raw, list) or not raw:
        raise UsageError("--grid must be a nonempty JSON list of points")
    return [GridPoint.from_dict(p) for p in raw]


def cmd_calibrate(args) -> int:
    grid = _parse_grid(args.grid)
    try:
        result = calibrate(
            args.tester, grid, args.delta, args.reps, args.seed,
            target=args.target, workers=args.workers,
            families=tuple(args.families.split(",")) if args.families else None,
        )
    except CalibrationError as exc:
        report = {"status": "calibration_failed", "tester": args.tester, "reason": str(exc), "log": exc.log}
        _emit(json.dumps(report, indent=2, sort_keys=True), args.out)
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_NO
    report = result.to_dict()
    report.update(grid=[vars(p) for p in grid], reps=args.reps, seed=args.seed)
    _emit(json.dumps(report, indent=2, sort_keys=True), args.out)
    return EXIT_YES


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disttest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run one tester on sample or distribution files")
    t.add_argument("tester", choices=TESTERS)
    t.add_argument("--n", type=int)
    t.add_argument("--m", type=int)
    t.add_argument("--big-k", type=int)
    t.add_argument("--eps", type=float, required=True)
    t.add_argument("--delta", type=float, required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--config")
    for which in "pq":
        t.add_argument(f"--samples-{which}", metavar="FILE")
        t.add_argument(f"--dist-{which}", metavar="FILE")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="error-rate simulation from an experiment spec")
    s.add_argument("spec")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--config")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("generate-hard", help="draw from a lower-bound ensemble")
    g.add_argument("ensemble", choices=("independence", "unequal"))
    g.add_argument("--case", choices=[c.value for c in Case], required=True)
    g.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.SECOND_TERM.value)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--k", type=float, default=1.0)
    g.add_argument("--big-k", type=int)
    g.add_argument("--eps", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--strict", action="store_true")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate_hard)

    c = sub.add_parser("calibrate", help="fit C, C_thresh and c_abort on a grid")
    c.add_argument("--tester", choices=TESTERS, required=True)
    c.add_argument("--grid", required=True, help="JSON list of points, inline or as a file path")
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--target", type=float)
    c.add_argument("--reps", type=int, default=300)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--families", metavar="COMPLETENESS,SOUNDNESS")
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_YES
    try:
        return args.func(args)
    except (UsageError, InputError, ValueError, OSError) as exc:
        print(f"disttest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
