# Regenerate the constants in disttest.config.DEFAULT_CONFIGS.
#
# Each tester is calibrated on the grid stored next to its result in
# calibration/. The run is deterministic: the same seed gives the same JSON.
# Takes about 90 seconds on one core. Pass --workers N to spread trials.

import argparse
import json
from pathlib import Path

from disttest.cli import main

HERE = Path(__file__).resolve().parent.parent / "calibration"

parser = argparse.ArgumentParser()
parser.add_argument("--workers", type=int, default=1)
parser.add_argument("--out-dir", type=Path, default=HERE)
args = parser.parse_args()

for tester in ("closeness", "independence", "collections", "unequal"):
    out = args.out_dir / f"{tester}.json"
    code = main([
        "calibrate", "--tester", tester, "--grid", str(HERE / f"{tester}_grid.json"),
        "--delta", "0.1", "--reps", "300", "--seed", "7", "--workers", str(args.workers), "--out", str(out),
    ])
    report = json.loads(out.read_text())
    print(f"{tester:<13}", report["status"], report.get("config"))
