import json

import numpy as np
import pytest

from disttest.cli import main
from disttest.io import FileSampler, InputError, SamplesExhaustedError, load_distribution, read_samples, write_samples
from disttest.prob_core import Categorical, make_rng


@pytest.fixture
def uniform_files(tmp_path):
    samples = Categorical.uniform(50).sample(3000, make_rng(0))
    p = tmp_path / "p.txt"
    write_samples(p, samples)
    q = tmp_path / "q.txt"
    write_samples(q, samples)
    return p, q


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_read_samples_one_indexed(tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("1\n3\n\n2\n")
    assert read_samples(f, 3).tolist() == [0, 2, 1]
    f.write_text("1,2\n3,1\n")
    assert read_samples(f, 3, 2).tolist() == [[0, 1], [2, 0]]


@pytest.mark.parametrize("text,line", [("1\n0\n", 2), ("1\nx\n", 2), ("4\n", 1), ("1,1\n", 1)])
def test_read_samples_names_line(tmp_path, text, line):
    f = tmp_path / "bad.txt"
    f.write_text(text)
    with pytest.raises(InputError, match=f"bad.txt:{line}:"):
        read_samples(f, 3)


def test_write_read_roundtrip(tmp_path):
    pairs = np.array([[0, 4], [2, 1]])
    write_samples(tmp_path / "pairs.txt", pairs)
    assert np.array_equal(read_samples(tmp_path / "pairs.txt", 3, 5), pairs)


def test_load_distribution(tmp_path):
    f = tmp_path / "d.json"
    f.write_text(json.dumps({"n": 3, "probs": [0.2, 0.3, 0.5000004]}))
    p = load_distribution(f)
    assert p.n == 3 and abs(p.probs.sum() - 1) < 1e-12
    f.write_text(json.dumps({"n": 2, "m": 2, "probs": [[0.25, 0.25], [0.25, 0.25]]}))
    assert load_distribution(f).m == 2


@pytest.mark.parametrize("payload", [
    {"n": 2, "probs": [1.1, -0.1]},
    {"n": 2, "probs": [0.5, 0.49]},
    {"n": 3, "probs": [0.5, 0.5]},
    {"n": 2, "m": 2, "probs": [0.5, 0.5]},
    {"probs": [1.0]},
])
def test_load_distribution_rejects(tmp_path, payload):
    f = tmp_path / "d.json"
    f.write_text(json.dumps(payload))
    with pytest.raises(InputError):
        load_distribution(f)


def test_file_sampler_without_replacement():
    sampler = FileSampler(np.arange(10))
    rng = make_rng(0)
    drawn = np.concatenate((sampler.sample(4, rng), sampler.sample(6, rng)))
    assert sorted(drawn.tolist()) == list(range(10))
    with pytest.raises(SamplesExhaustedError):
        sampler.sample(1, rng)


def test_cli_closeness_identical_files_smoke(capsys, uniform_files):
    p, q = uniform_files
    verdicts = []
    for seed in range(50):
        code, out, _ = _run(capsys, "test", "closeness", "--n", 50, "--eps", 0.5, "--delta", 0.01,
                            "--seed", seed, "--samples-p", p, "--samples-q", q)
        verdicts.append(out.splitlines()[0])
        assert code == (0 if verdicts[-1] == "YES" else 1)
    assert verdicts.count("YES") >= 45


def test_cli_output_is_deterministic(capsys, uniform_files):
    p, q = uniform_files
    argv = ("test", "closeness", "--n", 50, "--eps", 0.5, "--delta", 0.1, "--seed", 9, "--samples-p", p, "--samples-q", q)
    first = _run(capsys, *argv)
    assert first == _run(capsys, *argv)
    json.loads(first[1].splitlines()[1])


def test_cli_missing_file(capsys, uniform_files):
    _, q = uniform_files
    code, _, err = _run(capsys, "test", "closeness", "--n", 50, "--eps", 0.5, "--delta", 0.1,
                        "--samples-p", "missing.txt", "--samples-q", q)
    assert code == 2 and "missing.txt" in err


def test_cli_malformed_line(capsys, tmp_path, uniform_files):
    _, q = uniform_files
    bad = tmp_path / "bad.txt"
    bad.write_text("1\n2\nseven\n")
    code, _, err = _run(capsys, "test", "closeness", "--n", 50, "--eps", 0.5, "--delta", 0.1,
                        "--samples-p", bad, "--samples-q", q)
    assert code == 2 and "bad.txt:3" in err


def test_cli_usage_error(capsys):
    assert _run(capsys, "test", "closeness")[0] == 2
    assert _run(capsys, "nonsense")[0] == 2
    assert _run(capsys, "test", "unequal", "--n", 5, "--eps", 0.5, "--delta", 0.1)[0] == 2


def test_cli_too_few_samples(capsys, tmp_path):
    f = tmp_path / "few.txt"
    f.write_text("1\n2\n")
    code, _, err = _run(capsys, "test", "closeness", "--n", 50, "--eps", 0.5, "--delta", 0.1,
                        "--samples-p", f, "--samples-q", f)
    assert code == 2 and "few.txt" in err


def test_cli_distribution_input_no(capsys, tmp_path):
    p = tmp_path / "p.json"
    q = tmp_path / "q.json"
    p.write_text(json.dumps({"n": 4, "probs": [0.5, 0.5, 0, 0]}))
    q.write_text(json.dumps({"n": 4, "probs": [0, 0, 0.5, 0.5]}))
    code, out, _ = _run(capsys, "test", "closeness", "--eps", 0.5, "--delta", 0.1, "--dist-p", p, "--dist-q", q)
    assert code == 1 and out.startswith("NO\n")


def test_cli_independence_from_joint(capsys, tmp_path):
    joint = tmp_path / "j.json"
    joint.write_text(json.dumps({"n": 6, "m": 3, "probs": (np.ones((6, 3)) / 18).tolist()}))
    code, out, _ = _run(capsys, "test", "independence", "--eps", 0.5, "--delta", 0.1, "--dist-p", joint)
    assert code in (0, 1)
    assert json.loads(out.splitlines()[1])["attempts"] >= 1


def test_cli_retry_exhausted(capsys, tmp_path):
    joint = tmp_path / "j.json"
    joint.write_text(json.dumps({"n": 6, "m": 3, "probs": (np.ones((6, 3)) / 18).tolist()}))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"C": 1.0, "C_thresh": 1.0, "c_abort": 1e-9, "max_retries": 2}))
    code, out, _ = _run(capsys, "test", "independence", "--eps", 0.5, "--delta", 0.1, "--dist-p", joint, "--config", cfg)
    assert code == 3 and out.startswith("ABORT")


def test_cli_unequal_samples(capsys, tmp_path):
    rng = make_rng(1)
    write_samples(tmp_path / "q.txt", Categorical.uniform(100).sample(60_000, rng))
    write_samples(tmp_path / "p.txt", Categorical.uniform(100).sample(30_000, rng))
    code, out, _ = _run(capsys, "test", "unequal", "--n", 100, "--big-k", 100, "--eps", 0.5, "--delta", 0.1,
                        "--samples-q", tmp_path / "q.txt", "--samples-p", tmp_path / "p.txt")
    assert code in (0, 1) and out.splitlines()[0] in ("YES", "NO")


def test_cli_simulate(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"tester": "closeness", "family": "uniform", "n": 30, "eps": 0.5,
                                "delta": 0.1, "reps": 10, "seed": 1}))
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(capsys, "simulate", spec, "--out", out1)[0] == 0
    assert _run(capsys, "simulate", spec, "--out", out2, "--workers", 2)[0] == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert len(out1.read_text().splitlines()) == 11
    assert _run(capsys, "simulate", spec, "--reps", 0)[0] == 2


def test_cli_generate_hard(capsys, tmp_path):
    argv = ("generate-hard", "independence", "--case", "completeness", "--n", 4, "--m", 3, "--eps", 0.5, "--seed", 2)
    code, out, _ = _run(capsys, *argv)
    dump = json.loads(out)
    assert code == 0 and dump["shape"] == [4, 3] and dump["variant"] == "second_term"
    assert np.allclose(dump["masses"], 1 / 12)
    assert out == _run(capsys, *argv)[1]
    code, out, _ = _run(capsys, "generate-hard", "unequal", "--case", "soundness", "--n", 40, "--k", 2,
                        "--big-k", 4, "--eps", 0.5)
    dump = json.loads(out)
    assert code == 0 and len(dump["masses_q"]) == 40


def test_cli_calibrate_success_and_failure(capsys, tmp_path):
    out = tmp_path / "cal.json"
    grid = json.dumps([{"n": 20, "eps": 0.9}])
    code, _, _ = _run(capsys, "calibrate", "--tester", "closeness", "--grid", grid, "--delta", 0.1,
                      "--reps", 60, "--families", "uniform,disjoint", "--out", out)
    report = json.loads(out.read_text())
    assert code == 0 and report["status"] == "ok" and set(report["config"]) >= {"C", "C_thresh", "c_abort", "max_retries"}
    code, _, err = _run(capsys, "calibrate", "--tester", "closeness", "--grid", grid, "--delta", 0.1,
                        "--reps", 60, "--families", "uniform,disjoint", "--target", 0, "--out", out)
    assert code == 1 and json.loads(out.read_text())["status"] == "calibration_failed"
