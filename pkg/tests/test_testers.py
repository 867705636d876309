import math

import numpy as np
import pytest

from disttest import config
from disttest.config import default_config
from disttest.families import collection_joint, diagonal_mixture, paired_perturbation, shifted_collection
from disttest.prob_core import (
    Categorical,
    JointDistribution,
    make_rng,
    sample_size_independence,
)
from disttest.testers import (
    Branch,
    RetryExhaustedError,
    Verdict,
    _gate_and_decide,
    basic_test_independence,
    basic_test_unequal,
    closeness_outcome,
    full_test_collections,
    full_test_independence,
    full_test_unequal,
    run_full_independence,
    test_closeness as run_closeness,
    unequal_pool_sizes,
)


def _rate(fn, reps=40):
    return sum(fn(make_rng(77, i)) is Verdict.YES for i in range(reps)) / reps


def test_closeness_identical_and_far():
    cfg = default_config("closeness")
    u = Categorical.uniform(60)
    _, q = paired_perturbation(60, 0.5)
    assert _rate(lambda r: run_closeness(u, u, 60, 0.5, 0.1, cfg, r)) >= 0.8
    assert _rate(lambda r: run_closeness(u, q, 60, 0.5, 0.1, cfg, r)) <= 0.2


def test_closeness_point_masses():
    cfg = default_config("closeness")
    a, b = Categorical.point_mass(10, 0), Categorical.point_mass(10, 1)
    assert run_closeness(a, a, 10, 0.5, 0.1, cfg, make_rng(0)) is Verdict.YES
    assert run_closeness(a, b, 10, 0.5, 0.1, cfg, make_rng(0)) is Verdict.NO


def test_closeness_rejects_out_of_range_samples():
    cfg = default_config("closeness")
    with pytest.raises(ValueError):
        closeness_outcome(lambda s, r: np.full(s, 7), Categorical.uniform(5), 5, 0.5, 0.1, cfg, make_rng(0))


def test_closeness_is_deterministic_given_seed():
    cfg = default_config("closeness")
    u = Categorical.uniform(40)
    a = closeness_outcome(u, u, 40, 0.5, 0.1, cfg, make_rng(5))
    b = closeness_outcome(u, u, 40, 0.5, 0.1, cfg, make_rng(5))
    assert a == b


def test_decide_is_monotone_in_threshold():
    cfg = default_config("closeness")
    u = Categorical.uniform(40)
    _, q = paired_perturbation(40, 0.25)
    outcomes = [closeness_outcome(u, q, 40, 0.25, 0.1, cfg, make_rng(8, i)) for i in range(60)]
    prev = None
    for c in (0.1, 0.5, 1, 2, 4, 8):
        yes = sum(o.decide(c) is Verdict.YES for o in outcomes)
        assert prev is None or yes >= prev
        prev = yes


def test_decide_reproduces_verdict():
    cfg = default_config("independence")
    joint = diagonal_mixture(30, 10, 0.5)
    for i in range(10):
        run = run_full_independence(joint, 30, 10, 0.3, 0.1, cfg, make_rng(3, i))
        assert run.outcome.decide(cfg.C_thresh) is run.verdict


def test_independence_product_vs_diagonal():
    cfg = default_config("independence")
    product = JointDistribution.product(Categorical.uniform(30), Categorical.uniform(10))
    far = diagonal_mixture(30, 10, 0.6)
    assert _rate(lambda r: full_test_independence(product, 30, 10, 0.3, 0.1, cfg, r)) >= 0.8
    assert _rate(lambda r: full_test_independence(far, 30, 10, 0.3, 0.1, cfg, r)) <= 0.2


def test_independence_swaps_axes():
    cfg = default_config("independence")
    product = JointDistribution.product(Categorical.uniform(4), Categorical.uniform(30))
    run = run_full_independence(product, 4, 30, 0.5, 0.1, cfg, make_rng(1))
    assert run.outcome.k == sample_size_independence(30, 4, 0.5, 0.1, cfg.C)


def test_basic_independence_size_check():
    cfg = default_config("independence")
    with pytest.raises(ValueError):
        basic_test_independence(np.zeros((10, 2), dtype=int), 30, 10, 0.3, 0.1, cfg, make_rng(0))


def test_flattening_set_sizes():
    # Each of the 100k samples joins F_x with probability n/(100k) when n < k.
    cfg = default_config("independence")
    k = sample_size_independence(30, 10, 0.3, 0.1, cfg.C)
    samples = np.zeros((100 * k, 2), dtype=int)
    outs = [basic_test_independence(samples, 30, 10, 0.3, 0.1, cfg, make_rng(4, i)) for i in range(200)]
    assert abs(np.mean([o.fx_size for o in outs]) - 30) < 4 * np.sqrt(30 / 200)
    assert abs(np.mean([o.fy_size for o in outs]) - 10) < 4 * np.sqrt(10 / 200)


def test_collision_abort_with_tiny_gate():
    cfg = default_config("independence").with_(c_abort=1e-6)
    k = sample_size_independence(30, 10, 0.3, 0.1, cfg.C)
    samples = np.zeros((100 * k, 2), dtype=int)
    out = basic_test_independence(samples, 30, 10, 0.3, 0.1, cfg, make_rng(0))
    assert out.verdict is Verdict.ABORT and out.branch.is_abort


def test_retry_exhausted():
    cfg = default_config("independence").with_(c_abort=1e-6, max_retries=3)
    product = JointDistribution.product(Categorical.point_mass(30, 0), Categorical.point_mass(10, 0))
    with pytest.raises(RetryExhaustedError) as info:
        full_test_independence(product, 30, 10, 0.3, 0.1, cfg, make_rng(0))
    assert info.value.attempts == 3


def test_collision_rejection_branch():
    cfg = config.TesterConfig(C=1.0, C_thresh=1.0, c_abort=1e9)
    # Every p-sample lands on one code while q-samples are all distinct.
    p_codes = np.zeros(200, dtype=np.int64)
    q_codes = np.arange(1, 101, dtype=np.int64)
    out = _gate_and_decide(p_codes, q_codes, k=100, L=1.0, abort_scale=1.0, z_scale=1.0, cfg=cfg, rng=make_rng(0))
    assert (out.N_p, out.N_q) == (200, 0)
    assert out.branch is Branch.REJECT_COLLISIONS and out.verdict is Verdict.NO
    # Z is still recorded, so the outcome can be re-decided.
    assert out.Z is not None
    assert out.decide(1e6) is Verdict.YES


def test_collections_identical_vs_shifted():
    cfg = default_config("collections")
    same = collection_joint([Categorical.uniform(50)] * 5)
    shifted = collection_joint(shifted_collection(50, 5))
    assert _rate(lambda r: full_test_collections(same, 50, 5, 0.3, 0.1, cfg, r)) >= 0.8
    assert _rate(lambda r: full_test_collections(shifted, 50, 5, 0.3, 0.1, cfg, r)) <= 0.2


def test_unequal_identical_vs_far():
    cfg = default_config("unequal")
    u = Categorical.uniform(200)
    _, q = paired_perturbation(200, 0.5)
    assert _rate(lambda r: full_test_unequal(u, u, 200, 200, 0.5, 0.1, cfg, r)) >= 0.8
    assert _rate(lambda r: full_test_unequal(q, u, 200, 200, 0.5, 0.1, cfg, r)) <= 0.2


def test_unequal_pool_requirements():
    cfg = default_config("unequal")
    k, need_q, need_p = unequal_pool_sizes(200, 200, 0.5, 0.1, cfg)
    assert (need_q, need_p) == (100 * (200 + k), 100 * k)
    with pytest.raises(ValueError):
        basic_test_unequal(np.zeros(10, dtype=int), np.zeros(need_p, dtype=int), 200, 200, 0.5, 0.1, cfg, make_rng(0))


def test_unequal_flattening_set_size():
    # Per-sample probability n/(100 |pool_q|), so |F| has mean n/100.
    cfg = default_config("unequal")
    _, need_q, need_p = unequal_pool_sizes(2000, 2000, 0.5, 0.1, cfg)
    rng = make_rng(5)
    pool_q, pool_p = rng.integers(0, 2000, need_q), rng.integers(0, 2000, need_p)
    sizes = [basic_test_unequal(pool_q, pool_p, 2000, 2000, 0.5, 0.1, cfg, make_rng(6, i)).fx_size for i in range(100)]
    assert abs(np.mean(sizes) - 20) < 4 * np.sqrt(20 / 100)


def test_outcome_diagnostics_keys():
    cfg = default_config("closeness")
    u = Categorical.uniform(20)
    d = closeness_outcome(u, u, 20, 0.5, 0.1, cfg, make_rng(0)).diagnostics()
    assert {"branch", "k", "N", "N_p", "N_q", "Z"} <= set(d)
    assert d["k"] > 0 and math.isfinite(d["Z"])
