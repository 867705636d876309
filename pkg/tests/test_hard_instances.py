import numpy as np
import pytest

from disttest.hard_instances import (
    Case,
    EnsembleSpec,
    PseudoDistribution,
    PseudoDistributionError,
    Variant,
    gen_independence_hard,
    gen_unequal_hard,
    is_pseudo_distribution,
    reduce_closeness_to_independence,
    reduction_distribution,
    sample_pseudo_poissonized,
)
from disttest.oracle import distance_to_marginal_product
from disttest.prob_core import Categorical, make_rng, tv_distance


def test_is_pseudo_distribution_bounds():
    assert is_pseudo_distribution(np.array([0.005, 0.005]))
    assert not is_pseudo_distribution(np.array([0.004, 0.005]))
    assert is_pseudo_distribution(np.array([50.0, 50.0]))
    assert not is_pseudo_distribution(np.array([60.0, 50.0]))
    assert not is_pseudo_distribution(np.array([1.5, -0.5]))


def test_pseudo_distribution_rejects_negative():
    with pytest.raises(ValueError):
        PseudoDistribution([0.5, -0.1])


def test_second_term_completeness_is_uniform():
    spec = EnsembleSpec(Case.COMPLETENESS, Variant.SECOND_TERM, 6, 4, 1.0, 0.5)
    pd = gen_independence_hard(spec, make_rng(0))
    assert np.allclose(pd.masses, 1 / 24)
    assert pd.resamples == 0


def test_second_term_soundness_values():
    spec = EnsembleSpec(Case.SOUNDNESS, Variant.SECOND_TERM, 8, 5, 1.0, 0.4)
    pd = gen_independence_hard(spec, make_rng(1))
    assert set(np.round(pd.masses.ravel() * 40, 12)) <= {0.6, 1.4}


def test_first_term_rows_are_heavy_or_light():
    spec = EnsembleSpec(Case.SOUNDNESS, Variant.FIRST_TERM, 40, 6, 5.0, 0.5)
    masses = gen_independence_hard(spec, make_rng(2)).masses
    heavy = np.isclose(masses, 1 / (5 * 6)).all(axis=1)
    light_values = np.round(masses[~heavy] * 240, 12)
    assert set(light_values.ravel()) <= {0.5, 1.5}
    assert 0 < heavy.sum() < 40


def test_first_term_completeness_normalized_is_product():
    spec = EnsembleSpec(Case.COMPLETENESS, Variant.FIRST_TERM, 12, 5, 3.0, 0.5)
    rng = make_rng(3)
    for _ in range(20):
        joint = gen_independence_hard(spec, rng).normalized()
        assert np.linalg.svd(joint.probs, compute_uv=False)[1] < 1e-10
        assert distance_to_marginal_product(joint) < 1e-12


def test_first_term_requires_k_at_most_n():
    with pytest.raises(ValueError):
        EnsembleSpec(Case.COMPLETENESS, Variant.FIRST_TERM, 3, 3, 4.0, 0.5)


def _first_invalid_seed(spec):
    # A heavy row carries mass 1/k > 100 here; it appears in about a k-fraction of draws.
    for seed in range(5000):
        try:
            gen_independence_hard(spec, make_rng(seed), strict=True)
        except PseudoDistributionError:
            return seed
    raise AssertionError("no invalid draw found")


def test_strict_mode_and_resampling():
    spec = EnsembleSpec(Case.COMPLETENESS, Variant.FIRST_TERM, 50, 2, 0.009, 0.5)
    seed = _first_invalid_seed(spec)
    pd = gen_independence_hard(spec, make_rng(seed))
    assert pd.resamples >= 1
    assert is_pseudo_distribution(pd)
    with pytest.raises(PseudoDistributionError):
        gen_independence_hard(spec, make_rng(seed), max_resamples=0)


def test_generator_is_deterministic():
    spec = EnsembleSpec(Case.SOUNDNESS, Variant.SECOND_TERM, 10, 10, 1.0, 0.5)
    a = gen_independence_hard(spec, make_rng(9)).masses
    b = gen_independence_hard(spec, make_rng(9)).masses
    assert np.array_equal(a, b)


def test_unequal_completeness_equal_pair():
    p, q = gen_unequal_hard(400, 10, 40, 0.5, Case.COMPLETENESS, make_rng(0))
    assert np.array_equal(p.masses, q.masses)
    assert set(np.round(p.masses * 400, 12)) <= {10.0, 0.5}


def test_unequal_soundness_structure():
    p, q = gen_unequal_hard(400, 10, 40, 0.5, Case.SOUNDNESS, make_rng(1))
    heavy = np.isclose(p.masses, 1 / 40)
    assert np.allclose(q.masses[heavy], 1 / 40)
    assert set(np.round(q.masses[~heavy] * 400, 12)) <= {0.0, 1.0}


def test_unequal_parameter_validation():
    with pytest.raises(ValueError):
        gen_unequal_hard(10, 5, 4, 0.5, Case.SOUNDNESS, make_rng(0))
    with pytest.raises(ValueError):
        gen_unequal_hard(10, 1, 4, 1.5, Case.SOUNDNESS, make_rng(0))


def test_reduction_distance_is_half_tv():
    rng = make_rng(5)
    for _ in range(50):
        p = Categorical(rng.dirichlet(np.ones(7)))
        q = Categorical(rng.dirichlet(np.ones(7)))
        r = reduction_distribution(p, q)
        assert distance_to_marginal_product(r) == pytest.approx(tv_distance(p, q) / 2, abs=1e-12)


def test_reduction_sampler_matches_distribution():
    p, q = Categorical([0.7, 0.3, 0.0]), Categorical([0.0, 0.5, 0.5])
    sampler = reduce_closeness_to_independence(p, q)
    s = sampler.sample(60_000, make_rng(6))
    freq = np.zeros((3, 2))
    np.add.at(freq, (s[:, 0], s[:, 1]), 1)
    assert np.allclose(freq / 60_000, reduction_distribution(p, q).probs, atol=0.01)


def test_reduction_of_equal_pair_is_product():
    p = Categorical([0.2, 0.3, 0.5])
    assert distance_to_marginal_product(reduction_distribution(p, p)) < 1e-15


def test_sample_pseudo_poissonized():
    pd = PseudoDistribution(np.array([2.0, 0.0, 0.5]))
    h = np.array([sample_pseudo_poissonized(pd, 10, make_rng(7, i)) for i in range(4000)])
    assert np.all(h[:, 1] == 0)
    assert abs(h[:, 0].mean() - 20) <= 4 * np.sqrt(20 / 4000)
    assert np.all(sample_pseudo_poissonized(pd, 0, make_rng(0)) == 0)
    with pytest.raises(PseudoDistributionError):
        sample_pseudo_poissonized(PseudoDistribution(np.array([1000.0])), 1, make_rng(0))


def test_to_dict():
    pd = PseudoDistribution(np.array([[0.5, 0.5]]), resamples=2)
    d = pd.to_dict()
    assert d == {"shape": [1, 2], "masses": [[0.5, 0.5]], "resamples": 2}
