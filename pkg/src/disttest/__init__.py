"""Discrete distribution property testers with simulation and calibration tooling."""

from .config import DEFAULT_CONFIGS, TesterConfig, default_config
from .prob_core import Categorical, JointDistribution, kl_divergence, make_rng, tv_distance
from .testers import (
    RetryExhaustedError,
    Verdict,
    full_test_collections,
    full_test_independence,
    full_test_unequal,
    test_closeness,
)

__all__ = [
    "Categorical",
    "DEFAULT_CONFIGS",
    "JointDistribution",
    "RetryExhaustedError",
    "TesterConfig",
    "Verdict",
    "default_config",
    "full_test_collections",
    "full_test_independence",
    "full_test_unequal",
    "kl_divergence",
    "make_rng",
    "test_closeness",
    "tv_distance",
]
