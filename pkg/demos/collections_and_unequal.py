# Two more closeness variants: a collection of m distributions, and a pair
# where samples from q are cheap and samples from p are expensive.

from disttest import Categorical, default_config, full_test_collections, full_test_unequal, make_rng
from disttest.families import collection_joint, paired_perturbation, shifted_collection
from disttest.oracle import collection_distance, collection_distance_lower_bound
from disttest.prob_core import sample_size_closeness, sample_size_unequal
from disttest.testers import unequal_pool_sizes

# Collections: five uniform distributions vs five shifted windows.
n, m, eps, delta = 50, 5, 0.3, 0.1
cfg = default_config("collections")
shifted = shifted_collection(n, m)
print("average distance to the best common q:", collection_distance(shifted),
      "(median bound", collection_distance_lower_bound(shifted), ")")

for name, dists in (("identical", [Categorical.uniform(n)] * m), ("shifted", shifted)):
    joint = collection_joint(dists)
    verdicts = [full_test_collections(joint, n, m, eps, delta, cfg, make_rng(3, i)).value for i in range(100)]
    print(f"{name:<9} YES {verdicts.count('YES'):3d}  NO {verdicts.count('NO'):3d}")

# Unequal sample sizes: with K samples of q available, p needs fewer samples.
# The tester assumes K exceeds the p-side budget k.
n, eps, delta = 10_000, 0.5, 0.1
cfg = default_config("unequal")
for K in (2000, 5000, 10_000):
    k, need_q, need_p = unequal_pool_sizes(n, K, eps, delta, cfg)
    print(f"K={K:<5} k={k:<5} pool q={need_q:<6} pool p={need_p}")

n, K = 1000, 500
p, q = paired_perturbation(n, eps)
same = [full_test_unequal(q, q, n, K, eps, delta, cfg, make_rng(4, i)).value for i in range(50)]
far = [full_test_unequal(q, p, n, K, eps, delta, cfg, make_rng(5, i)).value for i in range(50)]
print("p = q: YES", same.count("YES"), "of 50;  eps-far: NO", far.count("NO"), "of 50")

# Budget comparison at a larger scale with the same constant.
n, eps, delta = 10_000, 0.25, 0.01
print("unequal", sample_size_unequal(n, n, eps, delta, 1.0), "vs closeness", sample_size_closeness(n, eps, delta, 1.0))
