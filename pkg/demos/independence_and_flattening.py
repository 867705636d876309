# Independence testing on [n] x [m] and the flattening trick underneath it.

import numpy as np

from disttest import Categorical, JointDistribution, default_config, full_test_independence, make_rng
from disttest.families import diagonal_mixture, diagonal_weight_for
from disttest.flattening import build_split_map, split_distribution
from disttest.oracle import distance_to_marginal_product

n, m, eps, delta = 30, 10, 0.3, 0.1
cfg = default_config("independence")
rng = make_rng(0)

# A product of two random marginals.
product = JointDistribution.product(Categorical(rng.dirichlet(np.ones(n))), Categorical(rng.dirichlet(np.ones(m))))
# A mixture that puts extra weight on the diagonal, tuned to sit exactly eps away.
lam = diagonal_weight_for(n, m, eps)
correlated = diagonal_mixture(n, m, lam)
print("diagonal weight", round(lam, 4), "distance", distance_to_marginal_product(correlated))

for name, joint in (("product", product), ("correlated", correlated)):
    verdicts = [full_test_independence(joint, n, m, eps, delta, cfg, make_rng(1, i)).value for i in range(100)]
    print(f"{name:<11} YES {verdicts.count('YES'):3d}  NO {verdicts.count('NO'):3d}")

# Flattening: split each element into 1 + (count in a small sample) pieces.
# Heavy elements get many pieces, so the split distribution has a smaller l2 norm,
# while the l1 distance between any two distributions is unchanged.
p = Categorical([0.7, 0.1, 0.1, 0.1])
q = Categorical([0.4, 0.2, 0.2, 0.2])
split = build_split_map(p.sample(20, make_rng(2)), p.n)
sp, sq = split_distribution(p, split), split_distribution(q, split)
print("subdivisions", split.subdivisions)
print("l2 norm     ", np.linalg.norm(p.probs), "->", np.linalg.norm(sp.probs))
print("l1 distance ", np.abs(p.probs - q.probs).sum(), "->", np.abs(sp.probs - sq.probs).sum())
