# Random measures from the lower-bound ensembles.
#
# Completeness draws are product measures; soundness draws flip a fair coin
# per cell. Both are nearly indistinguishable with too few samples.

import numpy as np

from disttest import make_rng
from disttest.hard_instances import Case, EnsembleSpec, Variant, gen_independence_hard, gen_unequal_hard, is_pseudo_distribution
from disttest.oracle import distance_to_marginal_product
from disttest.prob_core import marginals, tv_distance

n = m = 100
eps = 0.5
rng = make_rng(0)

yes = gen_independence_hard(EnsembleSpec(Case.COMPLETENESS, Variant.SECOND_TERM, n, m, 1.0, eps), rng)
no = gen_independence_hard(EnsembleSpec(Case.SOUNDNESS, Variant.SECOND_TERM, n, m, 1.0, eps), rng)
print("total masses", yes.total, no.total, "valid", is_pseudo_distribution(yes), is_pseudo_distribution(no))

joint = yes.normalized()
a, b = marginals(joint)
print("completeness: largest gap to product", np.abs(joint.probs - np.outer(a.probs, b.probs)).max())
d = [distance_to_marginal_product(gen_independence_hard(
    EnsembleSpec(Case.SOUNDNESS, Variant.SECOND_TERM, n, m, 1.0, eps), rng).normalized()) for _ in range(50)]
print("soundness: distance to product, mean over 50 draws", np.mean(d))

# Heavy rows appear with probability k/n in the other variant.
heavy = gen_independence_hard(EnsembleSpec(Case.SOUNDNESS, Variant.FIRST_TERM, n, m, 5.0, eps), rng)
print("rows at the heavy level:", int(np.sum(np.all(np.isclose(heavy.masses, 1 / (5 * m)), axis=1))))

# The unequal-sample ensemble: K heavy elements shared by p and q, light ones differ.
pd_p, pd_q = gen_unequal_hard(2000, 50, 200, eps, Case.SOUNDNESS, rng)
print("unequal pair distance after normalising:", tv_distance(pd_p.normalized(), pd_q.normalized()))
