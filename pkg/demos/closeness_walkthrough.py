# Closeness testing on a toy pair of distributions.
#
# Two distributions on 200 elements: p is uniform, q moves eps of mass
# between paired bins. The tester sees samples only.

import numpy as np

from disttest import Categorical, default_config, make_rng, test_closeness, tv_distance
from disttest.families import paired_perturbation
from disttest.prob_core import sample_size_closeness

n, eps, delta = 200, 0.25, 0.1
cfg = default_config("closeness")

p, q = paired_perturbation(n, eps)
print("d_TV(p, q) =", tv_distance(p, q))
print("samples per distribution:", sample_size_closeness(n, eps, delta, cfg.C))

# Same distribution twice, then the perturbed pair. 200 runs each.
u = Categorical.uniform(n)
same = [test_closeness(u, u, n, eps, delta, cfg, make_rng(1, i)).value for i in range(200)]
far = [test_closeness(p, q, n, eps, delta, cfg, make_rng(2, i)).value for i in range(200)]
print("p = q    : YES in", same.count("YES"), "of 200")
print("eps-far  : NO  in", far.count("NO"), "of 200")

# The statistic behind the verdict: its Poissonised mean is 0 when p = q
# and grows with the distance otherwise.
from disttest.oracle import expected_z

k = sample_size_closeness(n, eps, delta, cfg.C)
for d in (0.0, 0.1, 0.25, 0.5):
    a, b = paired_perturbation(n, d) if d else (u, u)
    print(f"eps={d:<5} E[Z] = {expected_z(a, b, k):8.2f}")

# The sample budget grows sublinearly in n.
ns = np.array([10**2, 10**3, 10**4, 10**5])
print(dict(zip(ns.tolist(), [sample_size_closeness(int(m), eps, delta, cfg.C) for m in ns])))
