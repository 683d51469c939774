"""
Inner and outer confidence sets for a linear model
==================================================

Fit and bootstrap a linear model, then ask which test points have an
expected outcome at or above a level c. The target lower bound applies to the
probability that the inner set sits inside the true excursion set while the
outer set covers it.
"""

import numpy as np

from excursion_sets import BootstrapConfig, PredictorSpec, bootstrap_expected, construct
from excursion_sets.baselines import baseline_sets
from excursion_sets.simlab import check_containment, gen_linear

# Simulated data: y = x @ beta + noise, x uniform on [-2, 2]^3.
# The generator also returns the noise-free truth at the test points.
sim = gen_linear(n=400, m=200, p=3, sigma=1.0, seed=0)
print("training rows:", sim.train.n, " test points:", sim.test.m)

# 200 bootstrap refits give a 200 x m matrix of predictions at the test points
ens = bootstrap_expected(PredictorSpec("linear"), sim.train, sim.test, BootstrapConfig(200, rng_seed=0))
print("bootstrap matrix:", ens.samples.shape, " median scale:", round(float(np.median(ens.scale)), 3))

# Ask for 90% containment at level c = 0
res = construct(ens, c=0.0, tlb=0.9)
print(f"\nthreshold a = {res.threshold_a:.3f}, band half-width e = {res.band_halfwidth_e:.3f}")
print(f"estimated bounds on P(containment): [{res.elb:.3f}, {res.eub:.3f}]")
print(f"inner set: {res.inner.size} points, outer set: {res.outer.size} points")
print(f"points in the inflated boundary: {res.boundary_count}")

# Points whose point prediction alone says f >= 0 lie between the two sets
plug_in = np.flatnonzero(ens.point >= 0.0)
print("plug-in set:", plug_in.size, "points;",
      "inner subset:", set(res.inner) <= set(plug_in), " outer superset:", set(plug_in) <= set(res.outer))

# Here we know the truth, so the containment statement can be checked directly
print("contained this time:", check_containment(res.inner, res.outer, sim.truth, 0.0))

# The same matrix gives the interval-inversion baselines for comparison.
# Pointwise intervals are narrower than simultaneous ones, so their sets
# hug the plug-in set more closely.
for kind in ("ci", "sci"):
    inner, outer = baseline_sets(ens, alpha=0.1, c=0.0, kind=kind)
    print(f"{kind:>3}: inner {inner.size:3d}  outer {outer.size:3d}  contained {check_containment(inner, outer, sim.truth, 0.0)}")
