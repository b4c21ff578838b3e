"""
Evasion attacks and the random baseline
=======================================

Each step moves a configuration by t along the unit gradient, away from its
class, then repairs the types.  Without repair the discriminant falls by
exactly nb_disp * t * ||w||.
"""

import numpy as np

from confevade import attack as atk
from confevade import campaign as cp
from confevade.classifier import LinearSvm, discriminant, train
from confevade.data import split_stratified
from confevade.vm import REAL, FeatureDef, VariabilityModel, gen_motiv_like, validate

# a two-feature toy shows the geometry: g(x0) = 18 and ||w|| = 5
toy = VariabilityModel((FeatureDef("x", REAL, min=-100, max=100), FeatureDef("y", REAL, min=-100, max=100)))
svm = LinearSvm(np.array([3.0, 4.0]), -10.0)
x0 = np.array([4.0, 4.0])
r = atk.evasion_attack(toy, svm, x0, atk.AttackParams(0.2, 20, repair_each_step=False))
print("g before", discriminant(svm, x0), "after", r.g_final, "predicted drop", 20 * 0.2 * 5)
print("crossed the boundary:", atk.is_successful(svm, r, 1))

# now the benchmark
model = gen_motiv_like(seed=0)
oracle = cp.benchmark_oracle(model, seed=0)
data = cp.labeled_sample(model, oracle, 4500, seed=1)
tr, te = split_stratified(data, 500, seed=2)
svm = train(tr)
seeds = atk.attack_pool_seeds(svm, te, source_label=1)
print(len(seeds), "correctly classified non-acceptable test rows seed the pool")

# the pool grows: later attacks may start from earlier results
for t in (1e-2, 1.0, 1e2):
    params = atk.AttackParams(t, 20)
    for kind in (atk.EVASION, atk.RANDOM):
        results = atk.run_attack_pool(model, svm, seeds, 200, params, rng_seed=3, kind=kind)
        mis, valid = atk.summarize_results(model, svm, results, 1)
        print(f"t={t:<6g} {kind:8s} misclassified {mis:3d}/200  valid {valid:3d}/200")

# why large steps break validity
r = atk.evasion_attack(model, svm, seeds[0], atk.AttackParams(1e2, 20))
print("first violations at t=100:", validate(model, r.final).violations[:3])
