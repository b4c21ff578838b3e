"""
Success and validity across step sizes
======================================

A reduced grid of the attack campaign: small steps never cross the
boundary, large steps always do but leave the Real intervals.  The random
baseline with the same budget stays near a coin flip at best.
"""

from confevade import campaign as cp
from confevade.vm import gen_motiv_like

model = gen_motiv_like(seed=0)
oracle = cp.benchmark_oracle(model, seed=0)
grid = cp.GridSpec(step_sizes=(1e-6, 1e-2, 1.0, 1e2, 1e6), nb_disps=(20,), balanced=(False,),
                   repetitions=3, n_attacks=200)

reports = {kind: cp.rq1_campaign(model, oracle, grid, kind, seed=0) for kind in ("evasion", "random")}
mis = {k: cp.median_by_cell(r, "n_misclassified") for k, r in reports.items()}
valid = cp.median_by_cell(reports["evasion"], "n_valid")

print(f"{'t':>8s} {'evasion':>8s} {'random':>8s} {'valid':>8s}")
for cell in mis["evasion"]:
    print(f"{cell[0]:8g} {mis['evasion'][cell]:8g} {mis['random'][cell]:8g} {valid[cell]:8g}")

# class symmetry: attacking acceptable configurations works just as well
rev = cp.rq1_campaign(model, oracle, grid, "evasion", seed=0, source_label=-1)
print("from -1:", dict((k[0], v) for k, v in cp.median_by_cell(rev, "n_misclassified").items()))

print(cp.summary_csv(reports["evasion"]).splitlines()[:4])
