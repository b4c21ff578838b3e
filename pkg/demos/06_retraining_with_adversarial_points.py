"""
Retraining on adversarial configurations
========================================

Twenty-five evasion results are added to the training set, labeled by the
oracle, and the classifier is retrained.  Accuracy on the untouched test set
drops once the steps are large enough to matter.
"""

from confevade import campaign as cp
from confevade.vm import gen_motiv_like

model = gen_motiv_like(seed=0)
oracle = cp.benchmark_oracle(model, seed=0)
full = cp.labeled_sample(model, oracle, 4500, cp.derive_seed(0, "sample"))
train, test = cp.prepare_split(full, 500, seed=0, rep=0, balanced=False)

for mode in ("oracle", "source"):
    rep = cp.rq2_retrain(model, oracle, train, test, t_list=(1e-4, 1e-2, 1e-1, 1.0, 10.0), n_adv=25,
                         repetitions=3, seed=0, label_mode=mode)
    base = rep.baselines[0]["accuracy"]
    print(f"{mode} labels, baseline {base:.4f}")
    for (t, _, _), acc in cp.median_by_cell(rep, "accuracy").items():
        print(f"  t={t:<7g} median accuracy {acc:.4f} ({100 * (acc - base):+.2f} points)")
