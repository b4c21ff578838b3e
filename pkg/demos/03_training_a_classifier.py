"""
A linear max-margin classifier
==============================

The classifier is a soft-margin linear SVM.  Its discriminant
g(x) = w.x + b is what the attacks later descend.
"""

import numpy as np

from confevade import campaign as cp
from confevade.classifier import TrainParams, accuracy, discriminant, gradient, top_features, train
from confevade.data import split_stratified
from confevade.vm import gen_motiv_like

model = gen_motiv_like(seed=0)
oracle = cp.benchmark_oracle(model, seed=0)
data = cp.labeled_sample(model, oracle, 4500, seed=1)
tr, te = split_stratified(data, 500, seed=2)

svm = train(tr)
print(f"test accuracy {accuracy(svm, te):.4f} on {len(te)} rows")

# the exact solver and the stochastic one land in the same place
sgd = train(tr, TrainParams(solver="sgd", epochs=100))
print(f"sgd test accuracy {accuracy(sgd, te):.4f}")

# heaviest weights: the oracle's quality features should float to the top
print("oracle features:", sorted(model.features[i].name for i in oracle.weights))
for name, mag in top_features(svm, 8):
    print(f"  {name:>5s} {mag:.4f}")

# the gradient is the weight vector wherever you stand
x = te.X[0]
h = 1e-4
e = np.eye(model.n_features)[model.real_idx[0]]
fd = (discriminant(svm, x + h * e) - discriminant(svm, x - h * e)) / (2 * h)
print("finite difference", fd, "analytic", gradient(svm, x)[model.real_idx[0]])
