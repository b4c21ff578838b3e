"""
Labeled datasets, splits and centroid balancing
===============================================

A synthetic oracle plays the part of the video quality check.  It labels
roughly one configuration in ten as non-acceptable (+1), which leaves a
heavily imbalanced dataset.
"""

import tempfile
from pathlib import Path

from confevade import campaign as cp
from confevade.data import balance_with_centroids, dummify, load_csv, save_csv, split_stratified
from confevade.vm import gen_motiv_like

model = gen_motiv_like(seed=0)
oracle = cp.benchmark_oracle(model, seed=0)
print("oracle reads", len(oracle.weights), "quality features, threshold", round(oracle.threshold, 3))

data = cp.labeled_sample(model, oracle, 4500, seed=1)
print("labeled sample:", data.class_counts())

# stratified split: the class ratio survives in both halves
train, test = split_stratified(data, 500, seed=2)
print("train", train.class_counts(), "test", test.class_counts())

# minority rows are augmented with midpoints of random minority pairs
balanced = balance_with_centroids(train, seed=3)
print("balanced train", balanced.class_counts())

# CSV round trip, Reals written with 5 decimals
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "train.csv"
    save_csv(train, path)
    print(path.read_text().splitlines()[0][:60], "...")
    print("reloaded rows:", len(load_csv(model, path)))

# one-hot view of the enumerations, for learners that want it
wide_model, wide = dummify(model, train)
print("dummified width:", wide_model.n_features)
