"""
Bringing your own model
=======================

The construction only needs a point prediction per test point and a B x m
matrix of bootstrap predictions. Any model works: here a k-nearest-neighbour
regressor written in a few lines of numpy stands in for an external pipeline.
The matrix is written to CSV and handed to the command-line tool, which
returns the same sets as the in-process call.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from excursion_sets import PredictionEnsemble, construct, write_prediction_matrix
from excursion_sets.simlab import cosine_mean, gen_cosine


def knn_predict(X_train, y_train, X_test, k=15):
    dist = np.abs(X_test[:, None, 0] - X_train[None, :, 0])
    nearest = np.argpartition(dist, k, axis=1)[:, :k]
    return y_train[nearest].mean(axis=1)


sim = gen_cosine(n=600, m=120, seed=3)
X, y, Xt = sim.train.features, sim.train.outcomes, sim.test.features
rng = np.random.default_rng(3)

point = knn_predict(X, y, Xt)
samples = np.empty((200, Xt.shape[0]))
for b in range(200):
    rows = rng.integers(0, len(y), len(y))
    samples[b] = knn_predict(X[rows], y[rows], Xt)

ens = PredictionEnsemble.from_samples(point, samples)
res = construct(ens, c=0.0, tlb=0.9)
print(f"in-process: inner {res.inner.size}, outer {res.outer.size}, a={res.threshold_a:.3f}, ELB={res.elb:.3f}")

# Same thing through the CLI
with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    write_prediction_matrix(ens, tmp / "point.csv", tmp / "samples.csv")
    cmd = [sys.executable, "-m", "excursion_sets", "construct-external",
           "--point", str(tmp / "point.csv"), "--samples", str(tmp / "samples.csv"),
           "--level", "0", "--tlb", "0.9", "--out", str(tmp / "result.json")]
    code = subprocess.run(cmd).returncode
    cli = json.loads((tmp / "result.json").read_text())
    print(f"cli (exit {code}): inner {len(cli['inner'])}, outer {len(cli['outer'])}, a={cli['a']:.3f}")
    print("same sets:", cli["inner"] == res.inner.tolist() and cli["outer"] == res.outer.tolist())

# The truth is known for simulated data; a kNN smoother is biased near the
# peaks and troughs of the cosine, which is where misses would come from
truth = cosine_mean(Xt[:, 0])
print("inner points with f < 0:", int(np.sum(truth[res.inner] < 0)))
print("points with f >= 0 missing from outer:", int(np.sum((truth >= 0) & ~np.isin(np.arange(truth.size), res.outer))))
