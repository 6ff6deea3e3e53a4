"""
The two linear classifiers on a toy problem
===========================================

Both models minimize half the squared weight norm plus c times a loss summed
over rows. The hinge loss gives the SVM a hard margin on separable data; the
log loss keeps LR weights finite but smaller.
"""

import numpy as np

from prfclf.classify import TrainingSet, score_documents, train_logreg, train_svm
from prfclf.index import FeatureVector


def row(x, y):
    return FeatureVector({k: v for k, v in (("x", x), ("y", y)) if v})


# two points mirrored through the origin
ts = TrainingSet(("pos", "neg"), (row(1.0, 0.0), row(-1.0, 0.0)), (1, -1))
svm = train_svm(ts)
lr = train_logreg(ts)
print("svm", svm.weights, "bias", svm.bias)   # w = (1, 0), b = 0: margin exactly 1
print("lr ", lr.weights, "bias", lr.bias)

# a noisier cloud: scores on held-out points
rng = np.random.default_rng(0)
pts = rng.normal(size=(40, 2)) + np.where(rng.random((40, 1)) < 0.5, 1.5, -1.5)
labels = tuple(1 if p[0] + p[1] > 0 else -1 for p in pts)
cloud = TrainingSet(tuple(f"p{i}" for i in range(40)), tuple(row(*p) for p in pts), labels)
for c in (0.1, 1.0, 10.0):
    m = train_svm(cloud, c)
    acc = np.mean([(s > 0) == (l > 0) for s, l in zip(score_documents(m, cloud.vectors), labels)])
    print(f"c={c:<5} svm training accuracy {acc:.2f}, |w| = {np.linalg.norm(list(m.weights.values())):.2f}")
