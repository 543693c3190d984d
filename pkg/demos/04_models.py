"""The three classifiers on a planted-signal count matrix."""
import numpy as np

from vulnlearn.evaluation import confusion, metrics
from vulnlearn.models import predict, train_random_forest, train_resnet, train_svm

rng = np.random.default_rng(0)
X = rng.poisson(1.0, size=(500, 20)).astype(float)
y = rng.integers(0, 2, 500)
X[:, 0] = np.where(y == 1, rng.integers(1, 4, 500), 0)   # marker token
train, test = slice(0, 400), slice(400, None)

models = {
    "random forest": train_random_forest(X[train], y[train], n_trees=50),
    "linear svm": train_svm(X[train], y[train], kernel="linear"),
    "rbf svm": train_svm(X[train], y[train], kernel="rbf"),
    "resnet": train_resnet(X[train], y[train], epochs=20),
}
for name, model in models.items():
    preds = predict(model, X[test])
    p, r, f1, fpr = metrics(confusion(y[test], [q.label for q in preds]))
    print(f"{name:14} P={p:.3f} R={r:.3f} F1={f1:.3f} FPR={fpr:.3f}")
