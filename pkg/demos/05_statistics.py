"""Scores, aggregation and the paired t-test."""
import numpy as np

from vulnlearn.evaluation import ScoreSet, aggregate, paired_t_test, pr_auc, roc_auc, score_set

labels = [1, 1, 1, 0, 0, 0, 0, 1]
scores = [0.9, 0.8, 0.4, 0.35, 0.3, 0.2, 0.6, 0.7]
print("ROC AUC", roc_auc(scores, labels), "PR AUC", round(pr_auc(scores, labels), 4))

s = score_set(labels, [int(v >= 0.5) for v in scores], scores)
print(s)

# x sums the six scores (with 1 - FPR); z rescales x within a comparison group
group = aggregate([s, ScoreSet(0.5, 0.5, 0.5, 0.5, 0.5, 0.5), ScoreSet(1, 1, 1, 0, 1, 1)])
print([(round(g.x, 3), round(g.z, 3)) for g in group])

# two-tailed paired t-test on z values
print(paired_t_test([1, 2, 3, 4, 5], [0, 0, 0, 0, 0]))
rng = np.random.default_rng(0)
a = rng.uniform(size=30)
print(paired_t_test(a, a + rng.normal(0.05, 0.05, 30)))
