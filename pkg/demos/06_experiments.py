"""Synthetic projects, one experiment, a grid and the hypothesis table.

Uses small model settings so it finishes in under a minute.
"""
import tempfile

from vulnlearn.evaluation import format_hypothesis_table, run_all_hypotheses
from vulnlearn.pipeline import (EmbeddingParams, ExperimentConfig, ForestParams, ResNetParams,
                                cross_project, default_grid, run_experiment, run_grid)
from vulnlearn.synth import generate_synthetic_corpus

out = tempfile.mkdtemp()
projects = [generate_synthetic_corpus(out, seed=s, n_files=200, vuln_rate=0.4)[1] for s in (1, 2, 3)]
print(projects[0].summary())

cfg = ExperimentConfig()   # filtered tokens, bag-of-words, random forest
row = run_experiment(cfg, projects[0])
print(cfg.hash, row.scores)

# transfer to the other two projects
for r in cross_project(projects[0], projects[1:], cfg):
    print(r.project, round(r.scores.f1, 3))

small = ExperimentConfig(embedding_params=EmbeddingParams(dim=16, epochs=2),
                         forest=ForestParams(n_trees=30),
                         resnet=ResNetParams(blocks=2, channels=4, epochs=8))
result = run_grid(default_grid(small), projects)
print(len(result.rows), "rows,", len(result.failures), "failed")
print(format_hypothesis_table(run_all_hypotheses(result.table())))
