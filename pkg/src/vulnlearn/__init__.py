"""Learning-based vulnerability prediction from source tokens and architecture metrics."""
from .evaluation import HYPOTHESES, ScoreSet, run_all_hypotheses, run_hypothesis
from .pipeline import (DatasetManifest, ExperimentConfig, cross_project, default_grid,
                       emit_report, load_manifest, run_experiment, run_grid)
from .synth import Signal, generate_synthetic_corpus
from .tokenizer import Strategy, TokenStream, tokenize

__version__ = "0.1.0"

__all__ = [
    "HYPOTHESES", "DatasetManifest", "ExperimentConfig", "ScoreSet", "Signal", "Strategy",
    "TokenStream", "cross_project", "default_grid", "emit_report", "generate_synthetic_corpus",
    "load_manifest", "run_all_hypotheses", "run_experiment", "run_grid", "run_hypothesis",
    "tokenize",
]
