"""Datasets, experiment configuration and the experiment runners.

An experiment tokenizes a labeled project, builds token and/or
architectural features, trains one classifier on a stratified training
partition and scores it on the held-out files. Grids of experiments produce
the table consumed by :func:`vulnlearn.evaluation.run_all_hypotheses`.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from . import archgraph, embedding, evaluation
from .models import predict, train_random_forest, train_resnet, train_svm
from .tokenizer import TokenStream, tokenize

log = logging.getLogger(__name__)

WORKERS_ENV = "VULNLEARN_WORKERS"

REPORT_COLUMNS = ["project", "tokenization", "embedding", "features", "model", "precision",
                  "recall", "f1", "fpr", "roc_auc", "pr_auc", "x", "z"]
_SCORES = REPORT_COLUMNS[5:]

TOKENIZATIONS = ("raw", "filtered")
EMBEDDINGS = ("bow", "word2vec", "fasttext")
FEATURES = ("tokens", "arch", "tokens+arch")
MODELS = ("rf", "svm", "resnet")


class ManifestError(ValueError):
    pass


class DegeneratePartitionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# manifests


@dataclass
class DatasetManifest:
    project: str
    root: Path
    entries: list[tuple[str, int]]

    @property
    def n_vulnerable(self) -> int:
        return sum(label for _, label in self.entries)

    @property
    def n_files(self) -> int:
        return len(self.entries)

    @property
    def vulnerability_rate(self) -> float:
        return self.n_vulnerable / self.n_files if self.entries else 0.0

    def summary(self) -> str:
        return (f"{self.project}: {self.n_files} files, {self.n_vulnerable} vulnerable "
                f"({self.vulnerability_rate:.0%})")

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["path", "label"])
            writer.writerows(self.entries)


def load_manifest(path: str | Path, root: str | Path | None = None, project: str | None = None,
                  check_files: bool = True) -> DatasetManifest:
    """Read a ``path,label`` CSV manifest.

    Paths are relative to ``root`` (default: the manifest's directory), and
    the project name defaults to the root directory name.
    """
    path = Path(path)
    root = Path(root) if root is not None else path.parent
    entries: list[tuple[str, int]] = []
    seen: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["path", "label"]:
            raise ManifestError(f"{path}:1: expected header 'path,label', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise ManifestError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            rel, label = row[0].strip(), row[1].strip()
            if label not in ("0", "1"):
                raise ManifestError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            if rel in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate path {rel!r} "
                                    f"(first seen on line {seen[rel]})")
            if check_files and not (root / rel).is_file():
                raise ManifestError(f"{path}:{lineno}: file not found: {root / rel}")
            seen[rel] = lineno
            entries.append((rel, int(label)))
    return DatasetManifest(project or root.resolve().name, root, entries)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class EmbeddingParams:
    dim: int = 300
    window: int = 5
    min_count: int = 2
    bow_min_count: int = 1
    negatives: int = 5
    epochs: int = 5
    ngram_min: int = 3
    ngram_max: int = 6
    buckets: int = 2 ** 12


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    max_features: str = "sqrt"


@dataclass(frozen=True)
class SVMParams:
    kernel: str = "rbf"
    C: float = 1.0
    gamma: float | None = None
    epochs: int = 50


@dataclass(frozen=True)
class ResNetParams:
    blocks: int = 3
    channels: int = 8
    epochs: int = 30
    learning_rate: float = 3e-3
    batch_size: int = 32


@dataclass(frozen=True)
class ExperimentConfig:
    tokenization: str = "filtered"
    embedding: str = "bow"
    features: str = "tokens"
    model: str = "rf"
    train_fraction: float = 0.8
    split_seed: int = 0
    seed: int = 0
    balanced: bool = False
    drop_strings: bool = False
    embedding_params: EmbeddingParams = field(default_factory=EmbeddingParams)
    forest: ForestParams = field(default_factory=ForestParams)
    svm: SVMParams = field(default_factory=SVMParams)
    resnet: ResNetParams = field(default_factory=ResNetParams)

    def __post_init__(self):
        for name, allowed in (("tokenization", TOKENIZATIONS), ("embedding", EMBEDDINGS),
                              ("features", FEATURES), ("model", MODELS)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        nested = {"embedding_params": EmbeddingParams, "forest": ForestParams,
                  "svm": SVMParams, "resnet": ResNetParams}
        for key, sub in nested.items():
            if key in data and isinstance(data[key], dict):
                data[key] = sub(**data[key])
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return ExperimentConfig.from_dict(data)


def default_grid(base: ExperimentConfig | None = None,
                 reference_tokenization: str = "filtered") -> list[ExperimentConfig]:
    """Every configuration needed by the ten hypotheses.

    All tokenization x embedding x model cells on token features, plus the
    architectural-only and combined cells (bag-of-words, one tokenization)
    for each model.
    """
    base = base or ExperimentConfig()
    configs = [base.replace(tokenization=t, embedding=e, features="tokens", model=m)
               for t, e, m in itertools.product(TOKENIZATIONS, EMBEDDINGS, MODELS)]
    for feats in ("arch", "tokens+arch"):
        configs += [base.replace(tokenization=reference_tokenization, embedding="bow",
                                 features=feats, model=m) for m in MODELS]
    return configs


# ---------------------------------------------------------------------------
# project data and features


class ProjectData:
    """Sources of one manifest with cached token streams and graph metrics."""

    def __init__(self, manifest: DatasetManifest):
        self.manifest = manifest
        self.paths = [p for p, _ in manifest.entries]
        self.labels = np.array([label for _, label in manifest.entries], dtype=np.int64)
        self.sources = [(manifest.root / p).read_text(encoding="utf-8", errors="replace")
                        for p in self.paths]
        self._streams: dict[tuple, list[TokenStream]] = {}
        self._arch: np.ndarray | None = None
        self.cache: dict = {}

    @property
    def project(self) -> str:
        return self.manifest.project

    def streams(self, strategy: str, drop_strings: bool = False) -> list[TokenStream]:
        key = (strategy, drop_strings)
        if key not in self._streams:
            self._streams[key] = [tokenize(src, strategy, file_id=p, drop_strings=drop_strings)
                                  for p, src in zip(self.paths, self.sources)]
        return self._streams[key]

    def arch_matrix(self) -> np.ndarray:
        """Eight metrics per manifest file, computed on the whole project graph."""
        if self._arch is None:
            # manifest files the extractor skipped still get (isolated) metrics
            G = archgraph.extract_dependencies(self.manifest.root)
            graph = archgraph.DependencyGraph(set(G.nodes) | set(self.paths), G.edges)
            by_file = {m.file_id: m.as_array() for m in archgraph.all_metrics(graph)}
            self._arch = np.vstack([by_file[p] for p in self.paths]) if self.paths else \
                np.zeros((0, len(archgraph.METRIC_NAMES)))
        return self._arch


def stratified_split(labels: np.ndarray, train_fraction: float, seed: int):
    """Per-class random split; ``train_fraction == 1`` evaluates on the training set."""
    labels = np.asarray(labels)
    idx = np.arange(labels.size)
    if train_fraction >= 1.0:
        return idx, idx
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in (0, 1):
        members = rng.permutation(idx[labels == cls])
        k = int(round(train_fraction * members.size))
        train.append(members[:k])
        test.append(members[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


class TokenFeaturizer:
    """Fits vocabulary, idf and (for dense kinds) embeddings on training streams only."""

    def __init__(self, kind: str, params: EmbeddingParams, seed: int):
        self.kind = kind
        self.params = params
        self.seed = seed
        self.vocab = None
        self.model = None
        self.idf = None

    def fit(self, streams: Sequence[TokenStream]) -> "TokenFeaturizer":
        p = self.params
        if self.kind == "bow":
            self.vocab = embedding.build_vocab(streams, p.bow_min_count)
            return self
        self.vocab = embedding.build_vocab(streams, p.min_count)
        if len(self.vocab) == 0:
            raise ValueError("training vocabulary is empty after min_count filtering")
        common = dict(dim=p.dim, window=p.window, min_count=p.min_count,
                      negatives=p.negatives, epochs=p.epochs, seed=self.seed, vocab=self.vocab)
        if self.kind == "word2vec":
            self.model = embedding.train_word2vec(streams, **common)
        else:
            self.model = embedding.train_fasttext(streams, ngram_min=p.ngram_min,
                                                  ngram_max=p.ngram_max, buckets=p.buckets,
                                                  **common)
        self.idf = embedding.idf(self.vocab)
        return self

    def transform(self, streams: Sequence[TokenStream]) -> np.ndarray:
        if self.kind == "bow":
            if len(self.vocab) == 0:
                return np.zeros((len(streams), 0))
            return np.vstack([embedding.bow_vector(s, self.vocab) for s in streams])
        return np.vstack([embedding.compose_file_vector(s, self.model, self.vocab, self.idf)
                          for s in streams]).reshape(len(streams), self.model.dim)


def _token_featurizer(data: ProjectData, config: ExperimentConfig, train_idx) -> TokenFeaturizer:
    key = ("featurizer", config.tokenization, config.drop_strings, config.embedding,
           config.embedding_params, config.seed, tuple(train_idx.tolist()))
    if key not in data.cache:
        streams = data.streams(config.tokenization, config.drop_strings)
        fz = TokenFeaturizer(config.embedding, config.embedding_params, config.seed)
        data.cache[key] = fz.fit([streams[i] for i in train_idx])
    return data.cache[key]


def _features(config: ExperimentConfig, fz: TokenFeaturizer | None, data: ProjectData,
              idx: np.ndarray) -> np.ndarray:
    parts = []
    if config.features in ("tokens", "tokens+arch"):
        streams = data.streams(config.tokenization, config.drop_strings)
        parts.append(fz.transform([streams[i] for i in idx]))
    if config.features in ("arch", "tokens+arch"):
        parts.append(data.arch_matrix()[idx])
    return np.hstack(parts) if len(parts) > 1 else parts[0]


def train_model(config: ExperimentConfig, X: np.ndarray, y: np.ndarray):
    if config.model == "rf":
        f = config.forest
        return train_random_forest(X, y, n_trees=f.n_trees, max_depth=f.max_depth,
                                   max_features=f.max_features, seed=config.seed,
                                   balanced=config.balanced)
    if config.model == "svm":
        s = config.svm
        return train_svm(X, y, kernel=s.kernel, C=s.C, gamma=s.gamma, epochs=s.epochs,
                         seed=config.seed, balanced=config.balanced)
    r = config.resnet
    return train_resnet(X, y, blocks=r.blocks, channels=r.channels, epochs=r.epochs,
                        learning_rate=r.learning_rate, batch_size=r.batch_size,
                        seed=config.seed, balanced=config.balanced)


# ---------------------------------------------------------------------------
# experiment rows


@dataclass
class ExperimentRow:
    project: str
    config: ExperimentConfig
    scores: evaluation.ScoreSet | None = None
    error: str | None = None
    z: float = math.nan

    @property
    def config_hash(self) -> str:
        return self.config.hash

    @property
    def ok(self) -> bool:
        return self.scores is not None

    def as_dict(self) -> dict:
        c, s = self.config, self.scores
        row = {"project": self.project, "tokenization": c.tokenization, "embedding": c.embedding,
               "features": c.features, "model": c.model}
        for name in _SCORES[:-1]:
            row[name] = getattr(s, name) if s is not None else math.nan
        row["z"] = self.z
        return row


def _fit_and_score(config: ExperimentConfig, train: ProjectData, train_idx,
                   test: ProjectData, test_idx):
    fz = None
    if config.features != "arch":
        fz = _token_featurizer(train, config, train_idx)
    X_train = _features(config, fz, train, train_idx)
    X_test = _features(config, fz, test, test_idx)
    model = train_model(config, X_train, train.labels[train_idx])
    preds = predict(model, X_test)
    y_test = test.labels[test_idx]
    scores = evaluation.score_set(y_test, [p.label for p in preds], [p.score for p in preds])
    return scores, model


def run_experiment(config: ExperimentConfig, manifest: DatasetManifest,
                   data: ProjectData | None = None, return_model: bool = False):
    """Train on a stratified partition of one project and score the held-out files."""
    data = data or ProjectData(manifest)
    train_idx, test_idx = stratified_split(data.labels, config.train_fraction, config.split_seed)
    for part, idx in (("training", train_idx), ("test", test_idx)):
        if np.unique(data.labels[idx]).size < 2:
            raise DegeneratePartitionError(
                f"{data.project}: the {part} partition has a single class "
                f"(split_seed={config.split_seed}, train_fraction={config.train_fraction}); "
                f"try a different split_seed")
    scores, model = _fit_and_score(config, data, train_idx, data, test_idx)
    row = ExperimentRow(data.project, config, scores)
    return (row, model) if return_model else row


def cross_project(train_manifest: DatasetManifest, test_manifests: Iterable[DatasetManifest],
                  config: ExperimentConfig) -> list[ExperimentRow]:
    """Train on every file of one project and score each other project in full.

    Vocabulary, idf, embeddings, standardization and model are fitted on the
    training project alone.
    """
    train = ProjectData(train_manifest)
    train_idx = np.arange(len(train.paths))
    if np.unique(train.labels).size < 2:
        raise DegeneratePartitionError(f"{train.project}: training project has a single class")
    rows = []
    for manifest in test_manifests:
        if not manifest.entries:
            log.warning("skipping empty test manifest for %s", manifest.project)
            continue
        test = ProjectData(manifest)
        scores, _ = _fit_and_score(config, train, train_idx, test, np.arange(len(test.paths)))
        rows.append(ExperimentRow(f"{train.project}->{test.project}", config, scores))
    return rows


@dataclass
class GridResult:
    rows: list[ExperimentRow]

    @property
    def failures(self) -> list[ExperimentRow]:
        return [r for r in self.rows if not r.ok]

    @property
    def succeeded(self) -> list[ExperimentRow]:
        return [r for r in self.rows if r.ok]

    def table(self) -> list[dict]:
        return report_rows(self.succeeded)


def _run_project(manifest: DatasetManifest, configs: list[ExperimentConfig]) -> list[ExperimentRow]:
    try:
        data = ProjectData(manifest)
    except Exception as exc:           # unreadable project: every cell fails
        return [ExperimentRow(manifest.project, c, error=f"{type(exc).__name__}: {exc}")
                for c in configs]
    rows = []
    for config in sorted(configs, key=lambda c: c.hash):
        try:
            rows.append(run_experiment(config, manifest, data))
        except Exception as exc:
            log.warning("%s %s failed: %s", manifest.project, config.hash, exc)
            rows.append(ExperimentRow(manifest.project, config, error=f"{type(exc).__name__}: {exc}"))
    return rows


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, workers)


def run_grid(configs: Sequence[ExperimentConfig], manifests: Sequence[DatasetManifest],
             workers: int | None = None) -> GridResult:
    """Run every (manifest, config) cell; a failing cell is recorded, not raised.

    Cells of one project share tokenization and embedding caches and run in
    config-hash order. Projects run in parallel when ``workers > 1``.
    """
    configs = list(configs)
    workers = worker_count(workers)
    if workers > 1 and len(manifests) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_project, manifests, [configs] * len(manifests)))
    else:
        chunks = [_run_project(m, configs) for m in manifests]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.project, r.config_hash))
    _fill_z(rows)
    return GridResult(rows)


def _fill_z(rows: list[ExperimentRow]) -> None:
    ok = [r for r in rows if r.ok]
    if ok:
        for r, z in zip(ok, evaluation.min_max([r.scores.x for r in ok])):
            r.z = float(z)


# ---------------------------------------------------------------------------
# reports


def report_rows(rows: Iterable[ExperimentRow]) -> list[dict]:
    rows = list(rows)
    _fill_z(rows)
    return [r.as_dict() for r in rows if r.ok]


def emit_report(rows: Iterable[ExperimentRow | dict], path: str | Path, fmt: str | None = None) -> Path:
    """Write experiment rows as CSV or JSON with :data:`REPORT_COLUMNS`.

    ``z`` is the min-max normalized aggregate over all rows in the report.
    """
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    rows = list(rows)
    if rows and isinstance(rows[0], ExperimentRow):
        table = report_rows(rows)
    else:
        table = [dict(r) for r in rows]
    table = [{k: r[k] for k in REPORT_COLUMNS} for r in table]
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
                writer.writeheader()
                for r in table:
                    writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        elif fmt == "json":
            path.write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
        else:
            raise ValueError(f"unknown report format {fmt!r}; use csv or json")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def read_report(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: (float(v) if k in _SCORES else v) for k, v in row.items()}
                for row in csv.DictReader(fh)]
