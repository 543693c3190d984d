from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class ModelKind(str, enum.Enum):
    RF = "rf"
    SVM = "svm"
    RESNET = "resnet"


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float


class TrainedModel:
    """Common surface of the fitted classifiers.

    Subclasses implement :meth:`scores` and the array (de)serialization hooks.
    """

    kind: ModelKind
    threshold: float = 0.5

    def __init__(self, feature_dim: int, train_config: dict):
        self.feature_dim = int(feature_dim)
        self.train_config = dict(train_config)

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.feature_dim)
        if X.ndim != 2 or X.shape[1] != self.feature_dim:
            raise ValueError(f"expected feature dimension {self.feature_dim}, got shape {X.shape}")
        return X

    def scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict_labels(self, X) -> np.ndarray:
        return (self.scores(X) >= self.threshold).astype(np.int64)

    def _arrays(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    @classmethod
    def _from_arrays(cls, arrays: dict[str, np.ndarray], meta: dict) -> "TrainedModel":
        raise NotImplementedError


def predict(model: TrainedModel, X) -> list[Prediction]:
    """Labels and scores in input order."""
    s = model.scores(X)
    return [Prediction(int(v >= model.threshold), float(v)) for v in s]


def _registry() -> dict[ModelKind, type]:
    from .forest import RandomForestModel
    from .resnet import ResNetModel
    from .svm import SVMModel
    return {ModelKind.RF: RandomForestModel, ModelKind.SVM: SVMModel, ModelKind.RESNET: ResNetModel}


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Write an ``.npz`` archive with a JSON metadata header."""
    meta = {"format": "vulnlearn-model", "version": FORMAT_VERSION, "kind": model.kind.value,
            "feature_dim": model.feature_dim, "train_config": model.train_config}
    arrays = model._arrays()
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path: str | Path) -> TrainedModel:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format") != "vulnlearn-model" or meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: not a version {FORMAT_VERSION} vulnlearn model")
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    cls = _registry()[ModelKind(meta["kind"])]
    return cls._from_arrays(arrays, meta)


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise ValueError("need at least two training samples")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if np.unique(y).size < 2:
        raise ValueError("training labels contain a single class; both vulnerable (1) and "
                         "non-vulnerable (0) samples are required")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or infinite values")
    return X, y.astype(np.int64)


class Standardizer:
    """Per-feature centering and scaling; constant features are only centered."""

    def __init__(self, mean: np.ndarray, scale: np.ndarray):
        self.mean = mean
        self.scale = scale

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(mean, scale)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


def class_weights(y: np.ndarray, balanced: bool) -> np.ndarray:
    if not balanced:
        return np.ones(y.shape[0])
    counts = np.bincount(y, minlength=2).astype(np.float64)
    return (y.shape[0] / (2.0 * counts))[y]
