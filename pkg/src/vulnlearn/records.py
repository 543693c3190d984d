from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class FeatureSource(str, enum.Enum):
    BOW = "bow"
    W2V = "word2vec"
    FT = "fasttext"
    ARCH = "arch"
    CONCAT = "concat"


@dataclass
class FileVector:
    file_id: str
    values: np.ndarray
    source: FeatureSource
    label: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"non-finite feature values for {self.file_id!r}")


def stack(vectors: list[FileVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, 0))
    return np.vstack([v.values for v in vectors])
