"""Learning metrics, score aggregation and paired hypothesis tests."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import special, stats

ALPHA = 0.05


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class ScoreSet:
    precision: float
    recall: float
    f1: float
    fpr: float
    roc_auc: float
    pr_auc: float
    x: float = math.nan
    z: float = math.nan

    def __post_init__(self):
        if math.isnan(self.x):
            self.x = aggregate_value(self)


def confusion(labels: Sequence[int], predictions: Sequence[int]) -> Confusion:
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape[0] if y.ndim else 0} labels "
                         f"vs {p.shape[0] if p.ndim else 0} predictions")
    if not (np.isin(y, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("labels and predictions must be binary")
    return Confusion(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


def metrics(c: Confusion) -> tuple[float, float, float, float]:
    """Precision, recall, F1 and false-positive rate.

    Zero denominators give 0 for the affected metric; F1 is 0 when
    precision or recall is 0. Every value is a single integer division, so
    each is the correctly rounded float of its exact ratio.
    """
    p = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    r = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    # harmonic mean of P and R, written as one division
    f1 = 2 * c.tp / (2 * c.tp + c.fp + c.fn) if c.tp else 0.0
    fpr = c.fp / (c.fp + c.tn) if c.fp + c.tn else 0.0
    return p, r, f1, fpr


def _check_binary_classes(labels: np.ndarray) -> tuple[int, int]:
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be binary")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present to compute an AUC")
    return n_pos, n_neg


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """ROC AUC as the normalized Mann-Whitney U statistic (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos, n_neg = _check_binary_classes(y)
    ranks = stats.rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def precision_recall_curve(scores: Sequence[float], labels: Sequence[int]):
    """Precision and recall at each distinct score threshold, highest first."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos, _ = _check_binary_classes(y)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(y == 1)[last]
    predicted = last + 1
    return tp / predicted, tp / n_pos, s[last]


def pr_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the precision-recall step curve (average precision)."""
    precision, recall, _ = precision_recall_curve(scores, labels)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def score_set(labels, predictions, scores) -> ScoreSet:
    p, r, f1, fpr = metrics(confusion(labels, predictions))
    return ScoreSet(p, r, f1, fpr, roc_auc(scores, labels), pr_auc(scores, labels))


def aggregate_value(s: ScoreSet) -> float:
    return s.precision + s.recall + s.f1 + (1.0 - s.fpr) + s.roc_auc + s.pr_auc


def min_max(values: Sequence[float]) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant group maps to all zeros."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return x
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def aggregate(scoresets: list[ScoreSet]) -> list[ScoreSet]:
    """Fill ``x`` (sum of the six scores) and ``z`` (min-max over the group) in place."""
    if not scoresets:
        raise ValueError("aggregate needs at least one score set")
    for s in scoresets:
        s.x = aggregate_value(s)
    for s, z in zip(scoresets, min_max([s.x for s in scoresets])):
        s.z = float(z)
    return scoresets


def t_sf(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t through the regularized incomplete beta."""
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_t_test(za: Sequence[float], zb: Sequence[float]) -> float:
    """Two-tailed paired t-test p-value with ``n - 1`` degrees of freedom.

    When all differences are equal the statistic is undefined; the p-value is
    1.0 for a zero mean difference and 0.0 otherwise.
    """
    a = np.asarray(za, dtype=np.float64)
    b = np.asarray(zb, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    # differences identical up to rounding count as zero variance
    if sd <= 1e-12 * max(1.0, abs(mean)):
        return 1.0 if abs(mean) <= 1e-12 else 0.0
    t = mean / (sd / math.sqrt(n))
    return t_sf(t, n - 1)


# ---------------------------------------------------------------------------
# hypotheses


@dataclass(frozen=True)
class Hypothesis:
    id: int
    description: str
    factor: str
    arm_a: Mapping[str, str]
    arm_b: Mapping[str, str]
    pair_on: tuple[str, ...]


_TOKENS = {"features": "tokens"}
# feature comparisons use one reference token pipeline
_BOW = {"tokenization": "filtered", "embedding": "bow"}

HYPOTHESES: dict[int, Hypothesis] = {h.id: h for h in [
    Hypothesis(1, "all tokens vs. tokens without comments and symbols", "tokenization",
               {**_TOKENS, "tokenization": "raw"}, {**_TOKENS, "tokenization": "filtered"},
               ("project", "embedding", "model")),
    Hypothesis(2, "bag-of-words vs. word2vec", "embedding",
               {**_TOKENS, "embedding": "bow"}, {**_TOKENS, "embedding": "word2vec"},
               ("project", "tokenization", "model")),
    Hypothesis(3, "bag-of-words vs. fastText", "embedding",
               {**_TOKENS, "embedding": "bow"}, {**_TOKENS, "embedding": "fasttext"},
               ("project", "tokenization", "model")),
    Hypothesis(4, "word2vec vs. fastText", "embedding",
               {**_TOKENS, "embedding": "word2vec"}, {**_TOKENS, "embedding": "fasttext"},
               ("project", "tokenization", "model")),
    Hypothesis(5, "tokens vs. architectural metrics", "features",
               {**_BOW, "features": "tokens"}, {**_BOW, "features": "arch"},
               ("project", "model")),
    Hypothesis(6, "tokens vs. tokens plus architectural metrics", "features",
               {**_BOW, "features": "tokens"}, {**_BOW, "features": "tokens+arch"},
               ("project", "model")),
    Hypothesis(7, "architectural metrics vs. tokens plus architectural metrics", "features",
               {**_BOW, "features": "arch"}, {**_BOW, "features": "tokens+arch"},
               ("project", "model")),
    Hypothesis(8, "random forest vs. SVM", "model",
               {**_TOKENS, "model": "rf"}, {**_TOKENS, "model": "svm"},
               ("project", "tokenization", "embedding")),
    Hypothesis(9, "random forest vs. ResNet", "model",
               {**_TOKENS, "model": "rf"}, {**_TOKENS, "model": "resnet"},
               ("project", "tokenization", "embedding")),
    Hypothesis(10, "SVM vs. ResNet", "model",
               {**_TOKENS, "model": "svm"}, {**_TOKENS, "model": "resnet"},
               ("project", "tokenization", "embedding")),
]}


@dataclass
class HypothesisOutcome:
    hypothesis_id: int
    p_value: float
    significant: bool
    group_sizes: tuple[int, int]
    mean_z: tuple[float, float] = (math.nan, math.nan)
    description: str = ""

    @property
    def conclusion(self) -> str:
        return "Accept" if self.significant else "Reject"


class MissingArmError(ValueError):
    def __init__(self, hypothesis_id: int, missing: list[dict]):
        self.hypothesis_id = hypothesis_id
        self.missing = missing
        shown = "; ".join(json.dumps(m, sort_keys=True) for m in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        super().__init__(f"hypothesis {hypothesis_id}: missing configurations: {shown}{more}")


def _matches(row: Mapping, selector: Mapping[str, str]) -> bool:
    return all(str(row.get(k)) == v for k, v in selector.items())


def _usable(row: Mapping) -> bool:
    x = row.get("x")
    try:
        return x is not None and math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


def hypothesis_pairs(hypothesis: Hypothesis, table: Iterable[Mapping]):
    """Rows of both arms matched on the pairing key.

    Returns ``(pairs, missing)``: ``pairs`` is a list of ``(row_a, row_b)``
    sorted by key; ``missing`` lists configurations whose partner is absent.
    """
    arm_a: dict[tuple, Mapping] = {}
    arm_b: dict[tuple, Mapping] = {}
    for row in table:
        if not _usable(row):
            continue
        key = tuple(str(row.get(k)) for k in hypothesis.pair_on)
        if _matches(row, hypothesis.arm_a):
            arm_a.setdefault(key, row)
        elif _matches(row, hypothesis.arm_b):
            arm_b.setdefault(key, row)
    missing = []
    for key in sorted(set(arm_a) ^ set(arm_b)):
        arm = hypothesis.arm_b if key in arm_a else hypothesis.arm_a
        missing.append({**dict(zip(hypothesis.pair_on, key)), **arm})
    if not arm_a and not arm_b:
        missing = [dict(hypothesis.arm_a), dict(hypothesis.arm_b)]
    elif not arm_a or not arm_b:
        absent = hypothesis.arm_a if not arm_a else hypothesis.arm_b
        missing = missing or [dict(absent)]
    pairs = [(arm_a[k], arm_b[k]) for k in sorted(set(arm_a) & set(arm_b))]
    return pairs, missing


def run_hypothesis(hypothesis_id: int, table: Iterable[Mapping], alpha: float = ALPHA) -> HypothesisOutcome:
    """Paired t-test between the two arms of one hypothesis.

    ``z`` is recomputed by min-max scaling the aggregate ``x`` of every row
    entering the comparison (both arms pooled).
    """
    try:
        hyp = HYPOTHESES[hypothesis_id]
    except KeyError:
        raise ValueError(f"unknown hypothesis {hypothesis_id}; expected 1..10") from None
    pairs, missing = hypothesis_pairs(hyp, list(table))
    if missing:
        raise MissingArmError(hypothesis_id, missing)
    xa = [float(a["x"]) for a, _ in pairs]
    xb = [float(b["x"]) for _, b in pairs]
    z = min_max(xa + xb)
    za, zb = z[:len(xa)], z[len(xa):]
    p = paired_t_test(za, zb)
    return HypothesisOutcome(hypothesis_id, p, p < alpha, (len(za), len(zb)),
                             (float(za.mean()), float(zb.mean())), hyp.description)


def run_all_hypotheses(table: Iterable[Mapping], alpha: float = ALPHA) -> list[HypothesisOutcome]:
    table = list(table)
    return [run_hypothesis(h, table, alpha) for h in sorted(HYPOTHESES)]


def pairing_audit(table: Iterable[Mapping]) -> dict[int, dict]:
    """Pair counts and missing partners for every hypothesis."""
    table = list(table)
    report = {}
    for h in sorted(HYPOTHESES):
        pairs, missing = hypothesis_pairs(HYPOTHESES[h], table)
        report[h] = {"pairs": len(pairs), "missing": missing}
    return report


def format_hypothesis_table(outcomes: list[HypothesisOutcome]) -> str:
    """Three-row text table: Hypothesis / p-value / Conclusion."""
    cells = [["Hypothesis", *(str(o.hypothesis_id) for o in outcomes)],
             ["p-value", *(f"{o.p_value:.3g}" for o in outcomes)],
             ["Conclusion", *(o.conclusion for o in outcomes)]]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    return "\n".join(" | ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells)


def write_hypothesis_report(outcomes: list[HypothesisOutcome], path: str | Path,
                            fmt: str | None = None) -> None:
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "csv").lower()
    rows = [{"hypothesis": o.hypothesis_id, "p_value": o.p_value, "conclusion": o.conclusion}
            for o in outcomes]
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["hypothesis", "p_value", "conclusion"])
            writer.writeheader()
            writer.writerows(rows)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
