"""Extraction and classification metrics plus the threshold-tuning grid.

Triplets match on exact (head, tail, label) string equality after whitespace
collapsing; matching is case sensitive.  Per-sentence predictions are
deduplicated for matching, so each gold triplet counts at most once, but the
prediction denominator is the raw prediction count, which means duplicated
predictions cost precision.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import RelationTriplet, canonical_triplet

__all__ = [
    "MetricsBundle",
    "EvaluationError",
    "micro_prf",
    "single_accuracy",
    "zerorc_macro_f1",
    "per_label_breakdown",
    "evaluate_threshold_grid",
    "tune_threshold",
    "THRESHOLD_GRID_POINTS",
    "write_metrics_report",
    "write_per_label_csv",
]

# Number of evenly spaced candidate thresholds evaluated during tuning.
THRESHOLD_GRID_POINTS = 50

TripletLike = RelationTriplet | tuple[str, str, str]


class EvaluationError(ValueError):
    """Inputs violate a metric's preconditions."""


@dataclass(frozen=True)
class MetricsBundle:
    """All headline metrics of one evaluation run."""

    single_accuracy: float
    multi_precision: float
    multi_recall: float
    multi_f1: float
    zerorc_macro_f1: float
    per_label_f1: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "single_accuracy": self.single_accuracy,
            "multi_precision": self.multi_precision,
            "multi_recall": self.multi_recall,
            "multi_f1": self.multi_f1,
            "zerorc_macro_f1": self.zerorc_macro_f1,
            "per_label_f1": dict(sorted(self.per_label_f1.items())),
        }


def _canon(t: TripletLike) -> tuple[str, str, str]:
    if isinstance(t, RelationTriplet):
        return t.canonical()
    return canonical_triplet(*t)


def _prf(correct: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = correct / n_pred if n_pred else 0.0
    r = correct / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def micro_prf(
    gold: Mapping[str, Iterable[TripletLike]],
    pred: Mapping[str, Iterable[TripletLike]],
) -> tuple[float, float, float]:
    """Micro-averaged precision, recall, and F1 over per-sentence triplet sets.

    Both mappings must be keyed by the same sentence ids.  A prediction is
    correct iff it exactly equals a gold triplet of the same sentence.
    """
    if set(gold) != set(pred):
        raise EvaluationError("gold and prediction sentence id sets differ")
    correct = n_pred = n_gold = 0
    for sid in gold:
        gold_set = {_canon(t) for t in gold[sid]}
        pred_list = [_canon(t) for t in pred[sid]]
        correct += len(gold_set & set(pred_list))
        n_pred += len(pred_list)
        n_gold += len(gold_set)
    return _prf(correct, n_pred, n_gold)


def single_accuracy(
    gold: Mapping[str, TripletLike],
    pred: Mapping[str, TripletLike | None],
) -> float:
    """Exact-match accuracy for the one-triplet-per-sentence setting.

    Null predictions count as wrong.
    """
    if set(gold) != set(pred):
        raise EvaluationError("gold and prediction sentence id sets differ")
    if not gold:
        return 0.0
    hits = 0
    for sid, g in gold.items():
        p = pred[sid]
        if p is not None and _canon(p) == _canon(g):
            hits += 1
    return hits / len(gold)


def zerorc_macro_f1(
    gold_labels: Sequence[str], pred_labels: Sequence[str]
) -> tuple[float, float, float]:
    """Macro-averaged P/R/F1 of label classification over the gold label set.

    Per-label scores come from multiclass confusion counts; labels never
    predicted get precision 0.  The macro F1 is the unweighted mean of the
    per-label F1 values.
    """
    if len(gold_labels) != len(pred_labels):
        raise EvaluationError("gold and prediction label lists differ in length")
    universe = sorted(set(gold_labels))
    if not universe:
        raise EvaluationError("gold label list is empty")
    gold_count = Counter(gold_labels)
    pred_count = Counter(pred_labels)
    hit_count = Counter(g for g, p in zip(gold_labels, pred_labels) if g == p)
    ps, rs, f1s = [], [], []
    for label in universe:
        p, r, f1 = _prf(hit_count[label], pred_count[label], gold_count[label])
        ps.append(p)
        rs.append(r)
        f1s.append(f1)
    return float(np.mean(ps)), float(np.mean(rs)), float(np.mean(f1s))


def per_label_breakdown(
    gold: Mapping[str, Iterable[TripletLike]],
    pred: Mapping[str, Iterable[TripletLike]],
) -> dict[str, float]:
    """Micro F1 restricted to each gold label's triplets; gold-less labels absent."""
    if set(gold) != set(pred):
        raise EvaluationError("gold and prediction sentence id sets differ")
    labels = {_canon(t)[2] for ts in gold.values() for t in ts}
    out: dict[str, float] = {}
    for label in sorted(labels):
        g = {sid: [t for t in ts if _canon(t)[2] == label] for sid, ts in gold.items()}
        p = {sid: [t for t in ts if _canon(t)[2] == label] for sid, ts in pred.items()}
        out[label] = micro_prf(g, p)[2]
    return out


def evaluate_threshold_grid(
    candidates: Mapping[str, Sequence],
    gold: Mapping[str, Iterable[TripletLike]],
) -> list[tuple[float, float]]:
    """(threshold, multi-triplet F1) at each of the evenly spaced grid points.

    The grid spans [min score, max score] of all candidates with
    ``THRESHOLD_GRID_POINTS`` points.  Candidates are scored triplet
    candidates (anything with ``.triplet`` and ``.score``); sentences with
    gold but no candidates simply predict nothing.
    """
    scores = [c.score for cands in candidates.values() for c in cands]
    if not scores:
        raise EvaluationError("cannot tune a threshold without candidates")
    grid = np.linspace(min(scores), max(scores), THRESHOLD_GRID_POINTS)
    gold_full = {sid: list(ts) for sid, ts in gold.items()}
    for sid in candidates:
        gold_full.setdefault(sid, [])
    out = []
    for t in grid:
        pred = {
            sid: [c.triplet for c in candidates.get(sid, []) if c.score >= t]
            for sid in gold_full
        }
        _, _, f1 = micro_prf(gold_full, pred)
        out.append((float(t), float(f1)))
    return out


def tune_threshold(
    candidates: Mapping[str, Sequence],
    gold: Mapping[str, Iterable[TripletLike]],
) -> float:
    """The F1-maximizing grid threshold; ties prefer the higher threshold."""
    best_t, best_f1 = None, -1.0
    for t, f1 in evaluate_threshold_grid(candidates, gold):
        if f1 > best_f1 or (f1 == best_f1 and t > best_t):
            best_t, best_f1 = t, f1
    return best_t


def write_metrics_report(
    metrics: MetricsBundle, path: str | Path, fold_meta: dict | None = None
) -> Path:
    """JSON report: the metric bundle plus optional fold metadata."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    payload = {"fold": fold_meta or {}, "metrics": metrics.to_dict()}
    p.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return p


def write_per_label_csv(per_label: Mapping[str, float], path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["label", "f1"])
        for label in sorted(per_label):
            writer.writerow([label, f"{per_label[label]:.6f}"])
    return p
