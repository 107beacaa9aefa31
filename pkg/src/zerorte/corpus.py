"""Dataset model, JSONL ingestion, zero-shot fold construction, and corpus statistics.

A dataset is a list of samples, each pairing a sentence with its gold relation
triplets.  Zero-shot folds partition the relation labels into disjoint
train / validation / test sets and route every sentence to exactly one split.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "RelationTriplet",
    "Sample",
    "Dataset",
    "FoldSplit",
    "CorpusError",
    "canonical_text",
    "canonical_triplet",
    "load_jsonl",
    "write_jsonl",
    "split_zero_shot",
    "dataset_stats",
    "diversity_stats",
    "explode_triplets",
    "save_fold",
    "load_fold",
]


class CorpusError(ValueError):
    """Malformed corpus data or invalid split configuration."""


def canonical_text(text: str) -> str:
    """Collapse runs of whitespace; case is preserved."""
    return " ".join(text.split())


def canonical_triplet(head: str, tail: str, label: str) -> tuple[str, str, str]:
    """Canonical (head, tail, label) key used for triplet equality everywhere."""
    return (canonical_text(head), canonical_text(tail), canonical_text(label))


@dataclass(frozen=True)
class RelationTriplet:
    """One extraction target: two entity spans and the relation between them.

    Both entities must occur verbatim inside the owning sentence; that
    invariant is checked by :class:`Sample`, which knows the sentence.
    """

    head: str
    tail: str
    label: str

    def __post_init__(self) -> None:
        if not self.head:
            raise CorpusError("triplet head must be non-empty")
        if not self.tail:
            raise CorpusError("triplet tail must be non-empty")
        if not self.label:
            raise CorpusError("triplet label must be non-empty")

    def canonical(self) -> tuple[str, str, str]:
        return canonical_triplet(self.head, self.tail, self.label)


@dataclass(frozen=True)
class Sample:
    """A sentence together with its (non-empty) list of gold triplets."""

    sentence: str
    triplets: tuple[RelationTriplet, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "triplets", tuple(self.triplets))
        if not self.sentence:
            raise CorpusError("sample sentence must be non-empty")
        if not self.triplets:
            raise CorpusError("sample must carry at least one triplet")
        seen: set[tuple[str, str, str]] = set()
        for t in self.triplets:
            if t.head not in self.sentence:
                raise CorpusError(
                    f"head {t.head!r} is not a substring of sentence {self.sentence!r}"
                )
            if t.tail not in self.sentence:
                raise CorpusError(
                    f"tail {t.tail!r} is not a substring of sentence {self.sentence!r}"
                )
            key = t.canonical()
            if key in seen:
                raise CorpusError(f"duplicate triplet {key} in sample")
            seen.add(key)

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(t.label for t in self.triplets)


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of samples; `labels` is derived, never stored."""

    samples: tuple[Sample, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(l for s in self.samples for l in s.labels)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


@dataclass(frozen=True)
class FoldSplit:
    """One seeded zero-shot partition with pairwise-disjoint gold label sets.

    ``seen_labels`` is the full non-test pool; the validation labels are a
    subset of it, and train gold is restricted to ``seen_labels`` minus
    ``validation_labels``.
    """

    seed: int
    unseen_labels: frozenset[str]
    validation_labels: frozenset[str]
    seen_labels: frozenset[str]
    train: Dataset
    validation: Dataset
    test: Dataset

    def __post_init__(self) -> None:
        if self.unseen_labels & self.seen_labels:
            raise CorpusError("unseen and seen label sets overlap")
        if not self.validation_labels <= self.seen_labels:
            raise CorpusError("validation labels must come from the seen pool")
        if not self.train.labels <= (self.seen_labels - self.validation_labels):
            raise CorpusError("train gold leaks outside seen-minus-validation labels")
        if not self.validation.labels <= self.validation_labels:
            raise CorpusError("validation gold leaks outside validation labels")
        if not self.test.labels <= self.unseen_labels:
            raise CorpusError("test gold leaks outside unseen labels")


def _triplet_from_json(raw: dict, where: str) -> RelationTriplet:
    try:
        return RelationTriplet(
            head=str(raw["head"]), tail=str(raw["tail"]), label=str(raw["label"])
        )
    except KeyError as e:
        raise CorpusError(f"{where}: triplet missing field {e.args[0]!r}") from e


def load_jsonl(path: str | Path) -> Dataset:
    """Load a dataset from JSONL, one ``{"sentence", "triplets"}`` object per line.

    Raises :class:`CorpusError` with the offending line number on malformed
    JSON or on any sample that violates the substring invariant.
    """
    p = Path(path)
    samples: list[Sample] = []
    with p.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{p}:{lineno}"
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{where}: invalid JSON: {e.msg}") from e
            if not isinstance(raw, dict) or "sentence" not in raw or "triplets" not in raw:
                raise CorpusError(f"{where}: expected object with 'sentence' and 'triplets'")
            triplets = [
                _triplet_from_json(t, where) for t in raw["triplets"]
            ]
            try:
                samples.append(Sample(sentence=str(raw["sentence"]), triplets=tuple(triplets)))
            except CorpusError as e:
                raise CorpusError(f"{where}: {e}") from e
    return Dataset(samples=tuple(samples))


def write_jsonl(data: Dataset, path: str | Path) -> Path:
    """Write a dataset in the JSONL schema accepted by :func:`load_jsonl`."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        for s in data:
            row = {
                "sentence": s.sentence,
                "triplets": [
                    {"head": t.head, "tail": t.tail, "label": t.label} for t in s.triplets
                ],
            }
            f.write(json.dumps(row, ensure_ascii=False) + "\n")
    return p


def explode_triplets(sample: Sample) -> list[Sample]:
    """One single-triplet view per gold triplet, sharing the sentence."""
    return [Sample(sentence=sample.sentence, triplets=(t,)) for t in sample.triplets]


def _filter_gold(samples: list[Sample], keep: frozenset[str]) -> list[Sample]:
    out = []
    for s in samples:
        kept = tuple(t for t in s.triplets if t.label in keep)
        if kept:
            out.append(Sample(sentence=s.sentence, triplets=kept))
    return out


def split_zero_shot(data: Dataset, m: int, v: int, seed: int) -> FoldSplit:
    """Partition ``data`` into a zero-shot fold with ``m`` unseen labels.

    Label selection draws uniformly without replacement from the
    lexicographically sorted label list using numpy's PCG64 generator seeded
    directly with ``seed``, so folds are reproducible bit-for-bit.  Sentences
    containing any unseen label go to test; of the rest, sentences containing
    any of the ``v`` validation labels go to validation; the remainder is
    train.  Gold triplets are filtered to each split's own label set, so a
    test sentence keeps only its unseen-label triplets.
    """
    labels = sorted(data.labels)
    if m < 1:
        raise CorpusError("m must be at least 1")
    if v < 0:
        raise CorpusError("v must be non-negative")
    if m + v >= len(labels):
        raise CorpusError(
            f"m + v must be smaller than the label count ({m} + {v} >= {len(labels)})"
        )
    rng = np.random.default_rng(seed)
    unseen = frozenset(rng.choice(labels, size=m, replace=False).tolist())
    remaining = sorted(set(labels) - unseen)
    validation = frozenset(rng.choice(remaining, size=v, replace=False).tolist()) if v else frozenset()
    seen = frozenset(labels) - unseen

    test_s: list[Sample] = []
    val_s: list[Sample] = []
    train_s: list[Sample] = []
    for s in data:
        if s.labels & unseen:
            test_s.append(s)
        elif s.labels & validation:
            val_s.append(s)
        else:
            train_s.append(s)

    fold = FoldSplit(
        seed=seed,
        unseen_labels=unseen,
        validation_labels=validation,
        seen_labels=seen,
        train=Dataset(tuple(_filter_gold(train_s, seen - validation))),
        validation=Dataset(tuple(_filter_gold(val_s, validation))),
        test=Dataset(tuple(_filter_gold(test_s, unseen))),
    )
    if not fold.test.samples:
        warnings.warn(f"fold seed={seed}: test split has no gold triplets", stacklevel=2)
    return fold


def dataset_stats(data: Dataset) -> dict:
    """Sample count, unique entity count, relation count, and mean sentence length.

    Lengths are whitespace word counts; entities are exact head/tail strings.
    """
    entities = {t.head for s in data for t in s.triplets}
    entities |= {t.tail for s in data for t in s.triplets}
    lengths = [len(s.sentence.split()) for s in data]
    return {
        "samples": len(data),
        "entities": len(entities),
        "relations": len(data.labels),
        "sentence_length": float(np.mean(lengths)) if lengths else 0.0,
    }


def diversity_stats(data: Dataset) -> dict:
    """Sample count, unique entities (exact strings), unique case-folded words."""
    entities = {t.head for s in data for t in s.triplets}
    entities |= {t.tail for s in data for t in s.triplets}
    words = {w.lower() for s in data for w in s.sentence.split()}
    return {
        "samples": len(data),
        "unique_entities": len(entities),
        "unique_words": len(words),
    }


def save_fold(fold: FoldSplit, out_dir: str | Path) -> Path:
    """Write the three split files plus a manifest; returns the manifest path."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    write_jsonl(fold.train, d / "train.jsonl")
    write_jsonl(fold.validation, d / "validation.jsonl")
    write_jsonl(fold.test, d / "test.jsonl")
    manifest = {
        "seed": fold.seed,
        "unseen_labels": sorted(fold.unseen_labels),
        "validation_labels": sorted(fold.validation_labels),
        "train": "train.jsonl",
        "validation": "validation.jsonl",
        "test": "test.jsonl",
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_fold(manifest_path: str | Path) -> FoldSplit:
    """Rebuild a fold from a manifest written by :func:`save_fold`."""
    p = Path(manifest_path)
    raw = json.loads(p.read_text(encoding="utf-8"))
    base = p.parent
    train = load_jsonl(base / raw["train"])
    validation = load_jsonl(base / raw["validation"])
    test = load_jsonl(base / raw["test"])
    unseen = frozenset(raw["unseen_labels"])
    val_labels = frozenset(raw["validation_labels"])
    seen = (train.labels | validation.labels | val_labels) - unseen
    return FoldSplit(
        seed=int(raw["seed"]),
        unseen_labels=unseen,
        validation_labels=val_labels,
        seen_labels=frozenset(seen),
        train=train,
        validation=validation,
        test=test,
    )
