"""Deterministic lexical-cue benchmark corpus for desk-scale pipeline runs.

Twelve relations are built from four families crossed with three variant
words.  Every relation has a unique trigger verb that identifies it, every
family has one characteristic tail entity, and all sentences share the head
entity and a pool of filler endings.  The point of the construction is that
family membership is recoverable from surface lexical cues alone, which is
the regime a small count-based backend can actually learn, while the full
label strings stay disjoint across zero-shot splits.

Sentences are all lowercase, so a sampling top-k of 8 at an untrained
context lands exactly on the reserved markers and template tokens; that is
what lets a freshly prompted generator recover the structured layout for a
label it never saw.
"""

from __future__ import annotations

from .backends import SamplingParams
from .corpus import Dataset, RelationTriplet, Sample
from .decoding import BranchParams
from .synthesis import PipelineConfig, SynthesisConfig

__all__ = [
    "FAMILIES",
    "VARIANTS",
    "relation_table",
    "build_lexical_cue_corpus",
    "desk_scale_config",
]

# family -> characteristic tail entity
FAMILIES = (
    ("rank", "captain"),
    ("employer", "acme"),
    ("city", "paris"),
    ("team", "rovers"),
)
VARIANTS = ("alpha", "beta", "gamma")

HEAD = "alice"

_PREPS = ("in", "at", "by", "near")
_NOUNS = ("autumn", "dawn", "dusk", "noon", "night", "morning", "evening", "winter")
_SUFFIXES = ("again", "today", "early", "late", "twice", "once", "quietly", "soon")


def _fillers() -> list[str]:
    return [f"{p} {n} {s}" for p in _PREPS for n in _NOUNS for s in _SUFFIXES]


def relation_table() -> list[tuple[str, str, str]]:
    """(label, trigger, tail) rows; families cycle fastest so ring neighbours mix."""
    rows = []
    for variant in VARIANTS:
        for family, tail in FAMILIES:
            rows.append((f"{family} {variant}", f"{variant}{family}s", tail))
    return rows


def build_lexical_cue_corpus(sentences_per_relation: int = 40) -> Dataset:
    """Corpus of 12 relations, each involved in ``sentences_per_relation`` sentences.

    Each relation gets single-triplet sentences plus two-triplet sentences
    pairing it with every other relation at ring distance 1 to 6, so any
    choice of unseen labels leaves some purely-unseen multi-triplet test
    sentences.  Fully deterministic; no randomness anywhere.
    """
    relations = relation_table()
    n = len(relations)
    fillers = _fillers()
    n_doubles_each = n - 1  # ring distances 1..6 reach every other relation
    n_singles = sentences_per_relation - n_doubles_each
    if n_singles < 1:
        raise ValueError(f"sentences_per_relation must exceed {n_doubles_each}")
    if n_singles > len(fillers):
        raise ValueError(f"at most {len(fillers) + n_doubles_each} sentences per relation")

    samples: list[Sample] = []
    for i, (label, trigger, tail) in enumerate(relations):
        for j in range(n_singles):
            filler = fillers[(j + 7 * i) % len(fillers)]
            sentence = f"{HEAD} {trigger} the {tail} {filler}"
            samples.append(
                Sample(sentence, (RelationTriplet(HEAD, tail, label),))
            )

    pairs = sorted(
        {frozenset((i, (i + d) % n)) for i in range(n) for d in range(1, n // 2 + 1)},
        key=lambda p: tuple(sorted(p)),
    )
    assert len(pairs) == n * (n - 1) // 2  # the ring distances cover every pair
    for p_idx, pair in enumerate(pairs):
        i, j = sorted(pair)
        label_i, trig_i, tail_i = relations[i]
        label_j, trig_j, tail_j = relations[j]
        filler = fillers[(11 * p_idx) % len(fillers)]
        sentence = (
            f"{HEAD} {trig_i} the {tail_i} and {HEAD} {trig_j} the {tail_j} {filler}"
        )
        samples.append(
            Sample(
                sentence,
                (
                    RelationTriplet(HEAD, tail_i, label_i),
                    RelationTriplet(HEAD, tail_j, label_j),
                ),
            )
        )
    return Dataset(tuple(samples))


def desk_scale_config(n_per_label: int = 60) -> PipelineConfig:
    """Pipeline configuration calibrated for this corpus and the trigram backend.

    A sampling top-k of 8 matches the reserved-plus-marker token band of the
    all-lowercase corpus, the short max_len caps wasted sampling on discarded
    attempts, n_per_label sits where synthetic counts outvote seen variants
    at the label stage without drowning the seen tail cues, and the keep-all
    threshold suits branch scores that spread mass over several tails.
    """
    return PipelineConfig(
        synthesis=SynthesisConfig(
            n_per_label=n_per_label,
            sampling=SamplingParams(temperature=1.0, top_k=8, max_len=28),
            max_attempts_factor=60,
        ),
        branch=BranchParams(b=4, threshold=float("-inf"), max_len=64),
    )
