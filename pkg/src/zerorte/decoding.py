"""Extraction decoding over any backend: single-triplet, entity-conditioned
relation classification, and branched triplet search for multi-triplet output.

Triplet search branches generation at exactly three points, the first token
of the head entity, of the tail entity, and of the relation label, taking the
top-b tokens at each.  Every other token is decoded greedily.  A candidate's
score is the sum of its three first-token log probabilities and nothing else;
candidates are deduplicated (max score wins), thresholded, and returned in
descending score order.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .backends import EOS, Backend, SamplingParams, TokenDistribution, sequence_log_prob
from .corpus import RelationTriplet
from .templates import DecodeError, decode_extractor_output, encode_zerorc_prefix, extractor_input

__all__ = [
    "BranchParams",
    "TripletCandidate",
    "decode_single",
    "classify_zerorc",
    "triplet_search_decode",
    "write_candidates",
    "read_candidates",
]

# Whitespace-token forms of the structured markers.
_HEAD_TOKENS = ("Head", "Entity:")
_TAIL_TOKENS = ("Tail", "Entity:")
_REL_TOKENS = ("Relation:",)


@dataclass(frozen=True)
class BranchParams:
    """Branch width and score threshold for triplet search.

    The threshold is a natural-log probability; the production default
    corresponds to a probability cutoff of about 0.371.  Use ``-inf`` to
    keep all candidates.
    """

    b: int = 4
    threshold: float = -0.9906
    max_len: int = 128

    def __post_init__(self) -> None:
        if self.b < 1:
            raise ValueError("branch width b must be at least 1")
        if math.isnan(self.threshold) or self.threshold == math.inf:
            raise ValueError("threshold must be finite or -inf")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")


@dataclass(frozen=True)
class TripletCandidate:
    """A decoded triplet with its three branch log-probabilities.

    ``score`` is always ``log_p_head + log_p_tail + log_p_rel`` computed with
    that exact arithmetic.
    """

    triplet: RelationTriplet
    log_p_head: float
    log_p_tail: float
    log_p_rel: float
    score: float

    @classmethod
    def build(
        cls, triplet: RelationTriplet, log_p_head: float, log_p_tail: float, log_p_rel: float
    ) -> "TripletCandidate":
        return cls(
            triplet=triplet,
            log_p_head=log_p_head,
            log_p_tail=log_p_tail,
            log_p_rel=log_p_rel,
            score=log_p_head + log_p_tail + log_p_rel,
        )


def _ends_with(seq: Sequence[str], suffix: Sequence[str]) -> bool:
    return len(seq) >= len(suffix) and tuple(seq[-len(suffix):]) == tuple(suffix)


def _greedy_extend(
    backend: Backend,
    context: list[str],
    stop: Sequence[str] | None,
    budget: int,
) -> tuple[list[str], bool]:
    """Greedy continuation of ``context`` until the stop subsequence.

    Returns the generated tokens and whether the stop was actually reached
    (with ``stop=None`` any termination counts as reached).
    """
    if budget <= 0:
        return [], stop is None
    out = backend.generate(
        context, mode="greedy", stop=stop, params=SamplingParams(max_len=budget)
    )
    reached = stop is None or _ends_with(out, stop)
    return out, reached


def _first_token_mask(label_mask: Iterable[str]) -> set[str]:
    firsts = {label.split()[0] for label in label_mask if label.split()}
    if not firsts:
        raise ValueError("label mask must contain at least one non-empty label")
    return firsts


def _masked_relation_dist(
    dist: TokenDistribution, label_mask: Iterable[str] | None
) -> TokenDistribution:
    if label_mask is None:
        return dist
    allowed = {t for t in _first_token_mask(label_mask) if t in dist.vocab}
    if not allowed:
        return dist
    return dist.masked(allowed)


def decode_single(
    sentence: str,
    backend: Backend,
    label_mask: Iterable[str] | None = None,
    max_len: int = 128,
) -> RelationTriplet | None:
    """Greedy single-triplet extraction; parse failures become null.

    With ``label_mask`` the distribution at the first relation-label token is
    restricted to tokens that begin one of the masked labels, renormalized,
    and decoding then continues greedily.
    """
    prefix = extractor_input(sentence).split()
    if label_mask is None:
        generated = backend.generate(
            prefix, mode="greedy", params=SamplingParams(max_len=max_len)
        )
    else:
        upto_rel, reached = _greedy_extend(backend, prefix, _REL_TOKENS, max_len)
        if not reached:
            return None
        dist = backend.next_distribution(prefix + upto_rel)
        dist = _masked_relation_dist(dist, label_mask)
        first = dist.argmax_token()
        context = prefix + upto_rel + [first]
        rest, _ = _greedy_extend(backend, context, None, max_len - len(upto_rel) - 1)
        generated = upto_rel + [first] + rest
    try:
        return decode_extractor_output(" ".join(generated))
    except DecodeError:
        return None


def classify_zerorc(
    sentence: str,
    head: str,
    tail: str,
    backend: Backend,
    candidate_labels: Sequence[str],
) -> str:
    """Entity-conditioned label classification over a fixed candidate set.

    The first generated token is masked to the candidates' first tokens and
    chosen greedily; candidates sharing that winning first token are ranked
    by the log probability of their full label token sequence, with remaining
    ties resolved by vocabulary order.
    """
    candidates = list(candidate_labels)
    if not candidates:
        raise ValueError("candidate label set must be non-empty")
    if len(candidates) == 1:
        return candidates[0]
    prefix = encode_zerorc_prefix(sentence, head, tail).split()

    by_first: dict[str, list[str]] = {}
    for label in candidates:
        by_first.setdefault(label.split()[0], []).append(label)

    dist = backend.next_distribution(prefix)
    in_vocab = {t for t in by_first if t in dist.vocab}
    pool: list[str]
    if in_vocab:
        first = dist.masked(in_vocab).argmax_token()
        pool = by_first[first]
    else:
        pool = candidates
    if len(pool) == 1:
        return pool[0]

    def vocab_key(label: str) -> tuple:
        idx = []
        for tok in label.split():
            idx.append(backend.vocab.index(tok) if tok in backend.vocab else len(backend.vocab))
        return tuple(idx), label

    scored = [(-sequence_log_prob(backend, prefix, label.split()), vocab_key(label), label)
              for label in pool]
    scored.sort()
    return scored[0][2]


def triplet_search_decode(
    sentence: str,
    backend: Backend,
    params: BranchParams | None = None,
    label_mask: Iterable[str] | None = None,
) -> list[TripletCandidate]:
    """Branched extraction returning up to b^3 scored triplet candidates.

    Branches whose greedy extension never reaches the next marker are
    discarded, as are unparseable sequences; when fewer than b tokens carry
    probability at a stage, only those branch.  ``label_mask`` restricts and
    renormalizes the relation-stage first-token distribution, mirroring
    :func:`decode_single`.
    """
    params = params or BranchParams()
    prefix = extractor_input(sentence).split()
    budget = params.max_len

    lead, reached = _greedy_extend(backend, prefix, _HEAD_TOKENS, budget)
    if not reached:
        return []

    def branch_tokens(context: list[str], masked: bool) -> list[tuple[str, float]]:
        # An EOS branch terminates with its field empty and can never parse.
        dist = backend.next_distribution(context)
        if masked:
            dist = _masked_relation_dist(dist, label_mask)
        return [(t, p) for t, p in dist.top_tokens(params.b) if t != EOS]

    raw: list[TripletCandidate] = []
    head_ctx = prefix + lead
    for head_tok, p_head in branch_tokens(head_ctx, masked=False):
        head_path = lead + [head_tok]
        to_tail, ok = _greedy_extend(
            backend, prefix + head_path, _TAIL_TOKENS, budget - len(head_path)
        )
        if not ok:
            continue
        head_path = head_path + to_tail
        for tail_tok, p_tail in branch_tokens(prefix + head_path, masked=False):
            tail_path = head_path + [tail_tok]
            to_rel, ok = _greedy_extend(
                backend, prefix + tail_path, _REL_TOKENS, budget - len(tail_path)
            )
            if not ok:
                continue
            tail_path = tail_path + to_rel
            for rel_tok, p_rel in branch_tokens(prefix + tail_path, masked=True):
                rel_path = tail_path + [rel_tok]
                tail_gen, _ = _greedy_extend(
                    backend, prefix + rel_path, None, budget - len(rel_path)
                )
                full = rel_path + tail_gen
                try:
                    triplet = decode_extractor_output(" ".join(full))
                except DecodeError:
                    continue
                raw.append(
                    TripletCandidate.build(
                        triplet,
                        log_p_head=math.log(p_head),
                        log_p_tail=math.log(p_tail),
                        log_p_rel=math.log(p_rel),
                    )
                )

    best: dict[tuple[str, str, str], TripletCandidate] = {}
    for cand in raw:
        key = cand.triplet.canonical()
        prev = best.get(key)
        if prev is None or cand.score > prev.score:
            best[key] = cand
    kept = [c for c in best.values() if c.score >= params.threshold]
    kept.sort(key=lambda c: (-c.score, c.triplet.head, c.triplet.tail, c.triplet.label))
    return kept


def write_candidates(
    path: str | Path, candidates_by_sentence: Mapping[str, Sequence[TripletCandidate]]
) -> Path:
    """Dump candidates as JSONL for threshold tuning and debugging."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as f:
        for sid in sorted(candidates_by_sentence):
            for c in candidates_by_sentence[sid]:
                f.write(
                    json.dumps(
                        {
                            "sentence_id": sid,
                            "head": c.triplet.head,
                            "tail": c.triplet.tail,
                            "label": c.triplet.label,
                            "log_p_head": c.log_p_head,
                            "log_p_tail": c.log_p_tail,
                            "log_p_rel": c.log_p_rel,
                            "score": c.score,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return p


def read_candidates(path: str | Path) -> dict[str, list[TripletCandidate]]:
    out: dict[str, list[TripletCandidate]] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            cand = TripletCandidate(
                triplet=RelationTriplet(row["head"], row["tail"], row["label"]),
                log_p_head=float(row["log_p_head"]),
                log_p_tail=float(row["log_p_tail"]),
                log_p_rel=float(row["log_p_rel"]),
                score=float(row["score"]),
            )
            out.setdefault(str(row["sentence_id"]), []).append(cand)
    return out
