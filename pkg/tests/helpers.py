"""Shared test doubles and independent oracles."""

from __future__ import annotations

import hashlib
import math

import numpy as np

from zerorte.backends import BOS, EOS, Backend, ScriptedBackend, TrainConfig, Vocabulary
from zerorte.decoding import TripletCandidate
from zerorte.templates import DecodeError, decode_extractor_output, extractor_input

MARKER_WALK = ("Head", "Entity:", None, "Tail", "Entity:", None, "Relation:", None, EOS)


def _unit(seed: int, prefix: tuple[str, ...], token: str) -> float:
    digest = hashlib.blake2b(
        f"{seed}|{'|'.join(prefix)}|{token}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") / 2**64


def make_random_extractor_backend(seed: int, n_content: int = 2) -> ScriptedBackend:
    """Deterministic pseudo-random backend biased toward parseable outputs.

    The vocabulary holds BOS/EOS, the four marker tokens, and ``n_content``
    content tokens, eight tokens at most for n_content <= 2.  Every prefix
    gets a fixed random distribution with extra mass on the token a template
    walk would emit next, so branch points stay genuinely multi-modal while
    most greedy extensions still parse.
    """
    content = [f"w{i}" for i in range(n_content)]
    vocab = Vocabulary((BOS, EOS, "Head", "Entity:", "Tail", "Relation:", *content))
    input_len = len(extractor_input("x").split())

    def expected_next(generated: tuple[str, ...]) -> str | None:
        state = 0
        for tok in generated:
            if state >= len(MARKER_WALK):
                return EOS
            want = MARKER_WALK[state]
            if want is None:
                # Content slot: advance when the next literal marker shows up.
                nxt = MARKER_WALK[state + 1]
                if tok == nxt:
                    state += 2
            elif tok == want:
                state += 1
        if state >= len(MARKER_WALK):
            return EOS
        want = MARKER_WALK[state]
        if want is not None:
            return want
        return None  # free content position

    def table(prefix: tuple[str, ...]):
        generated = prefix[input_len:]
        want = expected_next(generated)
        weights = {}
        for tok in vocab.tokens:
            if tok == BOS:
                continue
            w = 0.05 + _unit(seed, generated, tok)
            if tok == EOS and want != EOS:
                w *= 0.15  # premature endings stay possible but uncommon
            if want is None and tok in content:
                w *= 3.0  # free slots prefer content so fields are non-empty
            weights[tok] = w
        if want is not None:
            weights[want] = weights[want] * 8.0
        total = sum(weights.values())
        return {t: w / total for t, w in weights.items()}

    return ScriptedBackend(vocab, table)


def brute_force_triplet_search(sentence, backend, b, threshold=-math.inf, max_len=64):
    """Exhaustive reference decoder for triplet search.

    Enumerates every vocabulary token at the three branch points, keeps the
    top-b nonzero per stage, and extends greedily in between using its own
    stepping loop, never the production decode path.
    """

    def greedy(tokens, stop, budget):
        out = list(tokens)
        emitted = 0
        while emitted < budget:
            probs = backend.next_distribution(out).probs
            idx = int(np.argmax(probs))
            tok = backend.vocab.tokens[idx]
            if tok == EOS:
                return out, stop is None
            out.append(tok)
            emitted += 1
            if stop and tuple(out[-len(stop):]) == tuple(stop):
                return out, True
        return out, stop is None

    def top_b(tokens):
        probs = backend.next_distribution(tokens).probs
        ranked = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
        return [
            (backend.vocab.tokens[i], float(probs[i])) for i in ranked[:b] if probs[i] > 0
        ]

    prefix = extractor_input(sentence).split()
    base, ok = greedy(prefix, ("Head", "Entity:"), max_len)
    if not ok:
        return []
    found = {}
    for h_tok, h_p in top_b(base):
        if h_tok == EOS:
            continue
        s1, ok = greedy(base + [h_tok], ("Tail", "Entity:"), max_len - (len(base + [h_tok]) - len(prefix)))
        if not ok:
            continue
        for t_tok, t_p in top_b(s1):
            if t_tok == EOS:
                continue
            s2, ok = greedy(s1 + [t_tok], ("Relation:",), max_len - (len(s1 + [t_tok]) - len(prefix)))
            if not ok:
                continue
            for r_tok, r_p in top_b(s2):
                if r_tok == EOS:
                    seq = s2
                else:
                    s3, _ = greedy(s2 + [r_tok], None, max_len - (len(s2 + [r_tok]) - len(prefix)))
                    seq = s3
                try:
                    triplet = decode_extractor_output(" ".join(seq[len(prefix):]))
                except DecodeError:
                    continue
                cand = TripletCandidate.build(
                    triplet, math.log(h_p), math.log(t_p), math.log(r_p)
                )
                key = triplet.canonical()
                if key not in found or cand.score > found[key].score:
                    found[key] = cand
    kept = [c for c in found.values() if c.score >= threshold]
    kept.sort(key=lambda c: (-c.score, c.triplet.head, c.triplet.tail, c.triplet.label))
    return kept


class RecordingBackend(Backend):
    """Delegates to an inner backend while logging every train call."""

    def __init__(self, inner: Backend, tag: str, log: list):
        self.inner = inner
        self.tag = tag
        self.log = log

    @property
    def vocab(self):
        return self.inner.vocab

    def next_distribution(self, prefix):
        return self.inner.next_distribution(prefix)

    def train(self, corpus, config: TrainConfig | None = None):
        self.log.append((self.tag, tuple(corpus), config))
        return self.inner.train(corpus, config)

    def generate(self, prefix, mode="greedy", params=None, stop=None, seed=0):
        return self.inner.generate(prefix, mode=mode, params=params, stop=stop, seed=seed)

    def state_hash(self):
        return self.inner.state_hash()
