"""Triplet search decoding: many scored triplets from a one-triplet extractor.

Generation branches at exactly three places (first token of head, tail, and
relation label), taking the top-b tokens at each, and every candidate is
scored by the product of those three probabilities alone.
"""

import math

from zerorte import BranchParams, ScriptedBackend, Vocabulary, triplet_search_decode
from zerorte.backends import EOS

# Script an extractor whose branch points are genuinely ambiguous.
PREFIX = "Context: s.".split()


def table(prefix):
    gen = tuple(prefix[len(PREFIX):])
    steps = {
        0: {"Head": 1.0},
        1: {"Entity:": 1.0},
        2: {"alice": 0.8, "bob": 0.2},           # head first token
        3: {"Tail": 1.0},
        4: {"Entity:": 1.0},
        5: {"acme": 0.8, "paris": 0.2},          # tail first token
        6: {"Relation:": 1.0},
        7: {"employer": 0.8, "city": 0.2},       # relation first token
    }
    return steps.get(len(gen), {EOS: 1.0})


vocab = Vocabulary.from_tokens(
    {"Head", "Entity:", "Tail", "Relation:", "alice", "bob", "acme", "paris", "employer", "city"}
)
backend = ScriptedBackend(vocab, table)

candidates = triplet_search_decode("s", backend, BranchParams(b=2, threshold=-math.inf))
print(f"b=2 explores up to 8 sequences; {len(candidates)} parsed:")
for c in candidates:
    print(
        f"  ({c.triplet.head}, {c.triplet.tail}, {c.triplet.label})"
        f"  score={c.score:+.4f}  p={math.exp(c.score):.3f}"
    )

# The production threshold keeps only candidates above exp(-0.9906) ~ 0.371.
kept = triplet_search_decode("s", backend, BranchParams(b=2))
print("\nwith the default threshold -0.9906:")
for c in kept:
    print(f"  ({c.triplet.head}, {c.triplet.tail}, {c.triplet.label})  p={math.exp(c.score):.3f}")

# b=1 collapses to plain greedy single-triplet extraction.
single = triplet_search_decode("s", backend, BranchParams(b=1, threshold=-math.inf))
print("\nb=1:", [(c.triplet.head, c.triplet.tail, c.triplet.label) for c in single])
