"""The trainable trigram backend and the shared decoding operations.

Any backend exposes one contract: a next-token distribution over whitespace
tokens plus train().  Everything else (temperature/top-k sampling, greedy
decoding with stop subsequences, sequence log-probabilities) is generic.
"""

import numpy as np

from zerorte import (
    SamplingParams,
    ScriptedBackend,
    TrainConfig,
    TrigramBackend,
    apply_temperature_topk,
    greedy_until,
    sample_sequence,
    sequence_log_prob,
)

backend = TrigramBackend(k=0.1)
backend.train(
    ["alice maps bob", "alice maps carol", "alice links dave"],
    TrainConfig(epochs=1),
)

dist = backend.next_distribution(["alice"])
print("p(next | alice):")
for token, p in dist.top_tokens(4):
    print(f"  {token:8s} {p:.4f}")

# Temperature reshapes, top-k truncates, both renormalize.
sharp = apply_temperature_topk(dist, SamplingParams(temperature=0.3, top_k=2))
print("\nafter temperature 0.3, top-k 2:")
for token, p in sharp.top_tokens(4):
    print(f"  {token:8s} {p:.4f}")

print("\ngreedy:", greedy_until(backend, ["alice"], max_len=4))
for seed in (0, 1, 2):
    out = sample_sequence(backend, ["alice"], SamplingParams(top_k=3, max_len=4), rng_seed=seed)
    print(f"sampled (seed {seed}):", out)

lp = sequence_log_prob(backend, ["alice"], ["maps", "bob"])
print("\nlog p(maps bob | alice) = %.4f" % lp)

# Scripted backends replay fixed tables; handy for tests and debugging.
scripted = ScriptedBackend(["a", "b"], {(): {"a": 0.6, "b": 0.4}})
draws = [sample_sequence(scripted, [], SamplingParams(top_k=2, max_len=1), rng_seed=s)[0]
         for s in range(1000)]
print("\nscripted frequency of 'a': %.3f (target 0.6)" % (np.mean([d == "a" for d in draws])))
