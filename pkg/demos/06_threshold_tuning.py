"""Tuning the triplet-search score threshold on validation candidates.

The validation labels play the role of pseudo-unseen labels: the generator
synthesizes samples for them, the extractor is tuned on those, and candidate
dumps from the validation sentences feed the threshold grid.  The tuner
evaluates fifty evenly spaced thresholds between the lowest and highest
candidate score and keeps the micro-F1 maximizer, preferring the higher
threshold on ties.
"""

from zerorte import (
    TrainConfig,
    TrigramBackend,
    evaluate_threshold_grid,
    generate_synthetic,
    split_zero_shot,
    triplet_search_decode,
    tune_threshold,
)
from zerorte.decoding import BranchParams
from zerorte.lexical_corpus import build_lexical_cue_corpus, desk_scale_config
from zerorte.synthesis import render_extractor_corpus, render_generator_corpus

corpus = build_lexical_cue_corpus()
fold = split_zero_shot(corpus, m=4, v=2, seed=0)
config = desk_scale_config()

generator, extractor = TrigramBackend(), TrigramBackend()
generator.train(render_generator_corpus(fold.train), config.train)
extractor.train(render_extractor_corpus(fold.train), config.train)
synthetic, _ = generate_synthetic(fold.validation_labels, generator, config.synthesis)
extractor.train(render_extractor_corpus(synthetic), config.train)

candidates = {}
gold = {}
for i, sample in enumerate(fold.validation):
    sid = str(i)
    candidates[sid] = triplet_search_decode(
        sample.sentence, extractor, BranchParams(b=4, threshold=float("-inf"))
    )
    gold[sid] = list(sample.triplets)

n_cands = sum(len(c) for c in candidates.values())
print(f"{n_cands} candidates over {len(candidates)} validation sentences")

grid = evaluate_threshold_grid(candidates, gold)
print("\nthreshold -> F1 (every 7th of the 50 grid points):")
for t, f1 in grid[::7]:
    print(f"  {t:+9.4f}  {f1:.4f}")

best = tune_threshold(candidates, gold)
print("\ntuned threshold: %+0.4f (F1 %.4f)" % (best, dict(grid)[best]))
