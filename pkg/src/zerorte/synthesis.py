"""Synthetic sample generation and the end-to-end extraction pipeline.

The pipeline runs five stages in a fixed order: fine-tune the generator on
seen-relation data, fine-tune the extractor on the same data, generate a
fixed number of valid synthetic samples per unseen label, fine-tune the
extractor again on the synthetic data only, and finally decode the test
sentences.  The no-generation baseline skips the two synthetic stages and
masks the decoded labels to the unseen set instead.
"""

from __future__ import annotations

import hashlib
import json
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backends import Backend, SamplingParams, TrainConfig, sample_sequence
from .corpus import Dataset, FoldSplit, Sample, explode_triplets, write_jsonl
from .decoding import BranchParams, classify_zerorc, decode_single, triplet_search_decode
from .evaluation import (
    MetricsBundle,
    micro_prf,
    per_label_breakdown,
    single_accuracy,
    zerorc_macro_f1,
)
from .templates import DecodeError, decode_generator_output, encode_extractor_example, encode_generator_example, generator_prompt

__all__ = [
    "SynthesisConfig",
    "PipelineConfig",
    "PipelineReport",
    "GenerationExhausted",
    "PipelineStageError",
    "STAGES",
    "derive_seed",
    "render_generator_corpus",
    "render_extractor_corpus",
    "generate_synthetic",
    "run_relation_prompt",
    "write_synthetic",
]

STAGES = (
    "train_generator_seen",
    "train_extractor_seen",
    "generate_synthetic",
    "train_extractor_synthetic",
    "predict",
)


class GenerationExhausted(RuntimeError):
    """A label burned through its attempt budget before reaching the quota."""

    def __init__(self, label: str, valid: int, discarded: int):
        super().__init__(
            f"label {label!r}: only {valid} valid samples after {valid + discarded} attempts"
        )
        self.label = label
        self.valid = valid
        self.discarded = discarded


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the partial report built so far."""

    def __init__(self, stage: str, cause: Exception, report: "PipelineReport"):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.report = report


@dataclass(frozen=True)
class SynthesisConfig:
    """Controls for the generation loop.

    ``max_attempts_factor`` bounds attempts at ``n_per_label`` times the
    factor; exceeding it raises :class:`GenerationExhausted` rather than
    silently under-filling, because downstream metrics would quietly degrade.
    """

    n_per_label: int = 250
    sampling: SamplingParams = field(default_factory=SamplingParams)
    max_attempts_factor: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_per_label < 1:
            raise ValueError("n_per_label must be at least 1")
        if self.max_attempts_factor < 1:
            raise ValueError("max_attempts_factor must be at least 1")


def derive_seed(base_seed: int, label: str, attempt: int) -> int:
    """Stable 64-bit per-attempt rng seed; independent of process hash state."""
    digest = hashlib.blake2b(
        f"{base_seed}|{label}|{attempt}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def render_generator_corpus(data: Dataset) -> list[str]:
    """One training sequence per gold triplet: prompt plus structured target."""
    out = []
    for sample in data:
        for view in explode_triplets(sample):
            prompt, target = encode_generator_example(view.triplets[0].label, view)
            out.append(f"{prompt} {target}")
    return out


def render_extractor_corpus(data: Dataset) -> list[str]:
    """One training sequence per gold triplet: input plus structured target."""
    out = []
    for sample in data:
        for triplet in sample.triplets:
            source, target = encode_extractor_example(sample, triplet)
            out.append(f"{source} {target}")
    return out


def generate_synthetic(
    labels: Iterable[str],
    generator_backend: Backend,
    config: SynthesisConfig | None = None,
) -> tuple[Dataset, dict[str, dict[str, int]]]:
    """Sample valid single-triplet samples until each label meets its quota.

    Outputs that fail structured decoding are discarded and generation
    continues; per-label rng seeds derive deterministically from
    ``(config.seed, label, attempt)`` so runs reproduce exactly.
    """
    config = config or SynthesisConfig()
    samples: list[Sample] = []
    stats: dict[str, dict[str, int]] = {}
    budget = config.n_per_label * config.max_attempts_factor
    for label in sorted(set(labels)):
        prompt_tokens = generator_prompt(label).split()
        valid: list[Sample] = []
        discarded = 0
        attempt = 0
        while len(valid) < config.n_per_label:
            if attempt >= budget:
                raise GenerationExhausted(label, len(valid), discarded)
            rng_seed = derive_seed(config.seed, label, attempt)
            attempt += 1
            tokens = sample_sequence(
                generator_backend, prompt_tokens, config.sampling, rng_seed=rng_seed
            )
            try:
                sample = decode_generator_output(" ".join(tokens), label=label)
            except DecodeError:
                discarded += 1
                continue
            valid.append(sample)
        samples.extend(valid)
        stats[label] = {"valid": len(valid), "discarded": discarded}
    return Dataset(tuple(samples)), stats


def write_synthetic(
    data: Dataset, stats: dict[str, dict[str, int]], path: str | Path
) -> Path:
    """Dataset JSONL plus a ``.stats.json`` sidecar with per-label counts."""
    p = write_jsonl(data, path)
    sidecar = p.with_suffix(p.suffix + ".stats.json")
    sidecar.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return p


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run needs besides the fold and the backends."""

    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    branch: BranchParams = field(default_factory=BranchParams)
    no_gen: bool = False
    tune_seen_extractor: bool = True
    mix_synthetic_with_seen: bool = False
    evaluate_zerorc: bool = True
    decode_single_triplet: bool = True
    decode_multi_triplet: bool = True


@dataclass
class PipelineReport:
    """Everything observable about one pipeline run."""

    fold_seed: int
    unseen_labels: tuple[str, ...]
    variant: str
    stages_completed: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    synthetic: Dataset | None = None
    discards: dict[str, dict[str, int]] = field(default_factory=dict)
    metrics: MetricsBundle | None = None
    predictions: dict[str, list] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "fold_seed": self.fold_seed,
            "unseen_labels": sorted(self.unseen_labels),
            "variant": self.variant,
            "stages_completed": list(self.stages_completed),
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
            "synthetic_samples": len(self.synthetic) if self.synthetic else 0,
            "discards": self.discards,
            "metrics": self.metrics.to_dict() if self.metrics else None,
        }


def _predict(
    fold: FoldSplit, extractor: Backend, config: PipelineConfig
) -> tuple[MetricsBundle, dict[str, list]]:
    mask = sorted(fold.unseen_labels) if config.no_gen else None
    max_len = config.branch.max_len

    singles = [(i, s) for i, s in enumerate(fold.test) if len(s.triplets) == 1]
    multis = [(i, s) for i, s in enumerate(fold.test) if len(s.triplets) >= 2]

    predictions: dict[str, list] = {}
    acc = 0.0
    per_label: dict[str, float] = {}
    if config.decode_single_triplet and singles:
        gold = {str(i): s.triplets[0] for i, s in singles}
        pred = {
            str(i): decode_single(s.sentence, extractor, label_mask=mask, max_len=max_len)
            for i, s in singles
        }
        acc = single_accuracy(gold, pred)
        per_label = per_label_breakdown(
            {sid: [g] for sid, g in gold.items()},
            {sid: ([p] if p is not None else []) for sid, p in pred.items()},
        )
        predictions["single"] = [
            {"sentence_id": sid, "pred": None if p is None else p.canonical()}
            for sid, p in sorted(pred.items())
        ]

    mp = mr = mf1 = 0.0
    if config.decode_multi_triplet and multis:
        gold_multi = {str(i): list(s.triplets) for i, s in multis}
        pred_multi = {}
        for i, s in multis:
            cands = triplet_search_decode(
                s.sentence, extractor, params=config.branch, label_mask=mask
            )
            pred_multi[str(i)] = [c.triplet for c in cands]
        mp, mr, mf1 = micro_prf(gold_multi, pred_multi)
        predictions["multi"] = [
            {"sentence_id": sid, "pred": [t.canonical() for t in ts]}
            for sid, ts in sorted(pred_multi.items())
        ]

    zrc = 0.0
    if config.evaluate_zerorc and len(fold.test) > 0:
        candidates = sorted(fold.unseen_labels)
        gold_labels: list[str] = []
        pred_labels: list[str] = []
        for s in fold.test:
            for t in s.triplets:
                gold_labels.append(t.label)
                pred_labels.append(
                    classify_zerorc(s.sentence, t.head, t.tail, extractor, candidates)
                )
        _, _, zrc = zerorc_macro_f1(gold_labels, pred_labels)

    metrics = MetricsBundle(
        single_accuracy=acc,
        multi_precision=mp,
        multi_recall=mr,
        multi_f1=mf1,
        zerorc_macro_f1=zrc,
        per_label_f1=per_label,
    )
    return metrics, predictions


def run_relation_prompt(
    fold: FoldSplit,
    generator_backend: Backend,
    extractor_backend: Backend,
    config: PipelineConfig | None = None,
) -> PipelineReport:
    """Execute the full train/generate/train/predict pipeline on one fold.

    Stage order is fixed and observable through the backends' ``train``
    calls.  Any stage failure raises :class:`PipelineStageError` carrying the
    partial report.
    """
    config = config or PipelineConfig()
    report = PipelineReport(
        fold_seed=fold.seed,
        unseen_labels=tuple(sorted(fold.unseen_labels)),
        variant="no_gen" if config.no_gen else "full",
    )

    def run_stage(stage: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as e:
            report.timings[stage] = time.perf_counter() - start
            raise PipelineStageError(stage, e, report) from e
        report.timings[stage] = time.perf_counter() - start
        report.stages_completed.append(stage)
        return result

    run_stage(
        "train_generator_seen",
        lambda: generator_backend.train(render_generator_corpus(fold.train), config.train),
    )
    if config.tune_seen_extractor:
        run_stage(
            "train_extractor_seen",
            lambda: extractor_backend.train(render_extractor_corpus(fold.train), config.train),
        )

    if not config.no_gen:
        # Per-sample seeds then derive from (fold.seed, label, attempt).
        synth_config = replace(config.synthesis, seed=fold.seed)

        def do_generate():
            synthetic, stats = generate_synthetic(
                fold.unseen_labels, generator_backend, synth_config
            )
            report.synthetic = synthetic
            report.discards = stats
            return synthetic

        synthetic = run_stage("generate_synthetic", do_generate)

        def do_retrain():
            corpus = render_extractor_corpus(synthetic)
            if config.mix_synthetic_with_seen:
                corpus = render_extractor_corpus(fold.train) + corpus
            extractor_backend.train(corpus, config.train)

        run_stage("train_extractor_synthetic", do_retrain)

    def do_predict():
        metrics, predictions = _predict(fold, extractor_backend, config)
        report.metrics = metrics
        report.predictions = predictions

    run_stage("predict", do_predict)
    return report
