"""Command-line surface: split, run, tune, eval, synth, stats.

Configuration can come from a JSON document (``--config``) with flags
overriding file values.  Exit codes: 0 success, 1 usage, 2 data error,
3 pipeline error, 4 remote-backend error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .backends import (
    Backend,
    RemoteBackend,
    SamplingParams,
    TrainConfig,
    TransportError,
    TrigramBackend,
)
from .corpus import (
    CorpusError,
    load_fold,
    load_jsonl,
    save_fold,
    split_zero_shot,
    dataset_stats,
    diversity_stats,
)
from .decoding import BranchParams, read_candidates
from .evaluation import (
    EvaluationError,
    evaluate_threshold_grid,
    micro_prf,
    tune_threshold,
    write_per_label_csv,
)
from .synthesis import (
    GenerationExhausted,
    PipelineConfig,
    PipelineStageError,
    SynthesisConfig,
    generate_synthetic,
    run_relation_prompt,
    render_generator_corpus,
    write_synthetic,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PIPELINE = 3
EXIT_REMOTE = 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_(EXIT_USAGE, f"{self.prog}: error: {message}")


class SystemExit_(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code


def _build_backend(selector: str, model: str) -> Backend:
    if selector == "ngram":
        return TrigramBackend()
    if selector.startswith("remote:"):
        return RemoteBackend(selector[len("remote:"):], model=model)
    raise SystemExit_(EXIT_USAGE, f"unknown backend selector {selector!r}")


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SystemExit_(EXIT_USAGE, f"cannot read config {path}: {e}")


def _merged(args: argparse.Namespace, file_cfg: dict, key: str, default):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in file_cfg:
        return file_cfg[key]
    return default


def _pipeline_config(args, cfg: dict) -> PipelineConfig:
    sampling_cfg = cfg.get("sampling", {})
    sampling = SamplingParams(
        temperature=float(_merged(args, sampling_cfg, "temperature", 1.0)),
        top_k=int(_merged(args, sampling_cfg, "top_k", 50)),
        max_len=int(_merged(args, sampling_cfg, "max_len", 128)),
    )
    synthesis = SynthesisConfig(
        n_per_label=int(_merged(args, cfg, "n_per_label", 250)),
        sampling=sampling,
        max_attempts_factor=int(_merged(args, cfg, "max_attempts_factor", 20)),
    )
    branch_cfg = cfg.get("branch", {})
    threshold = _merged(args, branch_cfg, "threshold", -0.9906)
    branch = BranchParams(
        b=int(_merged(args, branch_cfg, "b", 4)),
        threshold=float("-inf") if threshold in ("-inf", "keep-all") else float(threshold),
        max_len=sampling.max_len,
    )
    train_cfg = cfg.get("train", {})
    train = TrainConfig(
        epochs=int(train_cfg.get("epochs", 5)),
        learning_rate=float(train_cfg.get("learning_rate", 3e-5)),
        warmup_fraction=float(train_cfg.get("warmup_fraction", 0.2)),
        batch_size=int(train_cfg.get("batch_size", 128)),
        dropout=float(train_cfg.get("dropout", 0.1)),
    )
    mode = _merged(args, cfg, "mode", "both")
    return PipelineConfig(
        synthesis=synthesis,
        train=train,
        branch=branch,
        no_gen=bool(_merged(args, cfg, "no_gen", False)),
        decode_single_triplet=mode in ("single", "both"),
        decode_multi_triplet=mode in ("multi", "both"),
    )


def _cmd_split(args) -> int:
    cfg = _load_config_file(args.config)
    data_path = _merged(args, cfg, "data", None)
    if not data_path:
        raise SystemExit_(EXIT_USAGE, "split requires --data")
    data = load_jsonl(data_path)
    out = Path(_merged(args, cfg, "out", "folds"))
    seeds = _merged(args, cfg, "seeds", [0, 1, 2, 3, 4])
    m = int(_merged(args, cfg, "m", 10))
    v = int(_merged(args, cfg, "v", 5))
    manifests = []
    for seed in seeds:
        fold = split_zero_shot(data, m=m, v=v, seed=int(seed))
        manifests.append(str(save_fold(fold, out / f"fold{seed}")))
    print(json.dumps({"manifests": manifests}, indent=2))
    return EXIT_OK


def _aggregate(reports: list[dict]) -> dict:
    keys = [
        "single_accuracy",
        "multi_precision",
        "multi_recall",
        "multi_f1",
        "zerorc_macro_f1",
    ]
    means = {}
    for key in keys:
        vals = [r["metrics"][key] for r in reports if r.get("metrics")]
        means[key] = sum(vals) / len(vals) if vals else 0.0
    return means


def _cmd_run(args) -> int:
    cfg = _load_config_file(args.config)
    manifests = args.fold or cfg.get("folds") or []
    if not manifests:
        raise SystemExit_(EXIT_USAGE, "run requires at least one --fold manifest")
    backend_sel = _merged(args, cfg, "backend", "ngram")
    out = Path(_merged(args, cfg, "out", "runs"))
    out.mkdir(parents=True, exist_ok=True)
    config = _pipeline_config(args, cfg)

    def run_one(manifest_path: str) -> dict:
        fold = load_fold(manifest_path)
        generator = _build_backend(backend_sel, "generator")
        extractor = _build_backend(backend_sel, "extractor")
        report = run_relation_prompt(fold, generator, extractor, config)
        payload = report.to_dict()
        (out / f"fold{fold.seed}_report.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
        if report.metrics and report.metrics.per_label_f1:
            write_per_label_csv(report.metrics.per_label_f1, out / f"fold{fold.seed}_per_label.csv")
        return payload

    parallel = int(_merged(args, cfg, "parallel_folds", 1))
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            reports = list(pool.map(run_one, manifests))
    else:
        reports = [run_one(m) for m in manifests]

    aggregate = {"folds": len(reports), "mean_metrics": _aggregate(reports)}
    (out / "aggregate.json").write_text(
        json.dumps(aggregate, indent=2) + "\n", encoding="utf-8"
    )
    print(json.dumps(aggregate, indent=2))
    return EXIT_OK


def _cmd_tune(args) -> int:
    candidates = read_candidates(args.candidates)
    gold_data = load_jsonl(args.gold)
    gold = {str(i): list(s.triplets) for i, s in enumerate(gold_data)}
    threshold = tune_threshold(candidates, gold)
    grid = evaluate_threshold_grid(candidates, gold)
    f1 = dict(grid)[threshold]
    overlay = {"branch": {"threshold": threshold}, "tuned_f1": f1}
    if args.out:
        Path(args.out).write_text(json.dumps(overlay, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(overlay, indent=2))
    return EXIT_OK


def _cmd_eval(args) -> int:
    gold_data = load_jsonl(args.gold)
    pred_data = load_jsonl(args.pred)
    if len(gold_data) != len(pred_data):
        raise CorpusError("gold and prediction files differ in line count")
    for i, (g, p) in enumerate(zip(gold_data, pred_data)):
        if g.sentence != p.sentence:
            raise CorpusError(f"sentence mismatch on line {i + 1}")
    gold = {str(i): list(s.triplets) for i, s in enumerate(gold_data)}
    pred = {str(i): list(s.triplets) for i, s in enumerate(pred_data)}
    p, r, f1 = micro_prf(gold, pred)
    payload = {"micro_precision": p, "micro_recall": r, "micro_f1": f1}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _cmd_synth(args) -> int:
    cfg = _load_config_file(args.config)
    train_data = load_jsonl(args.train)
    labels = [l.strip() for l in args.labels.split(",") if l.strip()]
    if not labels:
        raise SystemExit_(EXIT_USAGE, "synth requires a non-empty --labels list")
    backend = _build_backend(_merged(args, cfg, "backend", "ngram"), "generator")
    backend.train(render_generator_corpus(train_data), TrainConfig())
    config = _pipeline_config(args, cfg)
    synthetic, stats = generate_synthetic(labels, backend, config.synthesis)
    path = write_synthetic(synthetic, stats, args.out)
    print(json.dumps({"out": str(path), "stats": stats}, indent=2))
    return EXIT_OK


def _cmd_stats(args) -> int:
    data = load_jsonl(args.data)
    payload = dataset_stats(data)
    if args.diversity:
        payload = {**payload, **diversity_stats(data)}
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zerorte", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_split = sub.add_parser("split", help="build zero-shot fold manifests")
    p_split.add_argument("--data")
    p_split.add_argument("--m", type=int)
    p_split.add_argument("--v", type=int)
    p_split.add_argument("--seeds", type=int, nargs="+")
    p_split.add_argument("--out")
    p_split.add_argument("--config")
    p_split.set_defaults(fn=_cmd_split)

    p_run = sub.add_parser("run", help="run the pipeline on fold manifests")
    p_run.add_argument("--fold", action="append", help="fold manifest path (repeatable)")
    p_run.add_argument("--backend")
    p_run.add_argument("--out")
    p_run.add_argument("--no-gen", dest="no_gen", action="store_const", const=True)
    p_run.add_argument("--single", dest="mode", action="store_const", const="single")
    p_run.add_argument("--multi", dest="mode", action="store_const", const="multi")
    p_run.add_argument("--n-per-label", dest="n_per_label", type=int)
    p_run.add_argument("--max-attempts-factor", dest="max_attempts_factor", type=int)
    p_run.add_argument("--threshold")
    p_run.add_argument("--b", type=int)
    p_run.add_argument("--temperature", type=float)
    p_run.add_argument("--top-k", dest="top_k", type=int)
    p_run.add_argument("--max-len", dest="max_len", type=int)
    p_run.add_argument("--parallel-folds", dest="parallel_folds", type=int)
    p_run.add_argument("--config")
    p_run.set_defaults(fn=_cmd_run)

    p_tune = sub.add_parser("tune", help="tune the decoding score threshold")
    p_tune.add_argument("--candidates", required=True)
    p_tune.add_argument("--gold", required=True)
    p_tune.add_argument("--out")
    p_tune.set_defaults(fn=_cmd_tune)

    p_eval = sub.add_parser("eval", help="score predictions against gold")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--out")
    p_eval.set_defaults(fn=_cmd_eval)

    p_synth = sub.add_parser("synth", help="generate synthetic samples standalone")
    p_synth.add_argument("--train", required=True)
    p_synth.add_argument("--labels", required=True, help="comma-separated label list")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--backend")
    p_synth.add_argument("--n-per-label", dest="n_per_label", type=int)
    p_synth.add_argument("--max-attempts-factor", dest="max_attempts_factor", type=int)
    p_synth.add_argument("--temperature", type=float)
    p_synth.add_argument("--top-k", dest="top_k", type=int)
    p_synth.add_argument("--max-len", dest="max_len", type=int)
    p_synth.add_argument("--config")
    p_synth.set_defaults(fn=_cmd_synth)

    p_stats = sub.add_parser("stats", help="dataset and diversity statistics")
    p_stats.add_argument("--data", required=True)
    p_stats.add_argument("--diversity", action="store_true")
    p_stats.set_defaults(fn=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as e:  # argparse --help exits 0
        return int(e.code or 0)
    except SystemExit_ as e:
        if str(e):
            print(str(e), file=sys.stderr)
        return e.code
    except (CorpusError, EvaluationError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TransportError as e:
        print(f"remote backend error: {e}", file=sys.stderr)
        return EXIT_REMOTE
    except PipelineStageError as e:
        partial = json.dumps(e.report.to_dict(), indent=2)
        print(f"pipeline error: {e}\npartial report:\n{partial}", file=sys.stderr)
        if isinstance(e.cause, TransportError):
            return EXIT_REMOTE
        return EXIT_PIPELINE
    except GenerationExhausted as e:
        print(f"pipeline error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
