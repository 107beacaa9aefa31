"""Zero-shot relation triplet extraction toolkit.

Structured prompt templates encode relation samples as plain text, a
pluggable autoregressive backend generates and extracts them, and triplet
search decoding turns a single-triplet extractor into a multi-triplet one.
"""

from .backends import (
    BOS,
    EOS,
    LOG_ZERO,
    UNK,
    Backend,
    BackendError,
    BackendStateError,
    RemoteBackend,
    SamplingParams,
    ScriptedBackend,
    TokenDistribution,
    TrainConfig,
    TransportError,
    TrigramBackend,
    Vocabulary,
    apply_temperature_topk,
    greedy_until,
    sample_sequence,
    sequence_log_prob,
)
from .corpus import (
    CorpusError,
    Dataset,
    FoldSplit,
    RelationTriplet,
    Sample,
    dataset_stats,
    diversity_stats,
    load_fold,
    load_jsonl,
    save_fold,
    split_zero_shot,
    write_jsonl,
)
from .decoding import (
    BranchParams,
    TripletCandidate,
    classify_zerorc,
    decode_single,
    read_candidates,
    triplet_search_decode,
    write_candidates,
)
from .evaluation import (
    MetricsBundle,
    evaluate_threshold_grid,
    micro_prf,
    per_label_breakdown,
    single_accuracy,
    tune_threshold,
    zerorc_macro_f1,
)
from .lexical_corpus import build_lexical_cue_corpus
from .synthesis import (
    GenerationExhausted,
    PipelineConfig,
    PipelineReport,
    PipelineStageError,
    SynthesisConfig,
    generate_synthetic,
    run_relation_prompt,
)
from .templates import (
    DecodeError,
    EmptyField,
    EntityNotInContext,
    MissingMarker,
    TemplateError,
    decode_extractor_output,
    decode_generator_output,
    encode_extractor_example,
    encode_generator_example,
    encode_zerorc_prefix,
    extractor_input,
    generator_prompt,
)

__version__ = "0.1.0"
