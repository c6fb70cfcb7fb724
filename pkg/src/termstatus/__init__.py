"""Extraction of (term, status) pairs from multi-turn medical dialogues.

The pipeline generates all mentioned terms first, then generates each term's
status with a prompt carrying the term's category and its ordered status
candidates from the schema. A one-stage baseline (single "term: status"
sequence) is included for comparison, along with the full preprocessing,
augmentation, training orchestration, and scoring protocol.
"""

from .backend import (
    BackendError,
    CorruptionSpec,
    GenerationRequest,
    GenerativeBackend,
    Hyperparams,
    LossTrace,
    MockOracle,
    TrainableBackend,
    TrainingError,
    low_resource_schedule,
    train,
)
from .corpus import (
    AnnotationEvent,
    CorpusError,
    Dialogue,
    TermStatusPair,
    Turn,
    Window,
    dedup_pairs,
    ingest_dialogues,
    ingest_term_only,
    merge_adjacent_turns,
    read_windows,
    reduce_latest_status,
    windowize,
    write_windows,
)
from .evaluation import (
    EvalReport,
    Score,
    WindowUnit,
    aggregate_windows,
    breakdown_by_category,
    breakdown_by_term_count,
    filter_changed_status,
    merge_dialogue,
    score_dialogue_level,
    score_window,
)
from .pipeline import (
    CorpusExtraction,
    Diagnostics,
    ExtractionConfig,
    ExtractionResult,
    extract_corpus,
    extract_one_stage,
    extract_two_stage,
    read_predictions,
    write_predictions,
)
from .prompting import (
    INVALID_STATUS,
    PromptConfig,
    build_status_input,
    build_term_input,
    parse_pairs_one_stage,
    parse_status,
    parse_terms,
    serialize_pairs_one_stage,
    serialize_terms,
)
from .samples import (
    AugmentConfig,
    Sample,
    SampleMeta,
    augment_term_only,
    build_one_stage_samples,
    build_status_samples,
    build_term_samples,
    mix_batches,
    sample_not_mentioned_negatives,
)
from .schema import (
    CategoryDef,
    Schema,
    SchemaError,
    UnknownTermError,
    load_schema,
    parse_schema,
    schema_from_dict,
)

__version__ = "0.1.0"
