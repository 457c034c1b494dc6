"""Pool-based batch active learning with uncertainty and core-set acquisition."""

from .acquisition import (
    STRATEGIES,
    ScoredBatch,
    score_bald,
    score_entropy,
    select_coreset_greedy,
    select_dbal,
    select_entropy,
    select_least_confidence,
    select_random,
)
from .model import (
    EmbeddingMatrix,
    ModelConfig,
    PredictionTensor,
    TrainedModel,
    embed,
    load_external,
    predict_deterministic,
    predict_stochastic,
    train_from_scratch,
)
from .orchestrator import (
    ModelHyperparams,
    RoundRecord,
    RunConfig,
    RunResult,
    compute_metrics,
    persist_run,
    run_experiment,
    run_round,
)
from .pool import (
    Dataset,
    Pool,
    Sample,
    SyntheticSpec,
    class_counts,
    generate_synthetic,
    ingest_csv,
    init_pool,
    reveal_labels,
    write_csv,
)

__version__ = "0.1.0"
