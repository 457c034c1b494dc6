"""The pool-based active-learning cycle: train, score, query, reveal, repeat.

Each round trains a fresh model on the current labeled set, records its
accuracy (so round r describes a model trained on initial + r*b labels),
then selects and reveals the next query batch while budget headroom
remains.  The final round of a repetition is evaluation-only.  All seeds
derive from (master_seed, repetition, round); the strategy name never
enters the derivation, so every strategy sees the identical validation
split and initial batch within a repetition and curves are paired.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    STRATEGIES,
    ScoredBatch,
    select_coreset_greedy,
    select_dbal,
    select_entropy,
    select_least_confidence,
    select_random,
)
from .errors import CapabilityError, ConfigurationError
from .model import (
    ModelConfig,
    TrainedModel,
    embed,
    predict_deterministic,
    predict_stochastic,
    train_from_scratch,
)
from .pool import Dataset, Pool, init_pool, reveal_labels
from .seeds import derive_seed

LABEL_SOURCES = ("oracle", "human-session")
EVALUATION_SETS = ("full-dataset", "holdout")


@dataclass(frozen=True)
class ModelHyperparams:
    """Model settings independent of the dataset's input_dim / num_classes."""

    hidden_widths: tuple[int, ...] = (64, 32)
    dropout_rate: float = 0.25
    epochs: int = 100
    learning_rate: float = 0.001
    batch_size: int = 32
    weight_init_seed: int = 0
    mc_passes: int = 20

    def to_model_config(self, input_dim: int, num_classes: int) -> ModelConfig:
        return ModelConfig(
            input_dim=input_dim,
            num_classes=num_classes,
            hidden_widths=tuple(self.hidden_widths),
            dropout_rate=self.dropout_rate,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            weight_init_seed=self.weight_init_seed,
            mc_passes=self.mc_passes,
        )


@dataclass(frozen=True)
class RunConfig:
    strategy: str
    initial_labeled: int = 100
    query_batch: int = 100
    budget: int = 1000
    validation_fraction: float = 0.05
    repetitions: int = 10
    model: ModelHyperparams = field(default_factory=ModelHyperparams)
    master_seed: int = 0
    label_source: str = "oracle"
    evaluation_set: str = "full-dataset"

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(
                f"unknown strategy {self.strategy!r}; valid: {', '.join(STRATEGIES)}"
            )
        if self.initial_labeled < 1:
            raise ConfigurationError("initial_labeled must be >= 1")
        if self.initial_labeled > self.budget:
            raise ConfigurationError("initial_labeled must not exceed budget")
        if self.query_batch < 1:
            raise ConfigurationError("query_batch must be >= 1")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigurationError("validation_fraction must lie in [0, 1)")
        if self.label_source not in LABEL_SOURCES:
            raise ConfigurationError(f"label_source must be one of {LABEL_SOURCES}")
        if self.evaluation_set not in EVALUATION_SETS:
            raise ConfigurationError(f"evaluation_set must be one of {EVALUATION_SETS}")


@dataclass
class RoundRecord:
    round_index: int
    labeled_count: int
    overall_accuracy: float
    per_class_accuracy: list[float | None]
    per_class_selection_pct: list[float] | None
    best_validation_accuracy: float
    selected_ids: list[int]
    wall_time: float

    def to_json(self) -> dict:
        return {
            "round_index": self.round_index,
            "labeled_count": self.labeled_count,
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "per_class_selection_pct": self.per_class_selection_pct,
            "best_validation_accuracy": self.best_validation_accuracy,
            "selected_ids": list(self.selected_ids),
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RoundRecord":
        return cls(
            round_index=int(d["round_index"]),
            labeled_count=int(d["labeled_count"]),
            overall_accuracy=float(d["overall_accuracy"]),
            per_class_accuracy=[None if v is None else float(v) for v in d["per_class_accuracy"]],
            per_class_selection_pct=(
                None if d["per_class_selection_pct"] is None
                else [float(v) for v in d["per_class_selection_pct"]]
            ),
            best_validation_accuracy=float(d["best_validation_accuracy"]),
            selected_ids=[int(i) for i in d["selected_ids"]],
            wall_time=float(d["wall_time"]),
        )


@dataclass
class RunResult:
    config: RunConfig
    rounds_per_repetition: list[list[RoundRecord]]
    labeled_counts: list[int]
    mean_accuracy: list[float]
    std_accuracy: list[float]
    repetition_seeds: list[int]


class OracleLabelSource:
    """Simulated expert: answers immediately from ground truth."""

    wants_probabilities = False

    def __init__(self, dataset: Dataset):
        self._dataset = dataset

    def request_labels(self, ids, probabilities=None) -> dict[int, int]:
        labels = {}
        for i in ids:
            lab = self._dataset.samples[i].true_label
            if lab is None:
                raise CapabilityError(f"oracle mode needs ground truth; sample {i} has none")
            labels[i] = lab
        return labels


@dataclass(frozen=True)
class RoundSeeds:
    train: int
    mc: int
    select: int


def pool_seed(master_seed: int, repetition: int) -> int:
    return derive_seed(master_seed, repetition, 0)


def round_seeds(master_seed: int, repetition: int, round_index: int) -> RoundSeeds:
    return RoundSeeds(
        train=derive_seed(master_seed, repetition, 1, round_index),
        mc=derive_seed(master_seed, repetition, 2, round_index),
        select=derive_seed(master_seed, repetition, 3, round_index),
    )


def train_on_pool(pool: Pool, config: RunConfig, seeds: RoundSeeds) -> TrainedModel:
    model_cfg = config.model.to_model_config(pool.dataset.dimension, pool.num_classes)
    x = pool.dataset.feature_matrix(pool.labeled_ids)
    y = np.array([pool.assigned_labels[i] for i in pool.labeled_ids], dtype=np.int64)
    xv = pool.dataset.feature_matrix(pool.validation_ids)
    yv = np.array([pool.validation_labels[i] for i in pool.validation_ids], dtype=np.int64)
    return train_from_scratch(model_cfg, x, y, xv, yv, seeds.train)


def select_batch(model: TrainedModel, pool: Pool, config: RunConfig, k: int,
                  seeds: RoundSeeds) -> ScoredBatch:
    unlabeled = list(pool.unlabeled_ids)
    if config.strategy == "random":
        return select_random(unlabeled, k, seeds.select)
    features = pool.dataset.feature_matrix(unlabeled)
    if config.strategy == "least_confidence":
        return select_least_confidence(predict_deterministic(model, features, unlabeled), k)
    if config.strategy == "entropy":
        return select_entropy(predict_deterministic(model, features, unlabeled), k)
    if config.strategy == "dbal":
        preds = predict_stochastic(model, features, config.model.mc_passes, seeds.mc, unlabeled)
        return select_dbal(preds, k)
    if config.strategy == "coreset":
        emb_unlabeled = embed(model, features, unlabeled)
        emb_labeled = embed(model, pool.dataset.feature_matrix(pool.labeled_ids),
                            list(pool.labeled_ids))
        return select_coreset_greedy(emb_unlabeled, emb_labeled, k)
    raise ConfigurationError(f"unknown strategy {config.strategy!r}")


def compute_metrics(model: TrainedModel, dataset: Dataset, pool: Pool,
                    cumulative_selected: np.ndarray,
                    evaluation_set: str = "full-dataset") -> dict:
    """Overall and per-class accuracy on the evaluation set, plus the
    cumulative per-class selection percentage.

    Per-class accuracy on a class absent from the evaluation set is None,
    never 0.  Selection percentages need dataset-wide class totals, so they
    are None when ground truth is incomplete (human mode).
    """
    if evaluation_set == "full-dataset":
        eval_ids = list(range(len(dataset)))
        labels = dataset.label_vector(eval_ids)
    elif evaluation_set == "holdout":
        eval_ids = list(pool.validation_ids)
        labels = np.array([pool.validation_labels[i] for i in eval_ids], dtype=np.int64)
    else:
        raise ConfigurationError(f"evaluation_set must be one of {EVALUATION_SETS}")

    preds = predict_deterministic(model, dataset.feature_matrix(eval_ids), eval_ids)
    predicted = preds.values[0].argmax(axis=1) if len(eval_ids) else np.zeros(0, dtype=np.int64)
    correct = predicted == labels
    overall = float(correct.mean()) if len(eval_ids) else 0.0

    n = dataset.num_classes
    per_class: list[float | None] = []
    for k in range(n):
        mask = labels == k
        per_class.append(float(correct[mask].mean()) if mask.any() else None)

    totals = dataset.true_class_totals()
    if totals is None:
        pct = None
    else:
        pct = [float(cumulative_selected[k] / totals[k]) if totals[k] else 0.0 for k in range(n)]

    return {
        "overall_accuracy": overall,
        "per_class_accuracy": per_class,
        "per_class_selection_pct": pct,
    }


def run_round(pool: Pool, config: RunConfig, round_index: int,
              cumulative_selected: np.ndarray, seeds: RoundSeeds,
              label_source=None) -> tuple[TrainedModel, ScoredBatch, RoundRecord]:
    """One cycle: train from scratch, select, obtain labels, reveal, record.

    The recorded labeled_count is the size of the set the model trained on;
    when budget headroom (or the unlabeled pool) is empty the round is
    evaluation-only and the returned batch is empty.
    """
    if not pool.labeled_ids:
        raise ConfigurationError("the pool has no labeled samples to train on")
    if label_source is None:
        label_source = OracleLabelSource(pool.dataset)

    started = time.perf_counter()
    labeled_count = len(pool.labeled_ids)
    model = train_on_pool(pool, config, seeds)

    k = min(config.query_batch, pool.headroom, len(pool.unlabeled_ids))
    if k > 0:
        batch = select_batch(model, pool, config, k, seeds)
        probabilities = None
        if getattr(label_source, "wants_probabilities", False):
            feats = pool.dataset.feature_matrix(batch.selected_ids)
            tensor = predict_deterministic(model, feats, batch.selected_ids)
            probabilities = {
                i: tensor.values[0, j].tolist() for j, i in enumerate(batch.selected_ids)
            }
        labels = label_source.request_labels(batch.selected_ids, probabilities)
        reveal_labels(pool, [(i, labels[i]) for i in batch.selected_ids])
        for i in batch.selected_ids:
            cumulative_selected[pool.assigned_labels[i]] += 1
    else:
        batch = ScoredBatch(strategy=config.strategy, selected_ids=[], scores=[])

    metrics = compute_metrics(model, pool.dataset, pool, cumulative_selected,
                              config.evaluation_set)
    record = RoundRecord(
        round_index=round_index,
        labeled_count=labeled_count,
        overall_accuracy=metrics["overall_accuracy"],
        per_class_accuracy=metrics["per_class_accuracy"],
        per_class_selection_pct=metrics["per_class_selection_pct"],
        best_validation_accuracy=model.best_validation_accuracy,
        selected_ids=list(batch.selected_ids),
        wall_time=time.perf_counter() - started,
    )
    return model, batch, record


def _run_repetition(dataset: Dataset, config: RunConfig, repetition: int) -> list[RoundRecord]:
    pool = init_pool(dataset, config.validation_fraction, config.initial_labeled,
                     config.budget, pool_seed(config.master_seed, repetition))
    cumulative = np.zeros(dataset.num_classes, dtype=np.int64)
    records: list[RoundRecord] = []
    round_index = 0
    while True:
        seeds = round_seeds(config.master_seed, repetition, round_index)
        _, batch, record = run_round(pool, config, round_index, cumulative, seeds)
        records.append(record)
        if not batch.selected_ids:
            break
        round_index += 1
    return records


def run_experiment(dataset: Dataset, config: RunConfig, jobs: int = 1) -> RunResult:
    """Run `repetitions` independent repetitions and aggregate the curves."""
    config.validate()
    if config.label_source != "oracle":
        raise ConfigurationError("run_experiment drives the simulated oracle; "
                                 "human sessions run through the annotation service")
    if not dataset.fully_labeled:
        raise ConfigurationError("oracle mode requires a fully labeled dataset")
    if config.evaluation_set == "holdout" and config.validation_fraction == 0:
        raise ConfigurationError("holdout evaluation needs validation_fraction > 0")

    reps = range(config.repetitions)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool_exec:
            futures = [pool_exec.submit(_run_repetition, dataset, config, r) for r in reps]
            per_rep = [f.result() for f in futures]
    else:
        per_rep = [_run_repetition(dataset, config, r) for r in reps]

    lengths = {len(rounds) for rounds in per_rep}
    if len(lengths) != 1:
        raise ConfigurationError(f"repetitions produced unequal round counts: {sorted(lengths)}")
    n_rounds = lengths.pop()
    acc = np.array([[rec.overall_accuracy for rec in rounds] for rounds in per_rep])
    return RunResult(
        config=config,
        rounds_per_repetition=per_rep,
        labeled_counts=[per_rep[0][r].labeled_count for r in range(n_rounds)],
        mean_accuracy=[float(v) for v in acc.mean(axis=0)],
        std_accuracy=[float(v) for v in acc.std(axis=0)],
        repetition_seeds=[pool_seed(config.master_seed, r) for r in reps],
    )


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------


def _fmt(value: float | None) -> str:
    if value is None:
        return "nan"
    return repr(float(value))


def config_to_json(config: RunConfig, dataset_info: dict | None = None) -> dict:
    doc = {
        "strategy": config.strategy,
        "initial_labeled": config.initial_labeled,
        "query_batch": config.query_batch,
        "budget": config.budget,
        "validation_fraction": config.validation_fraction,
        "repetitions": config.repetitions,
        "master_seed": config.master_seed,
        "label_source": config.label_source,
        "evaluation_set": config.evaluation_set,
        "model_hidden_widths": list(config.model.hidden_widths),
        "model_dropout_rate": config.model.dropout_rate,
        "model_epochs": config.model.epochs,
        "model_learning_rate": config.model.learning_rate,
        "model_batch_size": config.model.batch_size,
        "model_weight_init_seed": config.model.weight_init_seed,
        "model_mc_passes": config.model.mc_passes,
        "repetition_seeds": [pool_seed(config.master_seed, r) for r in range(config.repetitions)],
    }
    if dataset_info:
        doc.update(dataset_info)
    return doc


def config_from_json(doc: dict) -> RunConfig:
    model = ModelHyperparams(
        hidden_widths=tuple(int(w) for w in doc.get("model_hidden_widths", (64, 32))),
        dropout_rate=float(doc.get("model_dropout_rate", 0.25)),
        epochs=int(doc.get("model_epochs", 100)),
        learning_rate=float(doc.get("model_learning_rate", 0.001)),
        batch_size=int(doc.get("model_batch_size", 32)),
        weight_init_seed=int(doc.get("model_weight_init_seed", 0)),
        mc_passes=int(doc.get("model_mc_passes", 20)),
    )
    return RunConfig(
        strategy=doc["strategy"],
        initial_labeled=int(doc["initial_labeled"]),
        query_batch=int(doc["query_batch"]),
        budget=int(doc["budget"]),
        validation_fraction=float(doc["validation_fraction"]),
        repetitions=int(doc["repetitions"]),
        model=model,
        master_seed=int(doc["master_seed"]),
        label_source=doc.get("label_source", "oracle"),
        evaluation_set=doc.get("evaluation_set", "full-dataset"),
    )


def persist_run(result: RunResult, out_dir, dataset_info: dict | None = None) -> None:
    """Write config.json, rounds.csv, selection.csv, and curves.csv.

    Round wall times are nondeterministic, so they go to a separate
    timings.csv and the three analysis files are byte-reproducible.
    """
    os.makedirs(out_dir, exist_ok=True)
    n = len(result.rounds_per_repetition[0][0].per_class_accuracy)

    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(config_to_json(result.config, dataset_info), fh, indent=2, sort_keys=True)
        fh.write("\n")

    acc_cols = [f"acc_class_{k}" for k in range(n)]
    sel_cols = [f"sel_pct_class_{k}" for k in range(n)]
    with open(os.path.join(out_dir, "rounds.csv"), "w", encoding="utf-8") as fh:
        fh.write(",".join(["repetition", "round_index", "labeled_count", "overall_accuracy",
                           "best_validation_accuracy", *acc_cols, *sel_cols]) + "\n")
        for rep, rounds in enumerate(result.rounds_per_repetition):
            for rec in rounds:
                sel = rec.per_class_selection_pct or [None] * n
                fields = [str(rep), str(rec.round_index), str(rec.labeled_count),
                          _fmt(rec.overall_accuracy), _fmt(rec.best_validation_accuracy)]
                fields.extend(_fmt(v) for v in rec.per_class_accuracy)
                fields.extend(_fmt(v) for v in sel)
                fh.write(",".join(fields) + "\n")

    with open(os.path.join(out_dir, "selection.csv"), "w", encoding="utf-8") as fh:
        fh.write("round,repetition,sample_id\n")
        for rep, rounds in enumerate(result.rounds_per_repetition):
            for rec in rounds:
                for sid in rec.selected_ids:
                    fh.write(f"{rec.round_index},{rep},{sid}\n")

    write_curves({result.config.strategy: result}, os.path.join(out_dir, "curves.csv"))

    with open(os.path.join(out_dir, "timings.csv"), "w", encoding="utf-8") as fh:
        fh.write("repetition,round_index,wall_time\n")
        for rep, rounds in enumerate(result.rounds_per_repetition):
            for rec in rounds:
                fh.write(f"{rep},{rec.round_index},{_fmt(rec.wall_time)}\n")


def write_curves(results_by_strategy: dict[str, RunResult], path) -> None:
    """Mean/std accuracy per round, one block per strategy."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("strategy,round_index,labeled_count,mean_accuracy,std_accuracy\n")
        for strategy in sorted(results_by_strategy):
            result = results_by_strategy[strategy]
            for r, count in enumerate(result.labeled_counts):
                fh.write(f"{strategy},{r},{count},{_fmt(result.mean_accuracy[r])},"
                         f"{_fmt(result.std_accuracy[r])}\n")


def parse_rounds_csv(path) -> list[dict]:
    """Read rounds.csv back into one dict per row (floats, None for nan)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split(",")
        row: dict = {}
        for key, val in zip(header, parts):
            if key in ("repetition", "round_index", "labeled_count"):
                row[key] = int(val)
            elif val == "nan":
                row[key] = None
            else:
                row[key] = float(val)
        rows.append(row)
    return rows
