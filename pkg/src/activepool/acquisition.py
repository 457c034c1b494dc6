"""Batch selection strategies over pool predictions and embeddings.

Five strategies: random, least confidence (ascending max class probability),
entropy (descending Shannon entropy), DBAL (descending BALD mutual
information over Monte-Carlo dropout passes), and core-set (greedy k-center
on embeddings).  All scores use the natural logarithm; the argmax ordering
is invariant to the log base.  Score ties break toward the smaller sample
id, everywhere, so selections are exactly reproducible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, PreconditionError, ShapeError, ValidationError
from .model import EmbeddingMatrix, PredictionTensor

STRATEGIES = ("random", "least_confidence", "entropy", "dbal", "coreset")

_ROW_TOL = 1e-6


@dataclass
class ScoredBatch:
    strategy: str
    selected_ids: list[int]
    scores: list[float]

    def __post_init__(self):
        if len(self.selected_ids) != len(self.scores):
            raise ShapeError("selected_ids and scores must be parallel")
        if len(set(self.selected_ids)) != len(self.selected_ids):
            raise ValidationError("selected_ids must be distinct")


def _validate_rows(rows: np.ndarray) -> None:
    if np.any(rows < 0):
        raise ValidationError("probability vector has a negative entry")
    sums = rows.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > _ROW_TOL):
        raise ValidationError("probability vector does not sum to 1 within 1e-6")


def entropy_of_rows(rows: np.ndarray) -> np.ndarray:
    """Shannon entropy (natural log) per row, with 0*ln(0) = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rows > 0, rows * np.log(rows), 0.0)
    return -terms.sum(axis=-1)


def score_entropy(probs) -> float:
    """Entropy of one probability vector of length N."""
    row = np.asarray(probs, dtype=np.float64)
    if row.ndim != 1:
        raise ShapeError("score_entropy expects a single probability vector")
    _validate_rows(row)
    return float(entropy_of_rows(row))


def score_bald(passes) -> float:
    """BALD mutual information of T probability vectors for one sample.

    I = H(mean over passes) - mean per-pass entropy, clamped at 0 against
    sub-1e-12 rounding.
    """
    rows = np.asarray(passes, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ShapeError("score_bald expects a T x N array with T >= 1")
    _validate_rows(rows)
    if np.all(rows == rows[0]):
        return 0.0  # identical passes disagree by exactly nothing
    disagreement = entropy_of_rows(rows.mean(axis=0)) - entropy_of_rows(rows).mean()
    return float(max(0.0, disagreement))


def _rank_by_score(scores: np.ndarray, ids: np.ndarray, b: int, descending: bool,
                   strategy: str) -> ScoredBatch:
    if b < 1:
        raise ConfigurationError("batch size b must be >= 1")
    k = min(b, len(ids))
    key = -scores if descending else scores
    order = np.lexsort((ids, key))[:k]
    return ScoredBatch(
        strategy=strategy,
        selected_ids=[int(ids[i]) for i in order],
        scores=[float(scores[i]) for i in order],
    )


def select_least_confidence(predictions: PredictionTensor, b: int) -> ScoredBatch:
    """The b samples whose maximum predicted class probability is smallest."""
    if predictions.pass_count != 1:
        raise PreconditionError("least confidence needs a deterministic (T=1) prediction tensor")
    rows = predictions.values[0]
    if rows.size:
        _validate_rows(rows)
    scores = rows.max(axis=1) if len(rows) else np.zeros(0)
    ids = np.asarray(predictions.sample_ids, dtype=np.int64)
    return _rank_by_score(scores, ids, b, descending=False, strategy="least_confidence")


def select_entropy(predictions: PredictionTensor, b: int) -> ScoredBatch:
    """The b samples with the highest predictive entropy."""
    if predictions.pass_count != 1:
        raise PreconditionError("entropy selection needs a deterministic (T=1) prediction tensor")
    rows = predictions.values[0]
    if rows.size:
        _validate_rows(rows)
    scores = entropy_of_rows(rows) if len(rows) else np.zeros(0)
    ids = np.asarray(predictions.sample_ids, dtype=np.int64)
    return _rank_by_score(scores, ids, b, descending=True, strategy="entropy")


def select_dbal(predictions: PredictionTensor, b: int) -> ScoredBatch:
    """The b samples with the highest BALD mutual information over T passes."""
    if predictions.pass_count < 2:
        raise PreconditionError("DBAL needs T >= 2 stochastic passes")
    values = predictions.values
    if values.size:
        _validate_rows(values)
    if len(predictions.sample_ids) and np.all(values == values[0:1]):
        warnings.warn("all stochastic passes are identical; DBAL scores degenerate to zero",
                      stacklevel=2)
    if len(predictions.sample_ids):
        mean_entropy = entropy_of_rows(values.mean(axis=0))
        mean_pass_entropy = entropy_of_rows(values).mean(axis=0)
        scores = np.maximum(0.0, mean_entropy - mean_pass_entropy)
        # samples whose passes agree bit-for-bit score exactly 0
        scores[np.all(values == values[0:1], axis=(0, 2))] = 0.0
    else:
        scores = np.zeros(0)
    ids = np.asarray(predictions.sample_ids, dtype=np.int64)
    return _rank_by_score(scores, ids, b, descending=True, strategy="dbal")


def _min_distance_to(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    return np.sqrt(((points - center) ** 2).sum(axis=1))


def select_coreset_greedy(embeddings_unlabeled: EmbeddingMatrix,
                          embeddings_labeled: EmbeddingMatrix, b: int) -> ScoredBatch:
    """Greedy k-center: repeatedly take the unlabeled point farthest from
    the labeled-plus-selected set; its min-distance at pick time is its score.

    O((L+b) * U * e) time, O(U) extra space.
    """
    if b < 1:
        raise ConfigurationError("batch size b must be >= 1")
    if len(embeddings_labeled.sample_ids) == 0:
        raise PreconditionError("core-set selection needs a nonempty labeled embedding set")
    if embeddings_unlabeled.values.shape[1] != embeddings_labeled.values.shape[1]:
        raise ShapeError("labeled and unlabeled embeddings disagree in width")

    pts = embeddings_unlabeled.values
    ids = np.asarray(embeddings_unlabeled.sample_ids, dtype=np.int64)
    u_count = len(ids)
    if u_count == 0:
        return ScoredBatch(strategy="coreset", selected_ids=[], scores=[])

    min_dist = np.full(u_count, np.inf)
    for center in embeddings_labeled.values:
        np.minimum(min_dist, _min_distance_to(pts, center), out=min_dist)

    available = np.ones(u_count, dtype=bool)
    selected: list[int] = []
    scores: list[float] = []
    for _ in range(min(b, u_count)):
        masked = np.where(available, min_dist, -np.inf)
        best = masked.max()
        candidates = np.flatnonzero(masked == best)
        pos = candidates[np.argmin(ids[candidates])]
        selected.append(int(ids[pos]))
        scores.append(float(min_dist[pos]))
        available[pos] = False
        np.minimum(min_dist, _min_distance_to(pts, pts[pos]), out=min_dist)
    return ScoredBatch(strategy="coreset", selected_ids=selected, scores=scores)


def select_random(unlabeled_ids, b: int, seed: int) -> ScoredBatch:
    """Uniform sample without replacement; scores are all zero."""
    if b < 1:
        raise ConfigurationError("batch size b must be >= 1")
    ids = list(unlabeled_ids)
    rng = np.random.default_rng(seed)
    k = min(b, len(ids))
    picked = rng.choice(len(ids), size=k, replace=False)
    return ScoredBatch(
        strategy="random",
        selected_ids=[int(ids[int(j)]) for j in picked],
        scores=[0.0] * k,
    )
