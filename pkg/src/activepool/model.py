"""Dropout MLP classifier trained with Adam, plus an external-model adapter.

The network is fully connected: ReLU hidden layers with inverted dropout
after each, a linear output layer, and softmax probabilities.  Everything
runs in float64 numpy with explicit seeding, so training and prediction are
bit-reproducible.  Gradients are computed analytically (backpropagation);
tests check them against central finite differences.

Externally computed predictions and embeddings (e.g. from a large CNN) can
be loaded from a plain text tensor format and drive acquisition exactly like
the built-in model's outputs.
"""

from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    IntegrityError,
    ShapeError,
    TrainingDivergedError,
    ValidationError,
)

Params = list[tuple[np.ndarray, np.ndarray]]

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    num_classes: int
    hidden_widths: tuple[int, ...] = (64, 32)
    dropout_rate: float = 0.25
    epochs: int = 100
    learning_rate: float = 0.001
    batch_size: int = 32
    weight_init_seed: int = 0
    mc_passes: int = 20

    def validate(self) -> None:
        if self.input_dim < 1:
            raise ConfigurationError("input_dim must be >= 1")
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be >= 2")
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ConfigurationError("hidden widths must all be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigurationError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.mc_passes < 1:
            raise ConfigurationError("mc_passes must be >= 1")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_widths, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float | None
    validation_accuracy: float


@dataclass
class TrainedModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: ModelConfig
    best_validation_accuracy: float
    best_epoch: int
    training_log: list[EpochRecord]

    @property
    def params(self) -> Params:
        return list(zip(self.weights, self.biases))


@dataclass
class PredictionTensor:
    """T stochastic passes x U samples x N classes of softmax probabilities."""

    values: np.ndarray
    sample_ids: list[int]

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ShapeError(f"prediction tensor must be 3-D, got shape {self.values.shape}")
        if self.values.shape[1] != len(self.sample_ids):
            raise ShapeError("axis 1 of the prediction tensor must match sample_ids")

    @property
    def pass_count(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[2]

    def validate_rows(self, tol: float = 1e-9) -> None:
        """Check every (t, u) row is a probability vector within `tol`."""
        if self.values.size == 0:
            return
        if np.any(self.values < 0):
            t, u, _ = np.argwhere(self.values < 0)[0]
            raise ValidationError(f"negative probability in row (t={t}, u={u})")
        sums = self.values.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > tol)
        if len(bad):
            t, u = bad[0]
            raise ValidationError(
                f"row (t={t}, u={u}) sums to {float(sums[t, u]):.9g}, expected 1"
            )


@dataclass
class EmbeddingMatrix:
    """U x e penultimate-layer activations, row-aligned with sample_ids."""

    values: np.ndarray
    sample_ids: list[int]

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ShapeError(f"embedding matrix must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] != len(self.sample_ids):
            raise ShapeError("embedding rows must match sample_ids")


def init_params(config: ModelConfig, seed: int) -> Params:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed & _MASK64)
    params: Params = []
    for fan_in, fan_out in config.layer_dims:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = np.zeros(fan_out)
        params.append((w, b))
    return params


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _forward(params: Params, x: np.ndarray, masks: list[np.ndarray] | None = None):
    """Return (pre-activations, post-dropout activations, logits).

    `masks` holds one inverted-dropout mask per hidden layer (already scaled
    by 1/keep_prob); None disables dropout.
    """
    pre: list[np.ndarray] = []
    acts: list[np.ndarray] = [x]
    h = x
    n_hidden = len(params) - 1
    for l in range(n_hidden):
        w, b = params[l]
        z = h @ w + b
        pre.append(z)
        h = _relu(z)
        if masks is not None:
            h = h * masks[l]
        acts.append(h)
    w_out, b_out = params[-1]
    logits = h @ w_out + b_out
    return pre, acts, logits


def cross_entropy_loss(params: Params, x: np.ndarray, y: np.ndarray,
                       masks: list[np.ndarray] | None = None) -> float:
    _, _, logits = _forward(params, x, masks)
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(y)), y].mean())


def loss_and_gradients(params: Params, x: np.ndarray, y: np.ndarray,
                       masks: list[np.ndarray] | None = None):
    """Mean cross-entropy loss and its analytic gradients w.r.t. all params."""
    pre, acts, logits = _forward(params, x, masks)
    batch = len(y)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(batch), y].mean())

    probs = np.exp(logp)
    dlogits = probs.copy()
    dlogits[np.arange(batch), y] -= 1.0
    dlogits /= batch

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)
    w_out, _ = params[-1]
    grads[-1] = (acts[-1].T @ dlogits, dlogits.sum(axis=0))
    dh = dlogits @ w_out.T
    for l in range(len(params) - 2, -1, -1):
        if masks is not None:
            dh = dh * masks[l]
        dz = dh * (pre[l] > 0)
        grads[l] = (acts[l].T @ dz, dz.sum(axis=0))
        if l > 0:
            w, _ = params[l]
            dh = dz @ w.T
    return loss, grads


def _accuracy(params: Params, x: np.ndarray, y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    _, _, logits = _forward(params, x)
    return float((logits.argmax(axis=1) == y).mean())


def _check_features(x: np.ndarray, dim: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and x.size == 0:
        x = x.reshape(0, dim)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"{what} must be U x {dim}, got shape {x.shape}")
    return x


def train_from_scratch(config: ModelConfig, labeled_features: np.ndarray,
                       labeled_labels: np.ndarray, validation_features: np.ndarray,
                       validation_labels: np.ndarray, train_seed: int) -> TrainedModel:
    """Train a fresh network; keep the weights of the best-validation epoch.

    Weights are initialized from weight_init_seed XOR train_seed, never
    warm-started.  Validation accuracy ties go to the earlier epoch; with an
    empty validation set the final epoch is kept (accuracy recorded as 0.0).
    """
    config.validate()
    x = _check_features(labeled_features, config.input_dim, "labeled features")
    y = np.asarray(labeled_labels, dtype=np.int64)
    if len(y) != len(x):
        raise ShapeError("labeled features and labels disagree in length")
    if len(y) < 1:
        raise ConfigurationError("training needs at least one labeled example")
    if np.any(y < 0) or np.any(y >= config.num_classes):
        raise ConfigurationError(
            f"labeled class index outside [0, {config.num_classes}); got {int(y.min())}..{int(y.max())}"
        )
    xv = _check_features(validation_features, config.input_dim, "validation features")
    yv = np.asarray(validation_labels, dtype=np.int64)
    if len(yv) != len(xv):
        raise ShapeError("validation features and labels disagree in length")
    if len(yv) and (np.any(yv < 0) or np.any(yv >= config.num_classes)):
        raise ConfigurationError("validation class index outside [0, N)")

    rng = np.random.default_rng((config.weight_init_seed ^ train_seed) & _MASK64)
    params: Params = []
    for fan_in, fan_out in config.layer_dims:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))

    keep = 1.0 - config.dropout_rate
    has_validation = len(yv) > 0

    if config.epochs == 0:
        acc = _accuracy(params, xv, yv)
        log = [EpochRecord(epoch=0, train_loss=None, validation_accuracy=acc)]
        return TrainedModel(
            weights=[w for w, _ in params], biases=[b for _, b in params], config=config,
            best_validation_accuracy=acc, best_epoch=0, training_log=log,
        )

    m_state = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    v_state = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    step = 0
    best_acc = -1.0
    best_epoch = -1
    best_params: Params | None = None
    log: list[EpochRecord] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(y))
        epoch_losses = []
        for start in range(0, len(y), config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            if config.dropout_rate > 0:
                batch_masks = [
                    (rng.random((len(idx), width)) < keep) / keep
                    for width in config.hidden_widths
                ]
            else:
                batch_masks = None
            loss, grads = loss_and_gradients(params, xb, yb, batch_masks)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            epoch_losses.append(loss)
            step += 1
            bc1 = 1.0 - _ADAM_BETA1 ** step
            bc2 = 1.0 - _ADAM_BETA2 ** step
            new_params = []
            for l, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
                mw, mb = m_state[l]
                vw, vb = v_state[l]
                mw = _ADAM_BETA1 * mw + (1 - _ADAM_BETA1) * gw
                mb = _ADAM_BETA1 * mb + (1 - _ADAM_BETA1) * gb
                vw = _ADAM_BETA2 * vw + (1 - _ADAM_BETA2) * gw ** 2
                vb = _ADAM_BETA2 * vb + (1 - _ADAM_BETA2) * gb ** 2
                m_state[l] = (mw, mb)
                v_state[l] = (vw, vb)
                w = w - config.learning_rate * (mw / bc1) / (np.sqrt(vw / bc2) + _ADAM_EPS)
                b = b - config.learning_rate * (mb / bc1) / (np.sqrt(vb / bc2) + _ADAM_EPS)
                new_params.append((w, b))
            params = new_params

        acc = _accuracy(params, xv, yv)
        log.append(EpochRecord(epoch=epoch, train_loss=float(np.mean(epoch_losses)),
                               validation_accuracy=acc))
        if acc > best_acc:
            best_acc = acc
            best_epoch = epoch
            best_params = copy.deepcopy(params)

    if not has_validation:
        best_params = params
        best_epoch = config.epochs
        best_acc = 0.0

    return TrainedModel(
        weights=[w for w, _ in best_params], biases=[b for _, b in best_params],
        config=config, best_validation_accuracy=float(best_acc), best_epoch=best_epoch,
        training_log=log,
    )


def predict_deterministic(model: TrainedModel, features: np.ndarray,
                          sample_ids: list[int] | None = None) -> PredictionTensor:
    """Softmax probabilities with dropout disabled; a T=1 tensor."""
    x = _check_features(features, model.config.input_dim, "features")
    if sample_ids is None:
        sample_ids = list(range(len(x)))
    if len(x) == 0:
        values = np.zeros((1, 0, model.config.num_classes))
    else:
        _, _, logits = _forward(model.params, x)
        values = _softmax(logits)[np.newaxis, :, :]
    return PredictionTensor(values=values, sample_ids=list(sample_ids))


def predict_stochastic(model: TrainedModel, features: np.ndarray, passes: int,
                       mc_seed: int, sample_ids: list[int] | None = None) -> PredictionTensor:
    """T forward passes with a fresh per-pass dropout mask on every hidden layer.

    Each pass shares one mask across all samples, so a pass behaves like one
    sampled weight realization.  Deterministic given (model, mc_seed).
    """
    if passes < 1:
        raise ConfigurationError("passes must be >= 1")
    x = _check_features(features, model.config.input_dim, "features")
    if sample_ids is None:
        sample_ids = list(range(len(x)))
    cfg = model.config
    if cfg.dropout_rate == 0:
        warnings.warn("dropout_rate is 0: all stochastic passes are identical", stacklevel=2)
    rng = np.random.default_rng(mc_seed & _MASK64)
    keep = 1.0 - cfg.dropout_rate
    rows = []
    for _ in range(passes):
        if cfg.dropout_rate > 0:
            masks = [(rng.random(width) < keep) / keep for width in cfg.hidden_widths]
        else:
            masks = None
        if len(x) == 0:
            rows.append(np.zeros((0, cfg.num_classes)))
        else:
            _, _, logits = _forward(model.params, x, masks)
            rows.append(_softmax(logits))
    return PredictionTensor(values=np.stack(rows, axis=0), sample_ids=list(sample_ids))


def embed(model: TrainedModel, features: np.ndarray,
          sample_ids: list[int] | None = None) -> EmbeddingMatrix:
    """Last hidden-layer activations with dropout disabled."""
    x = _check_features(features, model.config.input_dim, "features")
    if sample_ids is None:
        sample_ids = list(range(len(x)))
    if len(x) == 0:
        values = np.zeros((0, model.config.hidden_widths[-1]))
    else:
        _, acts, _ = _forward(model.params, x)
        values = acts[-1]
    return EmbeddingMatrix(values=values, sample_ids=list(sample_ids))


# --------------------------------------------------------------------------
# Text tensor format: external predictions and embeddings
# --------------------------------------------------------------------------


def _read_lines(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read().splitlines()


def _parse_ids(line: str, count: int, path, lineno: int) -> list[int]:
    parts = line.split() if line.strip() else []
    if len(parts) != count:
        raise ValidationError(f"{path}: line {lineno}: expected {count} sample ids, got {len(parts)}")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ValidationError(f"{path}: line {lineno}: non-integer sample id") from None


def read_prediction_file(path) -> PredictionTensor:
    """Parse a `PRED T U N` text tensor and validate its probability rows."""
    lines = _read_lines(path)
    if not lines:
        raise ValidationError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "PRED":
        raise ValidationError(f"{path}: line 1: expected header 'PRED T U N'")
    try:
        t_count, u_count, n_classes = int(head[1]), int(head[2]), int(head[3])
    except ValueError:
        raise ValidationError(f"{path}: line 1: non-integer dimensions") from None
    if t_count < 1 or u_count < 0 or n_classes < 1:
        raise ValidationError(f"{path}: line 1: invalid dimensions T={t_count} U={u_count} N={n_classes}")
    if len(lines) < 2:
        raise ValidationError(f"{path}: missing sample id line")
    ids = _parse_ids(lines[1], u_count, path, 2)
    expected = 2 + t_count * u_count
    if len([ln for ln in lines[2:] if ln.strip()]) != t_count * u_count or len(lines) < expected:
        raise ValidationError(
            f"{path}: expected {t_count * u_count} value lines after the ids, got {len(lines) - 2}"
        )
    values = np.zeros((t_count, u_count, n_classes))
    for t in range(t_count):
        for u in range(u_count):
            lineno = 3 + t * u_count + u
            parts = lines[lineno - 1].split()
            if len(parts) != n_classes:
                raise ValidationError(
                    f"{path}: line {lineno}: expected {n_classes} values, got {len(parts)}"
                )
            try:
                row = np.array([float(p) for p in parts])
            except ValueError:
                raise ValidationError(f"{path}: line {lineno}: non-numeric value") from None
            if np.any(row < 0):
                raise ValidationError(f"{path}: row (t={t}, u={u}): negative probability")
            if abs(float(row.sum()) - 1.0) > 1e-6:
                raise ValidationError(
                    f"{path}: row (t={t}, u={u}) sums to {float(row.sum()):.9g}, expected 1 +- 1e-6"
                )
            values[t, u] = row
    return PredictionTensor(values=values, sample_ids=ids)


def read_embedding_file(path) -> EmbeddingMatrix:
    """Parse an `EMB U E` text tensor."""
    lines = _read_lines(path)
    if not lines:
        raise ValidationError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "EMB":
        raise ValidationError(f"{path}: line 1: expected header 'EMB U E'")
    try:
        u_count, e_dim = int(head[1]), int(head[2])
    except ValueError:
        raise ValidationError(f"{path}: line 1: non-integer dimensions") from None
    if u_count < 0 or e_dim < 1:
        raise ValidationError(f"{path}: line 1: invalid dimensions U={u_count} E={e_dim}")
    if len(lines) < 2:
        raise ValidationError(f"{path}: missing sample id line")
    ids = _parse_ids(lines[1], u_count, path, 2)
    values = np.zeros((u_count, e_dim))
    for u in range(u_count):
        lineno = 3 + u
        if lineno - 1 >= len(lines):
            raise ValidationError(f"{path}: line {lineno}: missing embedding row")
        parts = lines[lineno - 1].split()
        if len(parts) != e_dim:
            raise ValidationError(f"{path}: line {lineno}: expected {e_dim} values, got {len(parts)}")
        try:
            values[u] = [float(p) for p in parts]
        except ValueError:
            raise ValidationError(f"{path}: line {lineno}: non-numeric value") from None
    return EmbeddingMatrix(values=values, sample_ids=ids)


def load_external(predictions_path, embeddings_path) -> tuple[PredictionTensor, EmbeddingMatrix]:
    """Load and cross-check externally computed predictions and embeddings."""
    preds = read_prediction_file(predictions_path)
    embs = read_embedding_file(embeddings_path)
    if preds.sample_ids != embs.sample_ids:
        raise IntegrityError(
            f"sample ids disagree between {predictions_path} and {embeddings_path}"
        )
    return preds, embs


def write_prediction_file(tensor: PredictionTensor, path) -> None:
    t_count, u_count, _ = tensor.values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"PRED {t_count} {u_count} {tensor.num_classes}\n")
        fh.write(" ".join(str(i) for i in tensor.sample_ids) + "\n")
        for t in range(t_count):
            for u in range(u_count):
                fh.write(" ".join(repr(float(v)) for v in tensor.values[t, u]) + "\n")


def write_embedding_file(emb: EmbeddingMatrix, path) -> None:
    u_count, e_dim = emb.values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"EMB {u_count} {e_dim}\n")
        fh.write(" ".join(str(i) for i in emb.sample_ids) + "\n")
        for u in range(u_count):
            fh.write(" ".join(repr(float(v)) for v in emb.values[u]) + "\n")
