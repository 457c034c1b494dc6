"""Dataset ingestion, synthetic data generation, and pool-state management.

The dataset is a fixed list of feature vectors with optional ground-truth
labels and optional display payload references.  A Pool partitions the
dataset ids into a labeled set, an unlabeled set, and a held-out validation
set, and accounts for the labeling budget.  Validation labels are tracked
separately and do not count against the budget; the budget governs training
labels only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExhaustedError,
    CapabilityError,
    ConfigurationError,
    IntegrityError,
    ParseError,
    StateError,
)

LABEL_UNKNOWN = "?"


@dataclass(frozen=True)
class Sample:
    """One data point: dense id, feature vector, optional payload and label."""

    id: int
    features: np.ndarray
    payload_ref: str | None = None
    true_label: int | None = None


@dataclass(frozen=True)
class Dataset:
    """An ingested or generated dataset with dense ids 0..M-1."""

    samples: list[Sample]
    dimension: int
    num_classes: int

    def __post_init__(self):
        for i, s in enumerate(self.samples):
            if s.id != i:
                raise IntegrityError(f"sample ids must be dense 0..M-1; position {i} has id {s.id}")
            if s.features.shape != (self.dimension,):
                raise IntegrityError(
                    f"sample {s.id} has {s.features.shape[0]} features, expected {self.dimension}"
                )
            if s.true_label is not None and not (0 <= s.true_label < self.num_classes):
                raise IntegrityError(
                    f"sample {s.id} has label {s.true_label} outside [0, {self.num_classes})"
                )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def fully_labeled(self) -> bool:
        return all(s.true_label is not None for s in self.samples)

    def feature_matrix(self, ids=None) -> np.ndarray:
        """Features of the given ids (all samples when ids is None), row-aligned."""
        if ids is None:
            ids = range(len(self.samples))
        return np.array([self.samples[i].features for i in ids], dtype=np.float64).reshape(
            -1, self.dimension
        )

    def label_vector(self, ids) -> np.ndarray:
        """True labels of the given ids; raises if any is missing."""
        labels = []
        for i in ids:
            lab = self.samples[i].true_label
            if lab is None:
                raise CapabilityError(f"sample {i} has no ground-truth label")
            labels.append(lab)
        return np.array(labels, dtype=np.int64)

    def true_class_totals(self) -> np.ndarray | None:
        """Per-class sample counts over the whole dataset, or None without full truth."""
        if not self.fully_labeled:
            return None
        counts = np.zeros(self.num_classes, dtype=np.int64)
        for s in self.samples:
            counts[s.true_label] += 1
        return counts


@dataclass(frozen=True)
class SyntheticSpec:
    """Isotropic Gaussian mixture: one (center, scale) blob per class."""

    num_classes: int
    samples_per_class: list[int]
    dimension: int
    class_centers: list[list[float]]
    class_scales: list[float]
    seed: int

    def validate(self) -> None:
        n = self.num_classes
        if n < 1:
            raise ConfigurationError("num_classes must be >= 1")
        if len(self.samples_per_class) != n:
            raise ConfigurationError("samples_per_class must have num_classes entries")
        if any(c < 1 for c in self.samples_per_class):
            raise ConfigurationError("all class counts must be >= 1")
        if len(self.class_centers) != n:
            raise ConfigurationError("class_centers must have num_classes entries")
        if any(len(c) != self.dimension for c in self.class_centers):
            raise ConfigurationError("every class center must have `dimension` coordinates")
        if len(self.class_scales) != n:
            raise ConfigurationError("class_scales must have num_classes entries")
        if any(s <= 0 for s in self.class_scales):
            raise ConfigurationError("all class scales must be > 0")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw the dataset described by `spec`, deterministically in its seed.

    Samples are drawn class by class, i.i.d. from Gaussian(center_k,
    scale_k^2 * I); ids run 0..M-1 in generation order.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    samples: list[Sample] = []
    next_id = 0
    for k in range(spec.num_classes):
        center = np.asarray(spec.class_centers[k], dtype=np.float64)
        points = rng.normal(loc=center, scale=spec.class_scales[k],
                            size=(spec.samples_per_class[k], spec.dimension))
        for row in points:
            samples.append(Sample(id=next_id, features=row, true_label=k))
            next_id += 1
    return Dataset(samples=samples, dimension=spec.dimension, num_classes=spec.num_classes)


def _feature_header(d: int) -> list[str]:
    return [f"f{j}" for j in range(d)]


def ingest_csv(path, has_payload_column: bool | None = None,
               num_classes: int | None = None) -> Dataset:
    """Read a dataset CSV: header ``id,label[,payload],f0,...,f{d-1}``.

    The format is deliberately strict: UTF-8, comma-separated with no
    quoting, integer ids and labels (label ``?`` marks unlabeled rows),
    decimal features.  Ids must be unique; they are re-densified to 0..M-1
    in ascending id order.  N is inferred as 1 + max label unless
    `num_classes` is given (required when every label is ``?``).

    `has_payload_column`, when not None, must agree with the header.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or all(not ln.strip() for ln in lines):
        raise IntegrityError(f"{path}: empty file")

    header = lines[0].split(",")
    if len(header) < 3 or header[0] != "id" or header[1] != "label":
        raise ParseError(f"{path}: line 1: header must start with 'id,label'")
    payload_present = header[2] == "payload"
    if has_payload_column is not None and has_payload_column != payload_present:
        raise ParseError(
            f"{path}: line 1: payload column {'present' if payload_present else 'absent'} "
            f"but has_payload_column={has_payload_column}"
        )
    feat_start = 3 if payload_present else 2
    d = len(header) - feat_start
    if d < 1:
        raise ParseError(f"{path}: line 1: no feature columns")
    if header[feat_start:] != _feature_header(d):
        raise ParseError(f"{path}: line 1: feature columns must be named f0..f{d - 1}")

    rows: list[tuple[int, int | None, str | None, np.ndarray]] = []
    seen_ids: set[int] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(
                f"{path}: line {lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            sid = int(parts[0])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-integer id {parts[0]!r}") from None
        if sid in seen_ids:
            raise IntegrityError(f"{path}: line {lineno}: duplicate id {sid}")
        seen_ids.add(sid)
        raw_label = parts[1]
        if raw_label == LABEL_UNKNOWN:
            label = None
        else:
            try:
                label = int(raw_label)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: label must be an integer or '?', got {raw_label!r}"
                ) from None
            if label < 0:
                raise ParseError(f"{path}: line {lineno}: negative label {label}")
        payload = parts[2] if payload_present else None
        if payload == "":
            payload = None
        try:
            feats = np.array([float(v) for v in parts[feat_start:]], dtype=np.float64)
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: non-numeric feature value") from None
        rows.append((sid, label, payload, feats))

    if not rows:
        raise IntegrityError(f"{path}: no data rows")

    rows.sort(key=lambda r: r[0])
    labels_seen = [r[1] for r in rows if r[1] is not None]
    if labels_seen:
        inferred = 1 + max(labels_seen)
        n = max(inferred, num_classes) if num_classes is not None else inferred
        if num_classes is not None and inferred > num_classes:
            raise IntegrityError(
                f"{path}: label {max(labels_seen)} exceeds declared num_classes={num_classes}"
            )
    else:
        if num_classes is None:
            raise ConfigurationError(
                f"{path}: every label is '?'; num_classes must be supplied"
            )
        n = num_classes

    samples = [
        Sample(id=i, features=feats, payload_ref=payload, true_label=label)
        for i, (_, label, payload, feats) in enumerate(rows)
    ]
    return Dataset(samples=samples, dimension=samples[0].features.shape[0], num_classes=n)


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the exact CSV format `ingest_csv` reads."""
    has_payload = any(s.payload_ref is not None for s in dataset.samples)
    cols = ["id", "label"] + (["payload"] if has_payload else []) + _feature_header(dataset.dimension)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for s in dataset.samples:
            label = LABEL_UNKNOWN if s.true_label is None else str(s.true_label)
            fields = [str(s.id), label]
            if has_payload:
                payload = s.payload_ref or ""
                if "," in payload:
                    raise IntegrityError(f"payload_ref of sample {s.id} contains a comma")
                fields.append(payload)
            fields.extend(repr(float(v)) for v in s.features)
            fh.write(",".join(fields) + "\n")


@dataclass
class Pool:
    """Labeled / unlabeled / validation partition with budget accounting.

    Mutations go through `reveal_labels`, which validates the whole batch
    before applying anything, so a failed call leaves the pool unchanged.
    """

    dataset: Dataset
    labeled_ids: list[int]
    unlabeled_ids: list[int]
    validation_ids: list[int]
    assigned_labels: dict[int, int]
    validation_labels: dict[int, int]
    num_classes: int
    budget: int
    labels_spent: int = 0
    _unlabeled_set: set[int] = field(default_factory=set, repr=False)

    def __post_init__(self):
        self._unlabeled_set = set(self.unlabeled_ids)
        self.check_invariants()

    def check_invariants(self) -> None:
        lab, unl, val = set(self.labeled_ids), set(self.unlabeled_ids), set(self.validation_ids)
        if len(lab) != len(self.labeled_ids) or len(unl) != len(self.unlabeled_ids) \
                or len(val) != len(self.validation_ids):
            raise StateError("partition lists contain duplicates")
        if lab & unl or lab & val or unl & val:
            raise StateError("partition sets are not pairwise disjoint")
        if lab | unl | val != set(range(len(self.dataset))):
            raise StateError("partition does not cover the dataset id set")
        if set(self.assigned_labels) != lab:
            raise StateError("assigned_labels keys must equal the labeled id set")
        if set(self.validation_labels) - val:
            raise StateError("validation_labels contains non-validation ids")
        if self.labels_spent != len(self.labeled_ids):
            raise StateError("labels_spent must equal |labeled_ids|")
        if self.labels_spent > self.budget:
            raise BudgetExhaustedError(
                f"labels_spent {self.labels_spent} exceeds budget {self.budget}"
            )

    @property
    def headroom(self) -> int:
        return self.budget - self.labels_spent

    def snapshot(self) -> dict:
        """JSON-serializable copy of the partition state (dataset excluded)."""
        return {
            "labeled_ids": list(self.labeled_ids),
            "unlabeled_ids": list(self.unlabeled_ids),
            "validation_ids": list(self.validation_ids),
            "assigned_labels": {str(k): v for k, v in self.assigned_labels.items()},
            "validation_labels": {str(k): v for k, v in self.validation_labels.items()},
            "num_classes": self.num_classes,
            "budget": self.budget,
            "labels_spent": self.labels_spent,
        }

    @classmethod
    def from_snapshot(cls, dataset: Dataset, snap: dict) -> "Pool":
        return cls(
            dataset=dataset,
            labeled_ids=[int(i) for i in snap["labeled_ids"]],
            unlabeled_ids=[int(i) for i in snap["unlabeled_ids"]],
            validation_ids=[int(i) for i in snap["validation_ids"]],
            assigned_labels={int(k): int(v) for k, v in snap["assigned_labels"].items()},
            validation_labels={int(k): int(v) for k, v in snap["validation_labels"].items()},
            num_classes=int(snap["num_classes"]),
            budget=int(snap["budget"]),
            labels_spent=int(snap["labels_spent"]),
        )


def _validation_count(validation_fraction: float, m: int) -> int:
    # ceil with a tiny slack so exact products like 0.07*300 don't round up twice
    return int(math.ceil(validation_fraction * m - 1e-9))


def plan_partition(dataset: Dataset, validation_fraction: float, initial_labeled: int,
                   seed: int) -> tuple[list[int], list[int]]:
    """Choose (validation_ids, initial_labeled_ids) without assigning labels.

    Validation ids are drawn uniformly without replacement.  The initial
    batch is drawn from the remainder, class-stratified proportionally to
    class frequency (remainder seats by largest fractional part, ties to
    the smaller class index) when ground truth is available for the whole
    remainder, else uniformly.
    """
    m = len(dataset)
    if not 0 <= validation_fraction < 1:
        raise ConfigurationError("validation_fraction must lie in [0, 1)")
    if initial_labeled < 1:
        raise ConfigurationError("initial_labeled must be >= 1 (the loop cannot train)")
    val_count = _validation_count(validation_fraction, m)
    if initial_labeled + val_count > m:
        raise ConfigurationError(
            f"initial_labeled ({initial_labeled}) + validation ({val_count}) exceeds M={m}"
        )

    rng = np.random.default_rng(seed)
    validation_ids = sorted(int(i) for i in rng.choice(m, size=val_count, replace=False))
    val_set = set(validation_ids)
    remainder = [i for i in range(m) if i not in val_set]

    labels_known = all(dataset.samples[i].true_label is not None for i in remainder)
    if not labels_known:
        chosen = rng.choice(len(remainder), size=initial_labeled, replace=False)
        initial_ids = sorted(remainder[int(j)] for j in chosen)
        return validation_ids, initial_ids

    by_class: dict[int, list[int]] = {k: [] for k in range(dataset.num_classes)}
    for i in remainder:
        by_class[dataset.samples[i].true_label].append(i)
    total = len(remainder)
    quotas = {}
    fracs = []
    for k in range(dataset.num_classes):
        exact = initial_labeled * len(by_class[k]) / total
        quotas[k] = int(math.floor(exact))
        fracs.append((-(exact - quotas[k]), k))
    seats = initial_labeled - sum(quotas.values())
    for _, k in sorted(fracs):
        if seats == 0:
            break
        if quotas[k] < len(by_class[k]):
            quotas[k] += 1
            seats -= 1
    # pathological leftovers (classes saturated): hand seats to any class with room
    if seats > 0:
        for k in range(dataset.num_classes):
            while seats > 0 and quotas[k] < len(by_class[k]):
                quotas[k] += 1
                seats -= 1

    initial_ids: list[int] = []
    for k in range(dataset.num_classes):
        if quotas[k] == 0:
            continue
        picked = rng.choice(len(by_class[k]), size=quotas[k], replace=False)
        initial_ids.extend(by_class[k][int(j)] for j in picked)
    return validation_ids, sorted(initial_ids)


def assemble_pool(dataset: Dataset, validation_ids: list[int], validation_labels: dict[int, int],
                  initial_labels: dict[int, int], budget: int) -> Pool:
    """Build a Pool from an explicit partition and explicit label maps."""
    if len(initial_labels) > budget:
        raise ConfigurationError(
            f"initial labeled count {len(initial_labels)} exceeds budget {budget}"
        )
    for i, lab in list(initial_labels.items()) + list(validation_labels.items()):
        if not 0 <= lab < dataset.num_classes:
            raise ConfigurationError(f"label {lab} for sample {i} outside [0, {dataset.num_classes})")
    labeled = sorted(initial_labels)
    val = sorted(validation_ids)
    taken = set(labeled) | set(val)
    unlabeled = [i for i in range(len(dataset)) if i not in taken]
    return Pool(
        dataset=dataset,
        labeled_ids=labeled,
        unlabeled_ids=unlabeled,
        validation_ids=val,
        assigned_labels=dict(initial_labels),
        validation_labels=dict(validation_labels),
        num_classes=dataset.num_classes,
        budget=budget,
        labels_spent=len(labeled),
    )


def init_pool(dataset: Dataset, validation_fraction: float, initial_labeled: int,
              budget: int, seed: int) -> Pool:
    """Draw the validation split and the stratified initial batch from truth.

    Requires ground-truth labels (simulated-oracle path); deployments that
    label through humans assemble the pool from `plan_partition` plus the
    labels collected for the planned ids.
    """
    if initial_labeled > budget:
        raise ConfigurationError(
            f"initial_labeled ({initial_labeled}) exceeds budget ({budget})"
        )
    validation_ids, initial_ids = plan_partition(
        dataset, validation_fraction, initial_labeled, seed
    )
    for i in validation_ids + initial_ids:
        if dataset.samples[i].true_label is None:
            raise ConfigurationError(
                f"sample {i} lacks a ground-truth label; simulated mode needs a labeled dataset"
            )
    return assemble_pool(
        dataset,
        validation_ids,
        {i: dataset.samples[i].true_label for i in validation_ids},
        {i: dataset.samples[i].true_label for i in initial_ids},
        budget,
    )


def reveal_labels(pool: Pool, batch: list[tuple[int, int]]) -> Pool:
    """Move the batch ids from unlabeled to labeled, atomically.

    Every id must currently be unlabeled, every label must lie in [0, N),
    and the whole batch must fit in the remaining budget; otherwise the
    pool is left untouched.
    """
    ids = [i for i, _ in batch]
    if len(set(ids)) != len(ids):
        raise StateError("batch contains duplicate ids")
    for i, lab in batch:
        if i not in pool._unlabeled_set:
            raise StateError(f"sample {i} is not in the unlabeled pool")
        if not 0 <= lab < pool.num_classes:
            raise StateError(f"label {lab} for sample {i} outside [0, {pool.num_classes})")
    if pool.labels_spent + len(batch) > pool.budget:
        raise BudgetExhaustedError(
            f"revealing {len(batch)} labels would exceed budget "
            f"({pool.labels_spent}/{pool.budget} spent)"
        )
    id_set = set(ids)
    pool.unlabeled_ids = [i for i in pool.unlabeled_ids if i not in id_set]
    pool._unlabeled_set -= id_set
    for i, lab in batch:
        pool.labeled_ids.append(i)
        pool.assigned_labels[i] = lab
    pool.labels_spent += len(batch)
    return pool


def class_counts(pool: Pool, which: str) -> np.ndarray:
    """Per-class counts over one partition.

    `which` is 'labeled' (assigned labels), 'unlabeled-truth' (ground truth,
    simulated mode only), or 'validation' (validation labels).
    """
    counts = np.zeros(pool.num_classes, dtype=np.int64)
    if which == "labeled":
        for i in pool.labeled_ids:
            counts[pool.assigned_labels[i]] += 1
    elif which == "unlabeled-truth":
        for i in pool.unlabeled_ids:
            lab = pool.dataset.samples[i].true_label
            if lab is None:
                raise CapabilityError(
                    "unlabeled-truth counts need ground truth; unavailable in human mode"
                )
            counts[lab] += 1
    elif which == "validation":
        for i in pool.validation_ids:
            if i not in pool.validation_labels:
                raise CapabilityError(f"validation sample {i} has no label yet")
            counts[pool.validation_labels[i]] += 1
    else:
        raise ConfigurationError(
            f"unknown partition {which!r}; expected labeled|unlabeled-truth|validation"
        )
    return counts
