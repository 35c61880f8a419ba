"""Pool data model: examples, the noisy label channel, and label bookkeeping.

A pool is immutable once noise has been applied; all labeling state lives in
a :class:`LabelStore`.  Observed labels are a persistent per-example noise
realization sampled once, so repeated runs over the same pool see identical
annotations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation, PoolParseError
from . import seeds


@dataclass(frozen=True)
class Example:
    """Read-only view of one pool entry."""

    id: int
    features: np.ndarray
    true_label: int
    observed_label: int
    status: str = "unlabeled"


@dataclass
class Pool:
    """An annotation pool of N examples over classes 1..K.

    ``true_labels`` are hidden from selection strategies; ``observed_labels``
    are what the oracle returns (possibly noise-flipped, fixed at creation).
    """

    features: np.ndarray          # (N, D) float64
    true_labels: np.ndarray       # (N,) int, values in 1..K
    observed_labels: np.ndarray   # (N,) int, values in 1..K
    num_classes: int
    noise_rate: float = 0.0
    seed: int | None = None
    display: list[str | None] | None = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64)
        self.observed_labels = np.asarray(self.observed_labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ConfigError("features must be a 2-D array")
        n = self.features.shape[0]
        if self.true_labels.shape != (n,) or self.observed_labels.shape != (n,):
            raise ConfigError("label arrays must match the number of examples")
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        counts = self.class_counts
        if counts.min() < 1:
            missing = int(np.argmin(counts)) + 1
            raise ConfigError(f"every class needs at least one example; class {missing} is empty")

    @property
    def size(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def class_counts(self) -> np.ndarray:
        """True-label counts N_1..N_K."""
        return np.bincount(self.true_labels, minlength=self.num_classes + 1)[1:]

    def example(self, example_id: int, store: "LabelStore | None" = None) -> Example:
        status = "unlabeled"
        if store is not None and store.is_labeled(example_id):
            status = "labeled"
        return Example(
            id=example_id,
            features=self.features[example_id],
            true_label=int(self.true_labels[example_id]),
            observed_label=int(self.observed_labels[example_id]),
            status=status,
        )


def imbalance_ratio(pool: Pool) -> float:
    """min_k N_k / max_k N_k, in (0, 1]."""
    counts = pool.class_counts
    return float(counts.min() / counts.max())


def _class_means(num_classes: int, dim: int) -> np.ndarray:
    """Unit-norm class means, spread as far apart as the geometry allows.

    Two classes sit at +/- e1.  With dim >= num_classes the means are the
    centered standard basis (a regular simplex).  Lower-dimensional feature
    spaces fall back to evenly spaced directions on a circle (dim >= 2) or
    evenly spaced points on a line (dim == 1).
    """
    k, d = num_classes, dim
    if k == 2:
        means = np.zeros((2, d))
        means[0, 0] = 1.0
        means[1, 0] = -1.0
        return means
    if d >= k:
        means = np.zeros((k, d))
        means[:, :k] = np.eye(k) - 1.0 / k
        return means / np.linalg.norm(means, axis=1, keepdims=True)
    if d >= 2:
        angles = 2.0 * np.pi * np.arange(k) / k
        means = np.zeros((k, d))
        means[:, 0] = np.cos(angles)
        means[:, 1] = np.sin(angles)
        return means
    return np.linspace(-1.0, 1.0, k).reshape(k, 1)


def generate_synthetic(
    num_classes: int,
    counts: tuple[int, ...] | list[int],
    dim: int,
    separation: float,
    seed: int,
) -> Pool:
    """Gaussian-mixture pool: class k ~ N(mu_k, I) with ||mu_k|| = separation.

    Examples are shuffled by ``seed`` so class blocks do not survive into id
    order.  Observed labels start equal to true labels; apply noise with
    :func:`apply_noise`.
    """
    if num_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {num_classes}")
    counts = [int(c) for c in counts]
    if len(counts) != num_classes:
        raise ConfigError(f"expected {num_classes} class counts, got {len(counts)}")
    if any(c < 1 for c in counts):
        raise ConfigError(f"class counts must be >= 1, got {counts}")
    if dim < 1:
        raise ConfigError(f"feature dimension must be >= 1, got {dim}")
    if separation < 0:
        raise ConfigError(f"separation must be >= 0, got {separation}")

    rng = seeds.stream(seed, seeds.POOL_SHUFFLE)
    means = separation * _class_means(num_classes, dim)
    total = sum(counts)
    features = np.empty((total, dim))
    labels = np.empty(total, dtype=np.int64)
    row = 0
    for k, count in enumerate(counts, start=1):
        features[row : row + count] = means[k - 1] + rng.standard_normal((count, dim))
        labels[row : row + count] = k
        row += count
    perm = rng.permutation(total)
    return Pool(
        features=features[perm],
        true_labels=labels[perm],
        observed_labels=labels[perm].copy(),
        num_classes=num_classes,
        noise_rate=0.0,
        seed=seed,
    )


def apply_noise(pool: Pool, eta: float, seed: int) -> Pool:
    """Flip each observed label with probability eta to a uniform other class.

    Returns a new pool; the realization is fixed by ``seed`` and never
    re-sampled afterwards.
    """
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"noise rate must be in [0, 1], got {eta}")
    rng = seeds.stream(seed, seeds.NOISE)
    n, k = pool.size, pool.num_classes
    flip = rng.random(n) < eta
    # Uniform draw over the K-1 other classes: offset in 1..K-1 added mod K.
    offsets = rng.integers(1, k, size=n)
    observed = pool.true_labels.copy()
    flipped = (pool.true_labels - 1 + offsets) % k + 1
    observed[flip] = flipped[flip]
    return Pool(
        features=pool.features,
        true_labels=pool.true_labels,
        observed_labels=observed,
        num_classes=k,
        noise_rate=eta,
        seed=pool.seed,
        display=pool.display,
    )


def save_pool(pool: Pool, path: str) -> None:
    """Write the pool in the line-delimited record format (true labels)."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(pool.size):
            record = {
                "id": i,
                "features": [float(v) for v in pool.features[i]],
                "label": int(pool.true_labels[i]),
            }
            if pool.display is not None and pool.display[i] is not None:
                record["display"] = pool.display[i]
            fh.write(json.dumps(record) + "\n")


def load_pool(path: str) -> Pool:
    """Load a pool from line-delimited records {id, features, label[, display]}.

    Ids must be exactly 0..N-1, labels must cover 1..K with no empty class,
    and every record must share the feature dimension of the first.
    """
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoolParseError(f"line {line_no}: invalid record ({exc.msg})") from exc
            for key in ("id", "features", "label"):
                if key not in rec:
                    raise PoolParseError(f"line {line_no}: missing field '{key}'")
            records.append((line_no, rec))
    if not records:
        raise PoolParseError(f"{path}: pool file is empty")

    dim = len(records[0][1]["features"])
    n = len(records)
    features = np.empty((n, dim))
    labels = np.empty(n, dtype=np.int64)
    display: list[str | None] = [None] * n
    seen = set()
    for line_no, rec in records:
        ex_id = rec["id"]
        if not isinstance(ex_id, int) or not 0 <= ex_id < n:
            raise PoolParseError(f"line {line_no}: id {ex_id!r} outside 0..{n - 1}")
        if ex_id in seen:
            raise PoolParseError(f"line {line_no}: duplicate id {ex_id}")
        seen.add(ex_id)
        feats = rec["features"]
        if len(feats) != dim:
            raise PoolParseError(
                f"line {line_no}: feature dimension {len(feats)} != {dim} from line {records[0][0]}"
            )
        label = rec["label"]
        if not isinstance(label, int) or label < 1:
            raise PoolParseError(f"line {line_no}: label {label!r} outside [1, K]")
        features[ex_id] = feats
        labels[ex_id] = label
        display[ex_id] = rec.get("display")

    num_classes = int(labels.max())
    counts = np.bincount(labels, minlength=num_classes + 1)[1:]
    if counts.min() < 1:
        missing = int(np.argmin(counts)) + 1
        raise PoolParseError(f"{path}: class {missing} has no examples (labels must cover 1..K)")
    return Pool(
        features=features,
        true_labels=labels,
        observed_labels=labels.copy(),
        num_classes=num_classes,
        display=display if any(d is not None for d in display) else None,
    )


@dataclass
class LabelEntry:
    example_id: int
    label: int
    round_index: int
    source: str


class LabelStore:
    """Single-writer record of which examples are labeled and with what.

    Labels recorded here are what strategies and the scorer see; for the
    simulated oracle they equal the pool's observed labels, for the
    annotation service they are whatever the human submitted.
    """

    def __init__(self, size: int, num_classes: int) -> None:
        self.size = size
        self.num_classes = num_classes
        self.current_round = 0
        self._labels = np.zeros(size, dtype=np.int64)  # 0 = unlabeled
        self._entries: dict[int, LabelEntry] = {}
        self._order: list[int] = []
        self._class_counts = np.zeros(num_classes + 1, dtype=np.int64)

    def __len__(self) -> int:
        return len(self._order)

    @property
    def labeled_count(self) -> int:
        return len(self._order)

    @property
    def labels(self) -> np.ndarray:
        """Per-example labels, 0 where unlabeled. Do not mutate."""
        return self._labels

    @property
    def entries(self) -> list[LabelEntry]:
        return [self._entries[i] for i in self._order]

    def is_labeled(self, example_id: int) -> bool:
        return self._labels[example_id] != 0

    def label_of(self, example_id: int) -> int:
        return int(self._labels[example_id])

    def labeled_ids(self) -> list[int]:
        """Ids in annotation order."""
        return list(self._order)

    def unlabeled_ids(self) -> np.ndarray:
        """Unlabeled ids in ascending order."""
        return np.flatnonzero(self._labels == 0)

    def class_counts(self) -> np.ndarray:
        """Labeled counts per class 1..K (by recorded label)."""
        return self._class_counts[1:].copy()

    def record(self, example_id: int, label: int, source: str) -> None:
        if not 0 <= example_id < self.size:
            raise ContractViolation(f"example id {example_id} outside pool of size {self.size}")
        if self._labels[example_id] != 0:
            raise ContractViolation(f"example {example_id} is already labeled")
        if not 1 <= label <= self.num_classes:
            raise ConfigError(f"label {label} outside 1..{self.num_classes}")
        self._labels[example_id] = label
        self._entries[example_id] = LabelEntry(example_id, label, self.current_round, source)
        self._order.append(example_id)
        self._class_counts[label] += 1


def query_oracle(
    pool: Pool, ids: "list[int] | np.ndarray", store: LabelStore
) -> list[tuple[int, int]]:
    """Return observed labels for ``ids`` and mark them labeled in ``store``.

    Re-querying a labeled id raises :class:`ContractViolation`; strategies
    must never request a label twice.
    """
    out = []
    for example_id in ids:
        example_id = int(example_id)
        label = int(pool.observed_labels[example_id])
        store.record(example_id, label, source="oracle")
        out.append((example_id, label))
    return out
