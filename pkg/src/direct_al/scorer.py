"""Linear softmax scorer trained by full-batch gradient descent.

Training is deterministic: zero-initialized parameters, fixed step size,
fixed epoch count, no stochasticity.  Retraining from scratch on the same
labeled set therefore reproduces the same model, which the engine relies on
when it resumes from a journal.

Class imbalance in the labeled set is countered with inverse-frequency
example weights (normalized to mean one) and, under label noise, smoothed
targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ScorerConfig:
    epochs: int = 300
    step_size: float = 0.5
    label_smoothing: float = 0.0
    reweight: bool = True

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.step_size <= 0:
            raise ConfigError(f"step size must be > 0, got {self.step_size}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError(f"label smoothing must be in [0, 1), got {self.label_smoothing}")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted for stability."""
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def smoothed_targets(labels: np.ndarray, num_classes: int, eps: float) -> np.ndarray:
    """One-hot targets with mass eps spread over the other K-1 classes."""
    m = labels.shape[0]
    if num_classes < 2:
        raise ConfigError("label smoothing needs at least 2 classes")
    targets = np.full((m, num_classes), eps / (num_classes - 1))
    targets[np.arange(m), labels - 1] = 1.0 - eps
    return targets


def example_weights(labels: np.ndarray, num_classes: int, reweight: bool) -> np.ndarray:
    """Inverse-frequency weights with mean one; all-ones when disabled.

    Each present class contributes equal total weight, so the gradient is
    not dominated by whichever class the strategy happened to label most.
    """
    m = labels.shape[0]
    if not reweight:
        return np.ones(m)
    counts = np.bincount(labels, minlength=num_classes + 1)
    w = 1.0 / counts[labels]
    return w * (m / w.sum())


def unpack_params(theta: np.ndarray, dim: int, num_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """theta (flat, length (dim+1)*K) -> weight matrix (dim, K) and bias (K,)."""
    weight = theta[: dim * num_classes].reshape(dim, num_classes)
    bias = theta[dim * num_classes :]
    return weight, bias


def loss_and_grad(
    theta: np.ndarray,
    features: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Weighted mean cross-entropy against (possibly smoothed) targets.

    Parameters are flat so finite-difference checks can perturb one entry at
    a time.  Gradient wrt logits is weights * (probs - targets) / M, pushed
    back through the linear map.
    """
    m, dim = features.shape
    num_classes = targets.shape[1]
    weight, bias = unpack_params(theta, dim, num_classes)
    logits = features @ weight + bias
    log_probs = logits - logits.max(axis=1, keepdims=True)
    log_probs = log_probs - np.log(np.exp(log_probs).sum(axis=1, keepdims=True))
    loss = float(-(weights[:, None] * targets * log_probs).sum() / m)

    dz = weights[:, None] * (np.exp(log_probs) - targets) / m
    grad_weight = features.T @ dz
    grad_bias = dz.sum(axis=0)
    return loss, np.concatenate([grad_weight.ravel(), grad_bias])


@dataclass
class LinearScorer:
    """Trained softmax model over classes 1..K."""

    weight: np.ndarray  # (D, K)
    bias: np.ndarray    # (K,)
    num_classes: int

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.weight.shape[0]:
            raise ConfigError(
                f"features must be (n, {self.weight.shape[0]}), got {features.shape}"
            )
        return softmax(features @ self.weight + self.bias)

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Argmax class ids in 1..K; ties go to the lower class id."""
        return np.argmax(self.predict_proba(features), axis=1) + 1


def train_scorer(
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    config: ScorerConfig | None = None,
) -> LinearScorer:
    """Fit from zero init on the given labeled examples."""
    config = config or ScorerConfig()
    config.validate()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ConfigError("training needs a non-empty 2-D feature matrix")
    if labels.shape != (features.shape[0],):
        raise ConfigError("labels must align with features")
    if labels.min() < 1 or labels.max() > num_classes:
        raise ConfigError(f"labels must lie in 1..{num_classes}")

    dim = features.shape[1]
    targets = smoothed_targets(labels, num_classes, config.label_smoothing)
    weights = example_weights(labels, num_classes, config.reweight)
    theta = np.zeros((dim + 1) * num_classes)
    for _ in range(config.epochs):
        _, grad = loss_and_grad(theta, features, targets, weights)
        theta -= config.step_size * grad
    weight, bias = unpack_params(theta, dim, num_classes)
    return LinearScorer(weight=weight.copy(), bias=bias.copy(), num_classes=num_classes)


def balanced_accuracy(true_labels: np.ndarray, predicted: np.ndarray, num_classes: int) -> float:
    """Mean per-class recall; every class must appear in ``true_labels``."""
    recalls = []
    for k in range(1, num_classes + 1):
        mask = true_labels == k
        if not mask.any():
            raise ConfigError(f"class {k} has no examples in the evaluation set")
        recalls.append(float((predicted[mask] == k).mean()))
    return float(np.mean(recalls))


def class_separation_scores(probs: np.ndarray, class_id: int) -> np.ndarray:
    """Per-example score s_i = max over other classes of p' minus p_k.

    Negative exactly when class k is the argmax for that row, so ascending
    order runs from "confidently class k" to "confidently not k".  In the
    binary case s_i for class 1 equals 2*p_2 - 1, monotone in the class-2
    probability.
    """
    masked = probs.copy()
    masked[:, class_id - 1] = -np.inf
    return masked.max(axis=1) - probs[:, class_id - 1]


@dataclass(frozen=True)
class SortedClassView:
    """Ascending separation-score order for one class.

    ``order[r-1]`` is the example id at 1-based sorted position r;
    ``pos_of[i]`` is the 1-based position of example i; ``scores`` holds the
    sorted score values.
    """

    class_id: int
    order: np.ndarray
    scores: np.ndarray
    pos_of: np.ndarray

    @property
    def size(self) -> int:
        return int(self.order.shape[0])


def _build_view(class_id: int, p_k: np.ndarray, s: np.ndarray,
                rows: np.ndarray) -> SortedClassView:
    order = np.argsort(s, kind="stable")
    scores = s[order]
    if np.any(scores[1:] == scores[:-1]):
        # tie-break keys only matter when scores collide exactly
        order = np.lexsort((rows, -p_k, s))
        scores = s[order]
    pos_of = np.empty(rows.size, dtype=np.int64)
    pos_of[order] = np.arange(1, rows.size + 1)
    return SortedClassView(class_id=class_id, order=order, scores=scores, pos_of=pos_of)


def sorted_class_view(probs: np.ndarray, class_id: int) -> SortedClassView:
    """Sort ascending by separation score; ties by higher class-k
    probability, then lower example id."""
    s = class_separation_scores(probs, class_id)
    return _build_view(class_id, probs[:, class_id - 1], s, np.arange(probs.shape[0]))


def sorted_class_views(probs: np.ndarray) -> dict[int, SortedClassView]:
    """All K views at once, sharing the top-2 row statistics.

    The max over other classes equals the row's top value, or its second-top
    when class k itself attains the top, so one partition serves every class
    and the scores match class_separation_scores bit for bit.
    """
    n, k_count = probs.shape
    part = np.partition(probs, k_count - 2, axis=1)
    top1, top2 = part[:, -1], part[:, -2]
    rows = np.arange(n)
    views = {}
    for k in range(1, k_count + 1):
        p_k = probs[:, k - 1]
        s = np.where(p_k == top1, top2, top1) - p_k
        views[k] = _build_view(k, p_k, s, rows)
    return views


def load_scores(path: str, expected_n: int | None = None) -> np.ndarray:
    """Read an externally produced probability matrix.

    Line-delimited records {id, probs}; ids must be exactly 0..N-1 and each
    row must sum to 1 within 1e-6 (rows inside that tolerance are
    renormalized, anything further off is rejected).
    """
    import json

    from .errors import PoolParseError

    rows: dict[int, list[float]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoolParseError(f"line {line_no}: invalid record ({exc.msg})") from exc
            if "id" not in rec or "probs" not in rec:
                raise PoolParseError(f"line {line_no}: needs fields 'id' and 'probs'")
            if rec["id"] in rows:
                raise PoolParseError(f"line {line_no}: duplicate id {rec['id']}")
            rows[rec["id"]] = rec["probs"]
    n = len(rows)
    if n == 0:
        raise PoolParseError(f"{path}: score file is empty")
    if expected_n is not None and n != expected_n:
        raise PoolParseError(f"{path}: expected {expected_n} rows, found {n}")
    if set(rows) != set(range(n)):
        raise PoolParseError(f"{path}: ids must be exactly 0..{n - 1}")
    k = len(rows[0])
    probs = np.empty((n, k))
    for i in range(n):
        if len(rows[i]) != k:
            raise PoolParseError(f"{path}: id {i} has {len(rows[i])} probs, expected {k}")
        probs[i] = rows[i]
    sums = probs.sum(axis=1)
    bad = np.abs(sums - 1.0) > 1e-6
    if bad.any():
        raise PoolParseError(f"{path}: id {int(np.flatnonzero(bad)[0])} probs sum to {sums[bad][0]!r}")
    if (probs < 0).any():
        raise PoolParseError(f"{path}: negative probability entries")
    return probs / sums[:, None]
