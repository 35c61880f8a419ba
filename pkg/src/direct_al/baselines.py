"""Comparison selection strategies and the extra-cut Monte-Carlo harness.

All selectors are pure functions of (scores, store) returning example ids;
thin wrappers drive them against the simulated oracle.  The bisection
strategy is a generator so the engine can interleave labeling, and the
Monte-Carlo harness runs that same generator on synthetic sorted sequences.
"""

from __future__ import annotations

import math
from bisect import insort
from dataclasses import dataclass

import numpy as np

from . import seeds
from .errors import ConfigError
from .pool import LabelStore, Pool, query_oracle
from .scorer import SortedClassView, sorted_class_view


def select_random(store: LabelStore, budget: int, rng: np.random.Generator) -> list[int]:
    """Uniform without replacement over unlabeled ids; all of them if budget exceeds."""
    unlabeled = store.unlabeled_ids()
    take = min(budget, unlabeled.size)
    if take == 0:
        return []
    return [int(i) for i in rng.choice(unlabeled, size=take, replace=False)]


def confidence_gaps(probs: np.ndarray) -> np.ndarray:
    """Top-1 minus top-2 probability per row; small means uncertain.

    In the binary case this equals |p_1 - p_2|, so minimizing it selects the
    examples with sigmoid score closest to 0.5.
    """
    part = np.partition(probs, probs.shape[1] - 2, axis=1)
    return part[:, -1] - part[:, -2]


def select_confidence(probs: np.ndarray, store: LabelStore, budget: int) -> list[int]:
    unlabeled = store.unlabeled_ids()
    take = min(budget, unlabeled.size)
    if take == 0:
        return []
    gaps = confidence_gaps(probs[unlabeled])
    picked = unlabeled[np.lexsort((unlabeled, gaps))[:take]]
    return [int(i) for i in picked]


def select_most_likely_positive(
    probs: np.ndarray, store: LabelStore, budget: int
) -> list[int]:
    """Highest predicted probability for the rarest labeled class.

    Rarest = smallest labeled count among classes seen so far; count ties go
    to the lower class id.
    """
    counts = store.class_counts()
    if counts.sum() == 0:
        raise ConfigError("most-likely-positive needs at least one labeled example")
    masked = np.where(counts > 0, counts, np.iinfo(np.int64).max)
    rarest = int(np.argmin(masked)) + 1
    unlabeled = store.unlabeled_ids()
    take = min(budget, unlabeled.size)
    if take == 0:
        return []
    picked = unlabeled[np.lexsort((unlabeled, -probs[unlabeled, rarest - 1]))[:take]]
    return [int(i) for i in picked]


def random_strategy(
    pool: Pool, store: LabelStore, budget: int, rng: np.random.Generator
) -> list[int]:
    ids = select_random(store, budget, rng)
    query_oracle(pool, ids, store)
    return ids


def confidence_strategy(
    probs: np.ndarray, store: LabelStore, pool: Pool, budget: int
) -> list[int]:
    ids = select_confidence(probs, store, budget)
    query_oracle(pool, ids, store)
    return ids


def most_likely_positive_strategy(
    probs: np.ndarray, store: LabelStore, pool: Pool, budget: int
) -> list[int]:
    ids = select_most_likely_positive(probs, store, budget)
    query_oracle(pool, ids, store)
    return ids


class _CutTracker:
    """Sorted labeled positions and cut bookkeeping for one class view."""

    __slots__ = ("size", "positions", "is_k", "cut_cursor")

    def __init__(self, size: int) -> None:
        self.size = size
        self.positions: list[int] = []
        self.is_k: dict[int, bool] = {}
        self.cut_cursor = 0

    def add(self, position: int, is_k: bool) -> None:
        insort(self.positions, position)
        self.is_k[position] = is_k

    def next_position(self) -> int | None:
        """Midpoint of the shortest unlabeled run bracketed by opposite
        labels; else nearest unlabeled to a located cut, cycling over cuts;
        None when no opposite-labeled pair exists at all."""
        pos, lab = self.positions, self.is_k
        best_gap = 0
        best_mid = 0
        cuts: list[int] = []
        for left, right in zip(pos, pos[1:]):
            if lab[left] == lab[right]:
                continue
            gap = right - left - 1
            if gap == 0:
                cuts.append(left)
            elif best_gap == 0 or gap < best_gap:
                best_gap, best_mid = gap, (left + right) // 2
        if best_gap:
            return best_mid
        for _ in range(len(cuts)):
            left = cuts[self.cut_cursor % len(cuts)]
            self.cut_cursor += 1
            found = self._nearest_unlabeled(left)
            if found is not None:
                return found
        return None

    def _nearest_unlabeled(self, cut_left: int) -> int | None:
        # Cut sits between cut_left and cut_left+1; scan outward, left first.
        lab = self.is_k
        for d in range(1, self.size):
            p = cut_left - d
            if p >= 1 and p not in lab:
                return p
            p = cut_left + 1 + d
            if p <= self.size and p not in lab:
                return p
        return None


def galaxy_requests(
    views: dict[int, SortedClassView],
    store: LabelStore,
    budget: int,
    gaps: np.ndarray,
    focus: list[int] | None = None,
):
    """Generator of (class_id, [example_id]) single-label turns.

    Classes take turns round-robin.  A turn bisects the shortest opposite-
    bracketed unlabeled run in that class's view; with every cut localized
    it labels the nearest unlabeled position to the cuts in rotation; with
    no opposite-labeled pair it falls back to smallest-gap confidence
    selection.  Labeling is strictly sequential (one id per turn).
    """
    class_ids = sorted(views) if focus is None else list(focus)
    trackers = {k: _CutTracker(views[k].size) for k in views}
    cursor = 0
    fallback_order: np.ndarray | None = None
    fallback_ptr = 0
    turn = 0
    for _ in range(budget):
        labeled = store.labeled_ids()
        for example_id in labeled[cursor:]:
            label = store.label_of(example_id)
            for k, view in views.items():
                trackers[k].add(int(view.pos_of[example_id]), label == k)
        cursor = len(labeled)
        if store.labeled_count >= store.size:
            break
        k = class_ids[turn % len(class_ids)]
        turn += 1
        position = trackers[k].next_position()
        if position is not None:
            example_id = int(views[k].order[position - 1])
        else:
            if fallback_order is None:
                fallback_order = np.lexsort((np.arange(store.size), gaps))
            while store.labels[fallback_order[fallback_ptr]] != 0:
                fallback_ptr += 1
            example_id = int(fallback_order[fallback_ptr])
        yield k, [example_id]


def galaxy_bisection_strategy(
    views: dict[int, SortedClassView],
    store: LabelStore,
    pool: Pool,
    budget: int,
    probs: np.ndarray,
    focus: list[int] | None = None,
) -> list[int]:
    """Drive the bisection generator against the simulated oracle."""
    out: list[int] = []
    for _, ids in galaxy_requests(views, store, budget, confidence_gaps(probs), focus):
        query_oracle(pool, ids, store)
        out.extend(ids)
    return out


@dataclass(frozen=True)
class CutRecord:
    """Detected cuts (left_pos, right_pos, left_is_k) between adjacent
    labeled positions with opposite one-vs-rest labels, and the count
    beyond the one bracketing the optimal threshold."""

    cuts: tuple[tuple[int, int, bool], ...]
    extra_cut_count: int


def detect_cuts(view: SortedClassView, labels: np.ndarray) -> list[tuple[int, int, bool]]:
    lab = labels[view.order]
    positions = np.flatnonzero(lab != 0) + 1
    is_k = lab[positions - 1] == view.class_id
    out = []
    for i in range(positions.size - 1):
        if is_k[i] != is_k[i + 1]:
            out.append((int(positions[i]), int(positions[i + 1]), bool(is_k[i])))
    return out


def cut_record(view: SortedClassView, labels: np.ndarray, j_star: int) -> CutRecord:
    """M_b counts detected cuts minus the (at most one) properly oriented
    cut whose span contains the optimal threshold."""
    cuts = detect_cuts(view, labels)
    bracketing = any(
        left_is_k and left <= j_star <= right - 1 for left, right, left_is_k in cuts
    )
    return CutRecord(cuts=tuple(cuts), extra_cut_count=len(cuts) - int(bracketing))


def extra_cut_probability_mc(
    n1: int, n2: int, eta: float, budget: int, trials: int, seed: int
) -> float:
    """Observed frequency of at least one extra cut under label noise.

    Ground truth is n1 class-k positions followed by n2 others; each
    observed label flips independently with probability eta.  The first two
    labels go to the endpoints (charged to the budget) and the bisection
    strategy spends the rest; a trial counts when M_b >= 1.
    """
    n = n1 + n2
    if n1 < 1 or n2 < 1:
        raise ConfigError(f"need n1, n2 >= 1, got ({n1}, {n2})")
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"noise rate must be in [0, 1], got {eta}")
    if budget <= 2 * math.log2(n):
        raise ConfigError(f"budget {budget} must exceed 2*log2({n}) = {2 * math.log2(n):.2f}")
    if budget > n:
        raise ConfigError(f"budget {budget} exceeds sequence length {n}")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")

    # Identity view: a monotone score ramp sorts ids in position order.
    ramp = (np.arange(1, n + 1) - 0.5) / n
    probs = np.column_stack([1.0 - ramp, ramp])
    view = sorted_class_view(probs, 1)
    gaps = confidence_gaps(probs)
    true_is_k = np.arange(1, n + 1) <= n1
    first, last = int(view.order[0]), int(view.order[-1])

    rng = seeds.stream(seed, seeds.MC_TRIAL)
    hits = 0
    for _ in range(trials):
        flips = rng.random(n) < eta
        observed = np.where(true_is_k ^ flips, 1, 2)
        store = LabelStore(n, 2)
        store.record(first, int(observed[first]), "oracle")
        store.record(last, int(observed[last]), "oracle")
        for _, ids in galaxy_requests({1: view}, store, budget - 2, gaps, focus=[1]):
            for example_id in ids:
                store.record(example_id, int(observed[example_id]), "oracle")
        if cut_record(view, store.labels, n1).extra_cut_count >= 1:
            hits += 1
    return hits / trials


def extra_cut_lower_bound(eta: float, budget: int) -> float:
    """1 - (1-eta)^(b/2): chance of a corrupted label in the first b/2 draws."""
    return 1.0 - (1.0 - eta) ** (budget / 2.0)
