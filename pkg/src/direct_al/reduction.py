"""Threshold classifiers over a sorted class view.

A threshold s in 0..N predicts "class k" at sorted positions 1..s and "not
k" after.  The empirical zero-one loss of every threshold is computable in
one prefix-sum pass over the labeled positions, and minimizing that loss is
the same as maximizing the prefix discrepancy between class-k and non-k
labeled counts (the two argmax sets coincide; see lemma_equivalence_check).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scorer import SortedClassView


@dataclass(frozen=True)
class PrefixLossTable:
    """Labeled-only zero-one losses for all N+1 thresholds of one class."""

    class_id: int
    losses: np.ndarray       # (N+1,) int; losses[s] for threshold s
    labeled_mask: np.ndarray  # (N,) bool over sorted positions

    @property
    def size(self) -> int:
        return int(self.labeled_mask.shape[0])

    def minimizers(self) -> np.ndarray:
        return np.flatnonzero(self.losses == self.losses.min())


@dataclass(frozen=True)
class ThresholdEstimate:
    class_id: int
    j_hat: int
    argmax_set: np.ndarray
    discrepancy: int


def empirical_loss_table(view: SortedClassView, labels: np.ndarray) -> PrefixLossTable:
    """Loss of each threshold against currently labeled examples.

    ``labels`` is the per-id label array (0 = unlabeled).  For threshold s,
    a labeled position r <= s costs 1 when its label != k, and a labeled
    position r > s costs 1 when its label == k.  Unlabeled positions
    contribute nothing.
    """
    lab = labels[view.order]
    labeled = lab != 0
    is_k = lab == view.class_id
    non_k = labeled & ~is_k
    prefix_non_k = np.concatenate([[0], np.cumsum(non_k)])
    prefix_k = np.concatenate([[0], np.cumsum(is_k)])
    losses = prefix_non_k + (prefix_k[-1] - prefix_k)
    return PrefixLossTable(class_id=view.class_id, losses=losses, labeled_mask=labeled)


def prefix_discrepancy(view: SortedClassView, labels: np.ndarray) -> np.ndarray:
    """D(j) = labeled class-k count minus labeled non-k count in positions <= j."""
    lab = labels[view.order]
    signs = np.where(lab == view.class_id, 1, np.where(lab != 0, -1, 0))
    return np.concatenate([[0], np.cumsum(signs)])


def estimate_threshold(table: PrefixLossTable) -> ThresholdEstimate:
    """Loss-minimizing threshold; ties resolved toward the center.

    Among minimizers, take the index closest to N/2; exact distance ties go
    to the smaller index (|2j - N| keeps the comparison in integers).
    """
    n = table.size
    ties = table.minimizers()
    center_dist = np.abs(2 * ties - n)
    j_hat = int(ties[np.lexsort((ties, center_dist))[0]])
    discrepancy = int(table.losses[0] - table.losses.min())
    return ThresholdEstimate(
        class_id=table.class_id, j_hat=j_hat, argmax_set=ties, discrepancy=discrepancy
    )


def optimal_threshold_from_flags(is_k: np.ndarray) -> int:
    """Full-information optimum over a complete one-vs-rest label sequence.

    Maximizes the prefix discrepancy; among ties takes the largest index
    when class k is a minority (N_k <= N/2), else the smallest, extending
    the interval on the minority side.
    """
    is_k = np.asarray(is_k, dtype=bool)
    n = is_k.shape[0]
    diffs = np.concatenate([[0], np.cumsum(np.where(is_k, 1, -1))])
    maximizers = np.flatnonzero(diffs == diffs.max())
    n_k = int(is_k.sum())
    if 2 * n_k <= n:
        return int(maximizers.max())
    return int(maximizers.min())


def brute_force_optimal_threshold(
    view: SortedClassView, true_labels: np.ndarray, class_id: int
) -> int:
    """Test oracle: j* from the full true labels (never shown to strategies)."""
    return optimal_threshold_from_flags(true_labels[view.order] == class_id)


def lemma_equivalence_check(labels: np.ndarray, class_id: int) -> bool:
    """True iff argmin-loss set equals argmax-discrepancy set (as sets).

    Both sides are computed from their own definitions on a fully labeled
    sequence: the loss side by summing mistakes on each side of every
    threshold, the discrepancy side by signed prefix sums.
    """
    labels = np.asarray(labels, dtype=np.int64)
    is_k = labels == class_id
    n = labels.shape[0]
    # Loss side, direct definition.
    losses = np.empty(n + 1, dtype=np.int64)
    for s in range(n + 1):
        losses[s] = int((~is_k[:s]).sum() + is_k[s:].sum())
    loss_set = np.flatnonzero(losses == losses.min())
    # Discrepancy side.
    diffs = np.concatenate([[0], np.cumsum(np.where(is_k, 1, -1))])
    disc_set = np.flatnonzero(diffs == diffs.max())
    return bool(np.array_equal(loss_set, disc_set))
