import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from direct_al.pool import LabelStore
from direct_al.reduction import (
    brute_force_optimal_threshold,
    empirical_loss_table,
    estimate_threshold,
    lemma_equivalence_check,
    optimal_threshold_from_flags,
    prefix_discrepancy,
)
from helpers import identity_view, pool_from_labels, store_with


def direct_loss(sorted_labels, labeled_positions, s, k=1):
    """O(N) reference evaluation of the threshold loss at s, from scratch."""
    left = sum(1 for p in labeled_positions if p <= s and sorted_labels[p - 1] != k)
    right = sum(1 for p in labeled_positions if p > s and sorted_labels[p - 1] == k)
    return left + right


def test_loss_table_fully_labeled():
    # sorted observed labels (k, k, not-k, k, not-k)
    labels = [1, 1, 2, 1, 2]
    view = identity_view(5)
    store = store_with(5, 2, {p: labels[p - 1] for p in range(1, 6)})
    table = empirical_loss_table(view, store.labels)
    assert table.losses.tolist() == [3, 2, 1, 2, 1, 2]
    assert table.minimizers().tolist() == [2, 4]


def test_loss_table_partial():
    # only positions 1 and 3 labeled, with (k, not-k)
    view = identity_view(5)
    store = store_with(5, 2, {1: 1, 3: 2})
    table = empirical_loss_table(view, store.labels)
    assert table.losses.tolist() == [1, 0, 0, 1, 1, 1]
    assert table.minimizers().tolist() == [1, 2]


def test_loss_table_empty():
    view = identity_view(6)
    store = LabelStore(6, 2)
    table = empirical_loss_table(view, store.labels)
    assert table.losses.tolist() == [0] * 7
    assert table.minimizers().tolist() == list(range(7))


def test_loss_table_boundary_values():
    view = identity_view(8)
    store = store_with(8, 2, {2: 1, 5: 1, 7: 2})
    table = empirical_loss_table(view, store.labels)
    # L(0) counts labeled k examples, L(N) counts labeled not-k
    assert table.losses[0] == 2
    assert table.losses[8] == 1


@given(st.integers(min_value=1, max_value=40), st.randoms(use_true_random=False))
@settings(max_examples=80, deadline=None)
def test_loss_table_matches_double_sum(n, rnd):
    view = identity_view(n)
    store = LabelStore(n, 2)
    labeled = sorted(rnd.sample(range(1, n + 1), rnd.randint(0, n)))
    sorted_labels = [rnd.choice([1, 2]) for _ in range(n)]
    for p in labeled:
        store.record(p - 1, sorted_labels[p - 1], source="oracle")
    table = empirical_loss_table(view, store.labels)
    for s in range(n + 1):
        assert table.losses[s] == direct_loss(sorted_labels, labeled, s)
    # step bound: consecutive entries move by at most 1, and exactly 0
    # across unlabeled positions
    diffs = np.diff(table.losses)
    assert set(diffs.tolist()) <= {-1, 0, 1}
    for p in range(1, n + 1):
        if p not in labeled:
            assert diffs[p - 1] == 0


def test_brute_force_separable():
    view = identity_view(6)
    assert brute_force_optimal_threshold(view, np.array([1, 1, 1, 2, 2, 2]), 1) == 3


def test_brute_force_all_other_class():
    view = identity_view(4)
    assert brute_force_optimal_threshold(view, np.array([2, 2, 2, 2]), 1) == 0


def test_brute_force_tie_minority_takes_largest():
    # diffs (1, 0, 1, 0, -1): maximizers {1, 3}, class 1 is the minority
    view = identity_view(5)
    assert brute_force_optimal_threshold(view, np.array([1, 2, 1, 2, 2]), 1) == 3


def test_brute_force_tie_majority_takes_smallest():
    # diffs (1, 2, 1, 2): maximizers {2, 4}, class 1 is the majority
    view = identity_view(4)
    assert brute_force_optimal_threshold(view, np.array([1, 1, 2, 1]), 1) == 2


def test_optimal_threshold_balanced_tie_counts_as_minority():
    # exactly half class k: 2 * n_k <= n, so the largest maximizer wins
    flags = np.array([True, False, True, False])  # maximizers {1, 3}
    assert optimal_threshold_from_flags(flags) == 3


def test_estimate_center_tie():
    view = identity_view(10)
    store = store_with(10, 2, {2: 1, 8: 2})
    est = estimate_threshold(empirical_loss_table(view, store.labels))
    assert est.argmax_set.tolist() == [2, 3, 4, 5, 6, 7]
    assert est.j_hat == 5
    assert est.discrepancy == 1


def test_estimate_no_labels_returns_center():
    view = identity_view(10)
    est = estimate_threshold(empirical_loss_table(view, LabelStore(10, 2).labels))
    assert est.j_hat == 5
    assert est.discrepancy == 0
    assert est.argmax_set.tolist() == list(range(11))


def test_estimate_equal_distance_tie_takes_smaller():
    # N odd, no labels: 4 and 5 are both closest to N/2 = 4.5
    view = identity_view(9)
    est = estimate_threshold(empirical_loss_table(view, LabelStore(9, 2).labels))
    assert est.j_hat == 4


def test_estimate_full_information_recovers_oracle():
    view = identity_view(5)
    store = store_with(5, 2, {1: 1, 2: 1, 3: 1, 4: 2, 5: 2})
    est = estimate_threshold(empirical_loss_table(view, store.labels))
    assert est.j_hat == 3


def test_full_information_sets_match_oracle_sets():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 30))
        labels = rng.integers(1, 3, size=n)
        view = identity_view(n)
        store = store_with(n, 2, {p: int(labels[p - 1]) for p in range(1, n + 1)})
        est = estimate_threshold(empirical_loss_table(view, store.labels))
        diffs = prefix_discrepancy(view, store.labels)
        oracle_set = np.flatnonzero(diffs == diffs.max())
        assert np.array_equal(est.argmax_set, oracle_set)
        assert brute_force_optimal_threshold(view, labels, 1) in oracle_set


def test_lemma_hand_case():
    assert lemma_equivalence_check(np.array([1, 1, 2, 1, 2, 2]), 1)


def test_lemma_degenerate_all_k():
    assert lemma_equivalence_check(np.array([1, 1, 1, 1]), 1)


def test_lemma_fuzz_binary():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 51))
        labels = rng.integers(1, 3, size=n)
        assert lemma_equivalence_check(labels, 1)
        assert lemma_equivalence_check(labels, 2)


def test_lemma_fuzz_multiclass_one_vs_rest():
    rng = np.random.default_rng(8)
    for _ in range(60):
        n = int(rng.integers(1, 40))
        k_count = int(rng.integers(2, 5))
        labels = rng.integers(1, k_count + 1, size=n)
        for k in range(1, k_count + 1):
            assert lemma_equivalence_check(labels, k)


def test_table_positions_match_view_order():
    """The table follows sorted positions, not raw ids."""
    # two examples, scores force id 1 to position 1
    probs = np.array([[0.2, 0.8], [0.9, 0.1]])
    from direct_al.scorer import sorted_class_view

    view = sorted_class_view(probs, 1)
    assert view.order.tolist() == [1, 0]
    store = LabelStore(2, 2)
    store.record(1, 1, source="oracle")  # position 1 holds class k
    table = empirical_loss_table(view, store.labels)
    assert table.losses.tolist() == [1, 0, 0]
