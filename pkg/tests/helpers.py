"""Small builders shared across test modules."""

import numpy as np

from direct_al.pool import LabelStore, Pool
from direct_al.scorer import sorted_class_view


def identity_view(n, class_id=1):
    """Binary view whose sorted order is the identity permutation 0..n-1.

    Class-1 probability decreases with the id, so the class-1 separation
    score increases and 1-based sorted position r holds example id r-1.
    """
    p1 = np.linspace(0.9, 0.1, n)
    probs = np.column_stack([p1, 1.0 - p1])
    return sorted_class_view(probs, class_id)


def pool_from_labels(labels, num_classes=None, dim=1):
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) if num_classes is None else num_classes
    return Pool(
        features=np.zeros((labels.size, dim)),
        true_labels=labels,
        observed_labels=labels.copy(),
        num_classes=k,
    )


def store_with(n, num_classes, position_labels):
    """LabelStore over an identity view: {1-based position: label} pairs."""
    store = LabelStore(n, num_classes)
    for pos, label in position_labels.items():
        store.record(pos - 1, label, source="oracle")
    return store
