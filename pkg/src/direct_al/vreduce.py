"""Version-space reduction for one class's threshold.

Maintains an interval [I, J] of plausible thresholds, repeatedly labels a
parallel batch sampled uniformly inside it, and shrinks it geometrically so
that the budget lands on an interval of length 1.

The core is a generator yielding batches of example ids to label; the
caller records labels (simulated oracle or human) between iterations.  This
keeps one implementation of the selection logic for both the experiment
runner and the annotation service.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .pool import LabelStore, Pool, query_oracle
from .reduction import PrefixLossTable, empirical_loss_table
from .scorer import SortedClassView


@dataclass
class VersionSpace:
    """Final interval plus per-iteration audit trail."""

    class_id: int
    lower: int
    upper: int
    iterations: int
    shrink: float
    history: list[dict] = field(default_factory=list)

    @property
    def length(self) -> int:
        return self.upper - self.lower

    def contains(self, j: int) -> bool:
        return self.lower <= j <= self.upper


def init_version_space(table: PrefixLossTable) -> tuple[int, int]:
    """Hull of the loss-minimizer set: the smallest interval containing
    every currently plausible optimal threshold."""
    ties = table.minimizers()
    return int(ties.min()), int(ties.max())


def _best_window(table: PrefixLossTable, length: int) -> tuple[int, int]:
    """Interval of given length minimizing max{L(i), L(i+length)}.

    The search ranges over every placement, so the interval can relocate
    wherever the evidence now points rather than only nesting inside its
    predecessor.  Ties prefer the window whose center is nearest the center
    of the current minimizer hull (the plausible-threshold region), then the
    smaller left endpoint.  |2i + length - (hull_lo + hull_hi)| compares
    center distances without leaving integer arithmetic.
    """
    losses = table.losses
    starts = np.arange(0, losses.size - length)
    vals = np.maximum(losses[starts], losses[starts + length])
    hull = table.minimizers()
    center_dist = np.abs(2 * starts + length - int(hull.min() + hull.max()))
    best = starts[np.lexsort((starts, center_dist, vals))[0]]
    return int(best), int(best) + length


def vreduce_requests(view: SortedClassView, store: LabelStore, budget: int,
                     b_parallel: int, rng: np.random.Generator):
    """Generator yielding id batches; returns the final VersionSpace.

    The driver must label every yielded id in ``store`` before resuming.
    m = max(1, budget // b_parallel) scheduled iterations take b_parallel
    labels each, any remainder joining the m-th batch; the shrink factor is
    (J0 - I0)^(1/m).  Sampling is uniform without replacement over the
    unlabeled sorted positions in I+1..J.  When an interval holds fewer
    unlabeled positions than the batch wants, the leftover budget funds
    extra length-1 refinement iterations rather than being dropped; the run
    stops once the interval has no unlabeled position left, and only then
    does unspent budget stay with the caller.
    """
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    if b_parallel < 1:
        raise ConfigError(f"parallel width must be >= 1, got {b_parallel}")

    table = empirical_loss_table(view, store.labels)
    lower, upper = init_version_space(table)
    m = max(1, budget // b_parallel)
    shrink = float((upper - lower) ** (1.0 / m)) if upper > lower else 1.0
    vs = VersionSpace(class_id=view.class_id, lower=lower, upper=upper,
                      iterations=m, shrink=shrink)
    vs.history.append({"interval": (lower, upper), "queried": []})

    remaining = budget
    t = 0
    while remaining > 0:
        t += 1
        positions = np.arange(lower + 1, upper + 1)
        positions = positions[store.labels[view.order[positions - 1]] == 0]
        if positions.size == 0:
            break
        if t < m:
            batch_size = b_parallel
        elif t == m:
            batch_size = remaining
        else:
            batch_size = min(b_parallel, remaining)
        take = min(batch_size, positions.size)
        chosen = rng.choice(positions, size=take, replace=False)
        ids = [int(view.order[p - 1]) for p in chosen]
        yield ids
        remaining -= take

        table = empirical_loss_table(view, store.labels)
        # Round (J-I)/c half-up; length pins at 1 from the m-th step on.
        target = 1 if t >= m else max(1, int((upper - lower) / shrink + 0.5))
        target = min(target, upper - lower)
        lower, upper = _best_window(table, target)
        vs.lower, vs.upper = lower, upper
        vs.history.append({"interval": (lower, upper), "queried": ids})
    return vs


def vreduce_run(pool: Pool, store: LabelStore, budget: int, class_id: int,
                b_parallel: int, view: SortedClassView,
                rng: np.random.Generator) -> VersionSpace:
    """Run a full reduction against the simulated oracle; store is updated
    in place and the final version space returned."""
    gen = vreduce_requests(view, store, budget, b_parallel, rng)
    try:
        while True:
            ids = next(gen)
            query_oracle(pool, ids, store)
    except StopIteration as stop:
        return stop.value
