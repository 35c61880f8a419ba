"""The two-phase round loop and the selection engine.

Each round retrains the scorer, spends half the budget locating per-class
separation thresholds by version-space reduction (phase 1), then spends the
rest annotating around the estimated thresholds (phase 2).

Selection is exposed as a generator of LabelRequest events with RoundEnd
markers between rounds.  The driver (simulated oracle, or the annotation
service backed by humans) records labels into the shared LabelStore between
events, so both run exactly the same selection code: every random choice is
keyed by (seed, purpose, round, class) and otherwise depends only on the
label history.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import seeds
from .baselines import (
    confidence_gaps,
    galaxy_requests,
    select_confidence,
    select_most_likely_positive,
    select_random,
)
from .errors import ConfigError
from .pool import LabelStore, Pool, query_oracle
from .reduction import empirical_loss_table, estimate_threshold
from .scorer import ScorerConfig, SortedClassView, sorted_class_views, train_scorer
from .vreduce import VersionSpace, vreduce_requests

STRATEGIES = ("direct", "random", "confidence", "most_likely_positive", "galaxy_bisection")


@dataclass(frozen=True)
class RoundConfig:
    rounds: int          # T, total rounds including the uniform seed round
    train_batch: int     # B_train, labels per round before retraining
    parallel_batch: int  # B_parallel, labels requested at once
    seed: int

    def validate(self, num_classes: int) -> None:
        if self.rounds < 1:
            raise ConfigError(f"T must be >= 1, got {self.rounds}")
        if self.parallel_batch < 1:
            raise ConfigError(f"B_parallel must be >= 1, got {self.parallel_batch}")
        if self.parallel_batch > self.train_batch:
            raise ConfigError(
                f"B_parallel ({self.parallel_batch}) must not exceed B_train ({self.train_batch})"
            )
        if self.train_batch < 2 * num_classes:
            raise ConfigError(
                f"B_train ({self.train_batch}) must be >= 2K ({2 * num_classes}) "
                "so each class gets a phase-1 label"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class LabelRequest:
    """Ids the driver must label (in any order) before resuming the engine."""

    ids: tuple[int, ...]
    round_index: int
    phase: str               # "seed" | "phase1" | "phase2" | "batch"
    class_id: int | None = None


@dataclass(frozen=True)
class RoundEnd:
    round_index: int
    truncated: bool


def threshold_batch_ids(
    view: SortedClassView, labels: np.ndarray, j_hat: int, budget: int
) -> list[int]:
    """Unlabeled ids nearest the boundary between positions j_hat and j_hat+1.

    Ordered by distance, left side first on ties, skipping labeled
    positions; when one side runs out the other continues alone.
    """
    n = view.size
    out: list[int] = []
    for d in range(n):
        if len(out) >= budget:
            break
        for p in (j_hat - d, j_hat + 1 + d):
            if not 1 <= p <= n:
                continue
            example_id = int(view.order[p - 1])
            if labels[example_id] == 0:
                out.append(example_id)
                if len(out) >= budget:
                    break
    return out


def annotate_near_threshold(
    view: SortedClassView, j_hat: int, budget: int, pool: Pool, store: LabelStore
) -> list[int]:
    """Label around the estimated threshold via the simulated oracle."""
    ids = threshold_batch_ids(view, store.labels, j_hat, budget)
    query_oracle(pool, ids, store)
    return ids


def direct_round_requests(
    pool: Pool,
    store: LabelStore,
    config: RoundConfig,
    round_index: int,
    probs: np.ndarray,
    info: dict | None = None,
):
    """One two-phase round as a request generator.

    Returns {"j_hat": {class: estimate}, "version_spaces": [...]} once the
    round's budget is spent; ``info`` (if given) sees the same keys updated
    live for state displays.
    """
    k_count = pool.num_classes
    info = info if info is not None else {}
    info["j_hat"] = {}
    start_count = len(store)
    views = sorted_class_views(probs)
    spaces: list[VersionSpace] = []

    b_phase1 = config.train_batch // (2 * k_count)
    perm1 = seeds.stream(config.seed, seeds.PHASE1_PERM, round_index).permutation(k_count) + 1
    for k in (int(k) for k in perm1):
        rng = seeds.stream(config.seed, seeds.VREDUCE, round_index, k)
        gen = vreduce_requests(views[k], store, b_phase1, config.parallel_batch, rng)
        try:
            while True:
                ids = next(gen)
                yield LabelRequest(tuple(ids), round_index, "phase1", k)
        except StopIteration as stop:
            spaces.append(stop.value)

    # Phase 1 may return unspent budget (exhausted intervals); phase 2
    # receives whatever remains of the round budget.
    b_remaining = config.train_batch - (len(store) - start_count)
    perm2 = seeds.stream(config.seed, seeds.PHASE2_PERM, round_index).permutation(k_count) + 1
    base, extra = divmod(b_remaining, k_count)
    for idx, k in enumerate(int(k) for k in perm2):
        quota = base + (1 if idx < extra else 0)
        if quota <= 0:
            continue
        table = empirical_loss_table(views[k], store.labels)
        estimate = estimate_threshold(table)
        info["j_hat"][k] = estimate.j_hat
        ids = threshold_batch_ids(views[k], store.labels, estimate.j_hat, quota)
        if ids:
            yield LabelRequest(tuple(ids), round_index, "phase2", k)
    return {"j_hat": dict(info["j_hat"]), "version_spaces": spaces}


def direct_round(
    pool: Pool,
    store: LabelStore,
    config: RoundConfig,
    round_index: int,
    probs: np.ndarray | None = None,
    scorer_config: ScorerConfig | None = None,
) -> dict:
    """Run one round against the simulated oracle.

    Trains the scorer on the current labels when ``probs`` is not supplied.
    Returns the phase-2 threshold estimates, the per-class version spaces,
    and the number of labels added.
    """
    if probs is None:
        labeled = np.asarray(store.labeled_ids())
        model = train_scorer(
            pool.features[labeled], store.labels[labeled], pool.num_classes, scorer_config
        )
        probs = model.predict_proba(pool.features)
    before = len(store)
    gen = direct_round_requests(pool, store, config, round_index, probs)
    try:
        while True:
            request = next(gen)
            query_oracle(pool, request.ids, store)
    except StopIteration as stop:
        summary = stop.value
    summary["added"] = len(store) - before
    return summary


class SelectionEngine:
    """Drives any strategy over T rounds, yielding label requests.

    ``probs_provider(store)`` must return the current N x K probability
    matrix for the pool; drivers supply a caching provider so each round
    trains once.  The engine owns the LabelStore; drivers record labels into
    it between events.
    """

    def __init__(
        self,
        pool: Pool,
        config: RoundConfig,
        strategy: str,
        probs_provider: Callable[[LabelStore], np.ndarray],
    ) -> None:
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
        config.validate(pool.num_classes)
        self.pool = pool
        self.config = config
        self.strategy = strategy
        self.probs_provider = probs_provider
        self.store = LabelStore(pool.size, pool.num_classes)
        self.version_spaces: list[VersionSpace] = []
        self.info: dict = {"round": 0, "phase": "seed", "class_id": None, "j_hat": {}}

    def events(self) -> Iterator[LabelRequest | RoundEnd]:
        config, pool, store = self.config, self.pool, self.store

        store.current_round = 0
        rng = seeds.stream(config.seed, seeds.SEED_BATCH)
        unlabeled = store.unlabeled_ids()
        take = min(config.train_batch, unlabeled.size)
        ids = [int(i) for i in rng.choice(unlabeled, size=take, replace=False)]
        self.info.update(round=0, phase="seed", class_id=None)
        yield LabelRequest(tuple(ids), 0, "seed")
        truncated = take < config.train_batch
        yield RoundEnd(0, truncated)
        if truncated:
            return

        for t in range(1, config.rounds):
            store.current_round = t
            self.info.update(round=t, phase="train", class_id=None)
            probs = self.probs_provider(store)
            before = len(store)
            if self.strategy == "direct":
                gen = direct_round_requests(pool, store, config, t, probs, self.info)
                try:
                    while True:
                        request = next(gen)
                        self.info.update(phase=request.phase, class_id=request.class_id)
                        yield request
                except StopIteration as stop:
                    self.version_spaces.extend(stop.value["version_spaces"])
            elif self.strategy == "galaxy_bisection":
                views = sorted_class_views(probs)
                gaps = confidence_gaps(probs)
                for k, ids in galaxy_requests(views, store, config.train_batch, gaps):
                    self.info.update(phase="batch", class_id=k)
                    yield LabelRequest(tuple(ids), t, "batch", k)
            else:
                if self.strategy == "random":
                    batch_rng = seeds.stream(config.seed, seeds.RANDOM_STRATEGY, t)
                    ids = select_random(store, config.train_batch, batch_rng)
                elif self.strategy == "confidence":
                    ids = select_confidence(probs, store, config.train_batch)
                else:
                    ids = select_most_likely_positive(probs, store, config.train_batch)
                self.info.update(phase="batch", class_id=None)
                if ids:
                    yield LabelRequest(tuple(ids), t, "batch")
            truncated = len(store) - before < config.train_batch
            yield RoundEnd(t, truncated)
            if truncated:
                return
