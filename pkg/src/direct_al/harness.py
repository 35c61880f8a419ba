"""Experiment plumbing: config parsing, holdout metrics, the runner, CSV
logs, report aggregation, timing smoke, and the verification checks behind
the `verify` CLI command.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import seeds
from .baselines import extra_cut_lower_bound, extra_cut_probability_mc
from .direct import LabelRequest, RoundConfig, SelectionEngine, direct_round
from .errors import ConfigError, PoolParseError
from .pool import LabelStore, Pool, apply_noise, generate_synthetic, load_pool, query_oracle
from .reduction import empirical_loss_table, estimate_threshold, lemma_equivalence_check
from .scorer import (
    ScorerConfig,
    balanced_accuracy,
    example_weights,
    load_scores,
    loss_and_grad,
    smoothed_targets,
    sorted_class_views,
    train_scorer,
)

LOG_MAGIC = "# direct_al_log_v1"


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: pool source, noise, strategy, budgets, seeds."""

    pool_source: dict
    strategy: str
    rounds: int
    train_batch: int
    parallel_batch: int
    seed: int
    eta: float = 0.0
    holdout_fraction: float = 0.2
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    scores_path: str | None = None
    output: str | None = None

    def round_config(self) -> RoundConfig:
        return RoundConfig(self.rounds, self.train_batch, self.parallel_batch, self.seed)

    def echo(self) -> dict:
        """Canonical config dict embedded in every log (output path excluded)."""
        return {
            "B_parallel": self.parallel_batch,
            "B_train": self.train_batch,
            "T": self.rounds,
            "eta": self.eta,
            "holdout_fraction": self.holdout_fraction,
            "pool": self.pool_source,
            "scorer": {
                "epochs": self.scorer.epochs,
                "label_smoothing": self.scorer.label_smoothing,
                "reweight": self.scorer.reweight,
                "step_size": self.scorer.step_size,
            },
            "scores": self.scores_path,
            "seed": self.seed,
            "strategy": self.strategy,
        }

    def to_config_dict(self) -> dict:
        """Round-trippable config-file form (parse_spec inverse)."""
        cfg = dict(self.echo())
        cfg["output"] = self.output
        return cfg


_GENERATOR_KEYS = {"num_classes", "counts", "dim", "separation", "seed"}
_SCORER_KEYS = {"epochs", "step_size", "label_smoothing", "reweight"}
_TOP_KEYS = {
    "pool", "strategy", "T", "B_train", "B_parallel", "seed",
    "eta", "holdout_fraction", "scorer", "scores", "output",
}


def _require_int(data: dict, key: str, minimum: int) -> int:
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"field '{key}' must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"field '{key}' must be >= {minimum}, got {value}")
    return value


def parse_spec(data: dict) -> ExperimentSpec:
    """Validate a config document (file or request body) into a spec.

    Unknown fields are rejected so typos fail loudly; every error names the
    offending field.
    """
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    for key in ("pool", "strategy", "T", "B_train", "B_parallel", "seed"):
        if key not in data:
            raise ConfigError(f"missing required config field '{key}'")

    pool = data["pool"]
    if not isinstance(pool, dict) or set(pool) not in ({"path"}, {"generator"}):
        raise ConfigError("field 'pool' must be {\"path\": ...} or {\"generator\": {...}}")
    if "generator" in pool:
        gen = pool["generator"]
        if not isinstance(gen, dict) or set(gen) != _GENERATOR_KEYS:
            raise ConfigError(
                f"field 'pool.generator' needs exactly: {', '.join(sorted(_GENERATOR_KEYS))}"
            )

    strategy = data["strategy"]
    rounds = _require_int(data, "T", 1)
    train_batch = _require_int(data, "B_train", 1)
    parallel_batch = _require_int(data, "B_parallel", 1)
    seed = _require_int(data, "seed", 0)
    if parallel_batch > train_batch:
        raise ConfigError("field 'B_parallel' must not exceed 'B_train'")

    eta = data.get("eta", 0.0)
    if not isinstance(eta, (int, float)) or isinstance(eta, bool) or not 0.0 <= eta <= 1.0:
        raise ConfigError(f"field 'eta' must be in [0, 1], got {eta!r}")
    eta = float(eta)

    fraction = data.get("holdout_fraction", 0.2)
    if not isinstance(fraction, (int, float)) or isinstance(fraction, bool) \
            or not 0.0 < fraction <= 0.5:
        raise ConfigError(f"field 'holdout_fraction' must be in (0, 0.5], got {fraction!r}")

    scorer_data = data.get("scorer") or {}
    unknown = set(scorer_data) - _SCORER_KEYS
    if unknown:
        raise ConfigError(f"unknown scorer field(s): {', '.join(sorted(unknown))}")
    smoothing = scorer_data.get("label_smoothing")
    if smoothing is None:
        # Smoothing defaults on exactly when labels are noisy.
        smoothing = 0.1 if eta > 0 else 0.0
    scorer = ScorerConfig(
        epochs=scorer_data.get("epochs", 300),
        step_size=scorer_data.get("step_size", 0.5),
        label_smoothing=float(smoothing),
        reweight=bool(scorer_data.get("reweight", True)),
    )
    scorer.validate()

    return ExperimentSpec(
        pool_source=pool,
        strategy=strategy,
        rounds=rounds,
        train_batch=train_batch,
        parallel_batch=parallel_batch,
        seed=seed,
        eta=eta,
        holdout_fraction=float(fraction),
        scorer=scorer,
        scores_path=data.get("scores"),
        output=data.get("output"),
    )


def load_spec(path: str) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc.msg})") from exc
    return parse_spec(data)


def build_pool(spec: ExperimentSpec) -> Pool:
    if "generator" in spec.pool_source:
        pool = generate_synthetic(**spec.pool_source["generator"])
    else:
        pool = load_pool(spec.pool_source["path"])
    if spec.eta > 0:
        pool = apply_noise(pool, spec.eta, spec.seed)
    return pool


@dataclass
class SplitResult:
    train_pool: Pool
    train_ids: np.ndarray
    eval_features: np.ndarray
    eval_labels: np.ndarray
    eval_ids: np.ndarray


def holdout_split(pool: Pool, fraction: float, seed: int) -> SplitResult:
    """Stratified split; the eval side keeps noise-free true labels.

    Per-class eval counts are round(count * fraction) clamped to leave at
    least one example on each side.
    """
    if not 0.0 < fraction <= 0.5:
        raise ConfigError(f"holdout fraction must be in (0, 0.5], got {fraction}")
    rng = seeds.stream(seed, seeds.SPLIT)
    eval_mask = np.zeros(pool.size, dtype=bool)
    for k in range(1, pool.num_classes + 1):
        ids = np.flatnonzero(pool.true_labels == k)
        if ids.size < 2:
            raise ConfigError(f"class {k} needs >= 2 examples to split, has {ids.size}")
        n_eval = min(max(int(ids.size * fraction + 0.5), 1), ids.size - 1)
        eval_mask[rng.permutation(ids)[:n_eval]] = True
    train_ids = np.flatnonzero(~eval_mask)
    eval_ids = np.flatnonzero(eval_mask)
    display = None
    if pool.display is not None:
        display = [pool.display[i] for i in train_ids]
    train_pool = Pool(
        features=pool.features[train_ids],
        true_labels=pool.true_labels[train_ids],
        observed_labels=pool.observed_labels[train_ids],
        num_classes=pool.num_classes,
        noise_rate=pool.noise_rate,
        seed=pool.seed,
        display=display,
    )
    return SplitResult(
        train_pool=train_pool,
        train_ids=train_ids,
        eval_features=pool.features[eval_ids],
        eval_labels=pool.true_labels[eval_ids],
        eval_ids=eval_ids,
    )


class TrainedScores:
    """Retrains the scorer from scratch on demand, once per labeled count.

    The labeled set only grows, so the count keys the cache; training runs
    on ids in ascending order so results do not depend on submission order.
    """

    def __init__(self, train_features: np.ndarray, eval_features: np.ndarray,
                 num_classes: int, config: ScorerConfig) -> None:
        self.train_features = train_features
        self.eval_features = eval_features
        self.num_classes = num_classes
        self.config = config
        self._cache: tuple[int, np.ndarray, np.ndarray] | None = None

    def probs(self, store: LabelStore) -> tuple[np.ndarray, np.ndarray]:
        if self._cache is not None and self._cache[0] == len(store):
            return self._cache[1], self._cache[2]
        labeled = np.sort(np.asarray(store.labeled_ids(), dtype=np.int64))
        model = train_scorer(
            self.train_features[labeled], store.labels[labeled], self.num_classes, self.config
        )
        p_train = model.predict_proba(self.train_features)
        p_eval = model.predict_proba(self.eval_features)
        self._cache = (len(store), p_train, p_eval)
        return p_train, p_eval


class FixedScores:
    """Externally supplied probabilities; bypasses training entirely."""

    def __init__(self, train_probs: np.ndarray, eval_probs: np.ndarray) -> None:
        self.train_probs = train_probs
        self.eval_probs = eval_probs

    def probs(self, store: LabelStore) -> tuple[np.ndarray, np.ndarray]:
        return self.train_probs, self.eval_probs


def make_score_source(spec: ExperimentSpec, pool: Pool, split: SplitResult):
    if spec.scores_path is not None:
        full = load_scores(spec.scores_path, expected_n=pool.size)
        if full.shape[1] != pool.num_classes:
            raise PoolParseError(
                f"{spec.scores_path}: {full.shape[1]} classes, pool has {pool.num_classes}"
            )
        return FixedScores(full[split.train_ids], full[split.eval_ids])
    return TrainedScores(
        split.train_pool.features, split.eval_features, pool.num_classes, spec.scorer
    )


def minority_class(pool: Pool) -> int:
    """Class with the fewest true examples; ties to the lower id."""
    return int(np.argmin(pool.class_counts)) + 1


def metrics_row(source, store: LabelStore, split: SplitResult, minority: int,
                round_index: int, truncated: bool, prev_total: int) -> dict:
    """One log row from the current labels: holdout balanced accuracy,
    minority fraction by true class, per-class counts and thresholds."""
    num_classes = split.train_pool.num_classes
    p_train, p_eval = source.probs(store)
    predictions = np.argmax(p_eval, axis=1) + 1
    bal_acc = balanced_accuracy(split.eval_labels, predictions, num_classes)
    labeled = np.asarray(store.labeled_ids(), dtype=np.int64)
    total = int(labeled.size)
    minority_frac = float((split.train_pool.true_labels[labeled] == minority).mean()) if total else 0.0
    row = {
        "round": round_index,
        "labels_total": total,
        "labels_round": total - prev_total,
        "truncated": int(truncated),
        "bal_acc": float(bal_acc),
        "minority_frac": minority_frac,
    }
    counts = store.class_counts()
    for k in range(1, num_classes + 1):
        row[f"count_c{k}"] = int(counts[k - 1])
    for k, view in sorted_class_views(p_train).items():
        estimate = estimate_threshold(empirical_loss_table(view, store.labels))
        row[f"jhat_c{k}"] = estimate.j_hat
    return row


@dataclass
class ExperimentLog:
    config: dict
    rows: list[dict]
    num_classes: int

    def validate(self) -> None:
        budget = self.config["B_train"]
        prev_total = 0
        for row in self.rows:
            if row["labels_total"] <= prev_total and row["round"] > 0:
                raise ConfigError(f"round {row['round']}: labels_total did not increase")
            if not row["truncated"] and row["labels_round"] != budget:
                raise ConfigError(
                    f"round {row['round']}: added {row['labels_round']} labels, expected {budget}"
                )
            counted = sum(row[f"count_c{k}"] for k in range(1, self.num_classes + 1))
            if counted != row["labels_total"]:
                raise ConfigError(
                    f"round {row['round']}: class counts sum to {counted}, "
                    f"labels_total is {row['labels_total']}"
                )
            prev_total = row["labels_total"]

    def columns(self) -> list[str]:
        ks = range(1, self.num_classes + 1)
        return (
            ["round", "labels_total", "labels_round", "truncated", "bal_acc", "minority_frac"]
            + [f"count_c{k}" for k in ks]
            + [f"jhat_c{k}" for k in ks]
        )

    def to_csv(self) -> str:
        self.validate()
        lines = [
            LOG_MAGIC,
            "# config: " + json.dumps(self.config, sort_keys=True, separators=(",", ":")),
            ",".join(self.columns()),
        ]
        for row in self.rows:
            cells = []
            for col in self.columns():
                value = row[col]
                cells.append(repr(value) if isinstance(value, float) else str(value))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    @staticmethod
    def read(path: str) -> "ExperimentLog":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.rstrip("\n") for line in fh]
        if not lines or lines[0] != LOG_MAGIC:
            raise PoolParseError(f"{path}: not a recognized log file")
        if len(lines) < 3 or not lines[1].startswith("# config: "):
            raise PoolParseError(f"{path}: missing config line")
        config = json.loads(lines[1][len("# config: "):])
        header = lines[2].split(",")
        num_classes = sum(1 for col in header if col.startswith("count_c"))
        rows = []
        int_cols = {"round", "labels_total", "labels_round", "truncated"}
        for line in lines[3:]:
            if not line:
                continue
            cells = line.split(",")
            row: dict = {}
            for col, cell in zip(header, cells):
                if col in int_cols or col.startswith(("count_c", "jhat_c")):
                    row[col] = int(cell)
                else:
                    row[col] = float(cell)
            rows.append(row)
        return ExperimentLog(config=config, rows=rows, num_classes=num_classes)


def run_experiment(pool: Pool, spec: ExperimentSpec) -> ExperimentLog:
    """Run one seeded experiment and return its full log.

    Round 0 labels a uniform seed batch; every later round runs the chosen
    strategy, then a fresh scorer is trained and metrics recorded.
    """
    split = holdout_split(pool, spec.holdout_fraction, spec.seed)
    source = make_score_source(spec, pool, split)
    minority = minority_class(split.train_pool)
    engine = SelectionEngine(
        split.train_pool,
        spec.round_config(),
        spec.strategy,
        probs_provider=lambda store: source.probs(store)[0],
    )
    rows: list[dict] = []
    prev_total = 0
    for event in engine.events():
        if isinstance(event, LabelRequest):
            query_oracle(split.train_pool, event.ids, engine.store)
        else:
            row = metrics_row(
                source, engine.store, split, minority, event.round_index,
                event.truncated, prev_total,
            )
            rows.append(row)
            prev_total = row["labels_total"]
    log = ExperimentLog(config=spec.echo(), rows=rows, num_classes=pool.num_classes)
    log.validate()
    return log


def aggregate_reports(paths: list[str]) -> list[dict]:
    """Mean and standard error of the metric curves across seed logs.

    All logs must share the same round/labels schedule; stderr is the
    sample standard deviation over logs divided by sqrt(n).
    """
    if not paths:
        raise ConfigError("report needs at least one log file")
    logs = [ExperimentLog.read(p) for p in paths]
    schedule = [(row["round"], row["labels_total"]) for row in logs[0].rows]
    for path, log in zip(paths[1:], logs[1:]):
        if [(r["round"], r["labels_total"]) for r in log.rows] != schedule:
            raise ConfigError(f"{path}: round/label schedule differs from {paths[0]}")
    out = []
    for i, (round_index, labels_total) in enumerate(schedule):
        bal = np.array([log.rows[i]["bal_acc"] for log in logs])
        frac = np.array([log.rows[i]["minority_frac"] for log in logs])
        n = len(logs)
        stderr = (lambda v: float(np.std(v, ddof=1) / np.sqrt(n)) if n > 1 else 0.0)
        out.append({
            "round": round_index,
            "labels": labels_total,
            "mean_bal_acc": float(bal.mean()),
            "stderr_bal_acc": stderr(bal),
            "mean_minority_frac": float(frac.mean()),
            "stderr_minority_frac": stderr(frac),
        })
    return out


REPORT_COLUMNS = ["round", "labels", "mean_bal_acc", "stderr_bal_acc",
                  "mean_minority_frac", "stderr_minority_frac"]


def write_report_csv(rows: list[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for row in rows:
            cells = [repr(row[c]) if isinstance(row[c], float) else str(row[c])
                     for c in REPORT_COLUMNS]
            fh.write(",".join(cells) + "\n")


def selection_seconds(n: int, num_classes: int, train_batch: int, parallel_batch: int,
                      seed: int, repeats: int = 3, dim: int = 6,
                      instances: int = 5) -> float:
    """Mean per-round selection time, scorer excluded.

    The VReduce iteration count varies by instance (intervals can exhaust
    early), so one round is a poor scaling probe; each timed pass runs
    ``instances`` independently seeded rounds and the best pass divided by
    ``instances`` is returned.
    """
    counts = [n // num_classes + (1 if i < n % num_classes else 0) for i in range(num_classes)]
    prepared = []
    for offset in range(instances):
        pool = generate_synthetic(num_classes, counts, dim, 1.0, seed + offset)
        config = RoundConfig(rounds=2, train_batch=train_batch,
                             parallel_batch=parallel_batch, seed=seed + offset)
        rng = seeds.stream(seed + offset, seeds.SEED_BATCH)
        seed_ids = rng.choice(pool.size, size=train_batch, replace=False)
        warm_store = LabelStore(pool.size, num_classes)
        query_oracle(pool, seed_ids, warm_store)
        labeled = np.sort(np.asarray(warm_store.labeled_ids()))
        model = train_scorer(pool.features[labeled], warm_store.labels[labeled],
                             num_classes, ScorerConfig(epochs=50))
        prepared.append((pool, config, seed_ids, model.predict_proba(pool.features)))

    best = float("inf")
    for _ in range(repeats):
        stores = []
        for pool, _, seed_ids, _ in prepared:
            store = LabelStore(pool.size, num_classes)
            query_oracle(pool, seed_ids, store)
            stores.append(store)
        start = time.perf_counter()
        for (pool, config, _, probs), store in zip(prepared, stores):
            direct_round(pool, store, config, round_index=1, probs=probs)
        best = min(best, time.perf_counter() - start)
    return best / instances


def complexity_smoke(n_values: tuple[int, ...] = (5000, 10000, 20000),
                     num_classes: int = 2, train_batch: int = 64,
                     parallel_batch: int = 1, seed: int = 0) -> dict:
    """Timing rows over pool sizes plus the fitted growth exponent."""
    if len(n_values) < 3 or max(n_values) < 4 * min(n_values):
        raise ConfigError("need >= 3 pool sizes spanning at least 4x")
    rows = [
        {"n": n, "k": num_classes,
         "seconds": selection_seconds(n, num_classes, train_batch, parallel_batch, seed)}
        for n in n_values
    ]
    logs_n = np.log([row["n"] for row in rows])
    logs_t = np.log([max(row["seconds"], 1e-9) for row in rows])
    exponent = float(np.polyfit(logs_n, logs_t, 1)[0])
    return {"rows": rows, "exponent": exponent}


def lemma_fuzz(binary_trials: int = 1000, multi_trials: int = 200,
               max_n: int = 50, seed: int = 0) -> int:
    """Number of sequences where the argmin-loss and argmax-discrepancy
    sets disagree (expected: zero)."""
    rng = seeds.stream(seed, seeds.VERIFY_LEMMA)
    failures = 0
    for _ in range(binary_trials):
        n = int(rng.integers(1, max_n + 1))
        labels = rng.integers(1, 3, size=n)
        if not lemma_equivalence_check(labels, 1):
            failures += 1
    for _ in range(multi_trials):
        num_classes = int(rng.integers(3, 6))
        n = int(rng.integers(1, max_n + 1))
        labels = rng.integers(1, num_classes + 1, size=n)
        if not lemma_equivalence_check(labels, int(rng.integers(1, num_classes + 1))):
            failures += 1
    return failures


def gradient_fuzz(instances: int = 50, step: float = 1e-5, tolerance: float = 1e-5,
                  seed: int = 0) -> tuple[int, float]:
    """Central-difference check of the training gradient on random instances.

    Returns (failures, worst relative error); relative error is measured in
    the Euclidean norm over all parameters.
    """
    rng = seeds.stream(seed, seeds.VERIFY_GRAD)
    failures = 0
    worst = 0.0
    for _ in range(instances):
        num_classes = int(rng.integers(2, 5))
        dim = int(rng.integers(1, 6))
        m = int(rng.integers(2, 21))
        features = rng.standard_normal((m, dim))
        labels = rng.integers(1, num_classes + 1, size=m)
        eps = float(rng.choice([0.0, 0.1]))
        reweight = bool(rng.integers(0, 2))
        targets = smoothed_targets(labels, num_classes, eps)
        weights = example_weights(labels, num_classes, reweight)
        theta = 0.5 * rng.standard_normal((dim + 1) * num_classes)

        _, grad = loss_and_grad(theta, features, targets, weights)
        fd = np.empty_like(theta)
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += step
            down[i] -= step
            loss_up, _ = loss_and_grad(up, features, targets, weights)
            loss_down, _ = loss_and_grad(down, features, targets, weights)
            fd[i] = (loss_up - loss_down) / (2 * step)
        rel = float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12))
        worst = max(worst, rel)
        if rel > tolerance:
            failures += 1
    return failures, worst


def theorem_mc_grid(etas: tuple[float, ...] = (0.05, 0.1, 0.2),
                    budgets: tuple[int, ...] = (20, 40), trials: int = 10000,
                    n1: int = 100, n2: int = 100, seed: int = 0) -> list[dict]:
    """Observed extra-cut frequency vs the closed-form lower bound."""
    rows = []
    for eta in etas:
        for budget in budgets:
            bound = extra_cut_lower_bound(eta, budget)
            sigma = float(np.sqrt(bound * (1 - bound) / trials))
            observed = extra_cut_probability_mc(n1, n2, eta, budget, trials, seed)
            rows.append({
                "eta": eta, "b": budget, "trials": trials,
                "bound": bound, "observed": observed, "sigma": sigma,
                "ok": observed >= bound - 3 * sigma,
            })
    return rows
