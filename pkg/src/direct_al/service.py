"""HTTP annotation service.

Each session lives in its own directory (config.json, pool.jsonl,
journal.jsonl).  The selection engine is deterministic given the config and
the label history, so the journal is the only state that needs durability:
a restarted server replays it and lands in exactly the same place.
"""

from __future__ import annotations

import json
import os
import shutil
import threading
import time
import uuid
from dataclasses import replace

from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from .direct import LabelRequest, RoundEnd, SelectionEngine
from .errors import ConfigError, PoolParseError
from .harness import (
    ExperimentLog,
    holdout_split,
    make_score_source,
    metrics_row,
    minority_class,
    parse_spec,
)
from .pool import apply_noise, generate_synthetic, load_pool, save_pool


class ApiError(Exception):
    """Error with an HTTP status and a stable machine-readable code."""

    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class SessionRuntime:
    """One annotation session: the engine, its pending chunks, the journal.

    Labels are journaled in request order (not submission order) before the
    store sees them, which keeps replayed sessions bit-identical to live
    ones.  All public methods except submit/batch/log_csv assume the caller
    holds ``self.lock``.
    """

    def __init__(self, session_id: str, directory: str) -> None:
        self.id = session_id
        self.directory = directory
        self.lock = threading.Lock()
        with open(os.path.join(directory, "config.json"), "r", encoding="utf-8") as fh:
            self.spec = parse_spec(json.load(fh))
        pool = load_pool(os.path.join(directory, "pool.jsonl"))
        if self.spec.eta > 0:
            pool = apply_noise(pool, self.spec.eta, self.spec.seed)

        # Score files are copied into the session directory at creation so a
        # reload never depends on the original path still existing.
        scores_copy = os.path.join(directory, "scores.jsonl")
        source_spec = self.spec
        if self.spec.scores_path is not None and os.path.exists(scores_copy):
            source_spec = replace(self.spec, scores_path=scores_copy)

        self.split = holdout_split(pool, self.spec.holdout_fraction, self.spec.seed)
        self.source = make_score_source(source_spec, pool, self.split)
        self.minority = minority_class(self.split.train_pool)
        self.engine = SelectionEngine(
            self.split.train_pool,
            self.spec.round_config(),
            self.spec.strategy,
            probs_provider=lambda store: self.source.probs(store)[0],
        )
        self._events = self.engine.events()
        self.rows: list[dict] = []
        self.pending: list[list[int]] = []
        self.current_request: LabelRequest | None = None
        self.status = "active"
        self._replay()
        self._advance()

    def _journal_path(self) -> str:
        return os.path.join(self.directory, "journal.jsonl")

    def _advance(self) -> None:
        """Pull engine events until labels are needed or the session ends."""
        while not self.pending and self.status == "active":
            try:
                event = next(self._events)
            except StopIteration:
                self.status = "done"
                self.current_request = None
                return
            if isinstance(event, RoundEnd):
                prev = self.rows[-1]["labels_total"] if self.rows else 0
                self.rows.append(metrics_row(
                    self.source, self.engine.store, self.split, self.minority,
                    event.round_index, event.truncated, prev,
                ))
            else:
                self.current_request = event
                ids = list(event.ids)
                width = self.spec.parallel_batch
                self.pending = [ids[i:i + width] for i in range(0, len(ids), width)]

    def _apply_chunk(self, labels_by_id: dict[int, int]) -> None:
        store = self.engine.store
        for example_id in self.pending[0]:
            store.record(example_id, labels_by_id[example_id], "human")
        self.pending.pop(0)
        if not self.pending:
            self.current_request = None

    def _replay(self) -> None:
        path = self._journal_path()
        if not os.path.exists(path):
            return
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read().splitlines()
        entries: list[dict] = []
        for lineno, line in enumerate(raw, start=1):
            if not line.strip():
                continue
            try:
                entries.append(json.loads(line))
            except json.JSONDecodeError as exc:
                if lineno == len(raw):
                    # Torn tail from a crash mid-write; it was never
                    # acknowledged, so the client will resubmit.
                    break
                raise PoolParseError(f"{path}:{lineno}: unreadable journal line") from exc
        pos = 0
        while pos < len(entries):
            self._advance()
            if not self.pending:
                raise PoolParseError(f"{path}: journal holds more labels than the session accepts")
            chunk = self.pending[0]
            block = entries[pos:pos + len(chunk)]
            if len(block) < len(chunk):
                break  # unacknowledged partial batch
            if [rec.get("id") for rec in block] != chunk:
                raise PoolParseError(f"{path}: journal ids diverge from the engine's requests")
            self._apply_chunk({rec["id"]: rec["label"] for rec in block})
            pos += len(chunk)

    def _journal_chunk(self, chunk: list[int], labels_by_id: dict[int, int],
                       annotator: str) -> None:
        stamp = time.time()
        lines = [
            json.dumps(
                {"annotator": annotator, "id": i, "label": labels_by_id[i], "ts": stamp},
                sort_keys=True,
            )
            for i in chunk
        ]
        with open(self._journal_path(), "a", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def batch(self) -> dict:
        with self.lock:
            if self.status == "done" or not self.pending:
                return {
                    "session_id": self.id, "status": self.status, "batch": [],
                    "round": None, "phase": None, "class_id": None,
                    "num_classes": self.split.train_pool.num_classes,
                }
            request = self.current_request
            pool = self.split.train_pool
            items = []
            for example_id in self.pending[0]:
                item = {
                    "id": example_id,
                    "features": [float(x) for x in pool.features[example_id]],
                }
                if pool.display is not None:
                    item["display"] = pool.display[example_id]
                items.append(item)
            return {
                "session_id": self.id, "status": "active", "batch": items,
                "round": request.round_index, "phase": request.phase,
                "class_id": request.class_id,
                "num_classes": pool.num_classes,
            }

    def submit(self, labels, annotator: str) -> dict:
        with self.lock:
            if self.status == "done" or not self.pending:
                raise ApiError(409, "no_pending_batch", "no batch is awaiting labels")
            chunk = self.pending[0]
            num_classes = self.split.train_pool.num_classes
            if not isinstance(labels, list) or not labels:
                raise ApiError(422, "invalid_labels", "field 'labels' must be a non-empty list")
            seen: dict[int, int] = {}
            for i, item in enumerate(labels):
                if not isinstance(item, dict) or "id" not in item or "label" not in item:
                    raise ApiError(422, "invalid_labels",
                                   f"labels[{i}] must have 'id' and 'label'")
                example_id, label = item["id"], item["label"]
                if isinstance(example_id, bool) or not isinstance(example_id, int):
                    raise ApiError(422, "invalid_labels", f"labels[{i}].id must be an integer")
                if isinstance(label, bool) or not isinstance(label, int) \
                        or not 1 <= label <= num_classes:
                    raise ApiError(422, "label_out_of_range",
                                   f"labels[{i}].label must be in 1..{num_classes}")
                if example_id in seen:
                    raise ApiError(422, "duplicate_id", f"labels[{i}].id {example_id} repeats")
                seen[example_id] = label
            if set(seen) != set(chunk):
                raise ApiError(409, "batch_mismatch",
                               "submitted ids must exactly match the pending batch")
            # Durable before visible: journal first, then apply.
            self._journal_chunk(chunk, seen, annotator)
            self._apply_chunk(seen)
            if not self.pending:
                self._advance()
            return self.state()

    def state(self) -> dict:
        """Caller must hold the lock (submit returns this directly)."""
        store = self.engine.store
        info = self.engine.info
        counts = store.class_counts()
        total = int(counts.sum())
        minority_fraction = float(counts[self.minority - 1] / total) if total else 0.0
        j_hat: dict[str, int] = {}
        if self.rows:
            last = self.rows[-1]
            for k in range(1, self.split.train_pool.num_classes + 1):
                j_hat[str(k)] = last[f"jhat_c{k}"]
        for k, value in info["j_hat"].items():
            j_hat[str(k)] = value
        return {
            "session_id": self.id,
            "status": self.status,
            "strategy": self.spec.strategy,
            "round": info["round"],
            "rounds_total": self.spec.rounds,
            "rounds_completed": len(self.rows),
            "phase": info["phase"],
            "class_id": info["class_id"],
            "num_classes": self.split.train_pool.num_classes,
            "labeled_total": total,
            "target_total": self.spec.rounds * self.spec.train_batch,
            "pending_count": len(self.pending[0]) if self.pending else 0,
            "class_counts": [int(c) for c in counts],
            "minority_class": self.minority,
            "minority_fraction": minority_fraction,
            "j_hat": j_hat,
        }

    def log_csv(self) -> str:
        with self.lock:
            log = ExperimentLog(
                config=self.spec.echo(),
                rows=list(self.rows),
                num_classes=self.split.train_pool.num_classes,
            )
            return log.to_csv()


class SessionManager:
    """Creates, caches, and reloads sessions under one data directory."""

    def __init__(self, root: str) -> None:
        self.root = root
        os.makedirs(root, exist_ok=True)
        self.lock = threading.RLock()
        self.sessions: dict[str, SessionRuntime] = {}
        self._tokens_path = os.path.join(root, "tokens.json")
        self._tokens: dict[str, str] = {}
        if os.path.exists(self._tokens_path):
            with open(self._tokens_path, "r", encoding="utf-8") as fh:
                self._tokens = json.load(fh)

    def _save_tokens(self) -> None:
        tmp = self._tokens_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self._tokens, fh, sort_keys=True)
        os.replace(tmp, self._tokens_path)

    def create(self, payload: dict) -> tuple[SessionRuntime, bool]:
        token = payload.pop("idempotency_token", None)
        if token is not None and not isinstance(token, str):
            raise ApiError(422, "invalid_token", "field 'idempotency_token' must be a string")
        spec = parse_spec(payload)
        with self.lock:
            if token and token in self._tokens:
                return self.get(self._tokens[token]), False
            session_id = uuid.uuid4().hex[:12]
            directory = os.path.join(self.root, session_id)
            os.makedirs(directory)
            # Materialize the pre-noise pool so reloads never depend on the
            # original source; noise is reapplied deterministically on load.
            if "generator" in spec.pool_source:
                base = generate_synthetic(**spec.pool_source["generator"])
            else:
                base = load_pool(spec.pool_source["path"])
            save_pool(base, os.path.join(directory, "pool.jsonl"))
            if spec.scores_path is not None:
                shutil.copyfile(spec.scores_path, os.path.join(directory, "scores.jsonl"))
            with open(os.path.join(directory, "config.json"), "w", encoding="utf-8") as fh:
                json.dump(spec.to_config_dict(), fh, sort_keys=True, indent=2)
            runtime = SessionRuntime(session_id, directory)
            self.sessions[session_id] = runtime
            if token:
                self._tokens[token] = session_id
                self._save_tokens()
            return runtime, True

    def get(self, session_id: str) -> SessionRuntime:
        with self.lock:
            runtime = self.sessions.get(session_id)
            if runtime is None:
                directory = os.path.join(self.root, session_id)
                if not os.path.isfile(os.path.join(directory, "config.json")):
                    raise ApiError(404, "session_not_found", f"no session '{session_id}'")
                runtime = SessionRuntime(session_id, directory)
                self.sessions[session_id] = runtime
            return runtime


def create_app(data_dir: str = "sessions") -> FastAPI:
    manager = SessionManager(data_dir)
    app = FastAPI(title="direct-al annotation service")
    app.state.manager = manager
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse({"code": exc.code, "error": exc.message}, status_code=exc.status)

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        try:
            runtime, created = manager.create(dict(payload))
        except (ConfigError, PoolParseError) as exc:
            raise ApiError(422, "invalid_config", str(exc)) from exc
        except FileNotFoundError as exc:
            raise ApiError(422, "invalid_config", str(exc)) from exc
        with runtime.lock:
            body = {"session_id": runtime.id, "state": runtime.state()}
        return JSONResponse(body, status_code=201 if created else 200)

    @app.get("/sessions/{session_id}/batch")
    def get_batch(session_id: str):
        return manager.get(session_id).batch()

    @app.post("/sessions/{session_id}/labels")
    def post_labels(session_id: str, payload: dict = Body(...)):
        runtime = manager.get(session_id)
        annotator = payload.get("annotator", "anonymous")
        if not isinstance(annotator, str):
            raise ApiError(422, "invalid_labels", "field 'annotator' must be a string")
        return runtime.submit(payload.get("labels"), annotator)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        runtime = manager.get(session_id)
        with runtime.lock:
            return runtime.state()

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str):
        return PlainTextResponse(
            manager.get(session_id).log_csv(), media_type="text/csv; charset=utf-8"
        )

    return app
