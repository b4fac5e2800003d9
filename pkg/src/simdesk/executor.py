"""Run lifecycle and isolation.

Each run gets a fresh directory; registry components are checked out into
it and launched as subprocesses with a scrubbed environment, speaking the
newline-delimited wire protocol on stdin/stdout. The engine supplies all
randomness through the protocol's `rand` field, so determinism survives
arbitrary user code. Containers are deliberately out of scope: the per-run
directory plus subprocess isolation carries the same contract at desk
scale.

Wire protocol v1 (one canonical-form object per line, UTF-8):
  engine -> {op:"init", category, params, topic}          child -> {ok:true}
  engine -> {op:"next_query", state_summary}              child -> {query: str|null}
  engine -> {op:"classify_snippet", snippet, rank, rand}  child -> {attractive: bool}
  engine -> {op:"classify_document", doc, rand}           child -> {relevant: bool}
  engine -> {op:"decide", state_summary}                  child -> {action: "CONTINUE"|"NEXT_QUERY"|"END"}
"""

from __future__ import annotations

import os
import queue
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Optional

from .backend import Document, SerpEntry
from .bundle import ExperimentBundle, bundle_hash, save_bundle, validate_bundle
from .canonical import CanonicalError, canonicalize, file_sha256, parse_canonical, write_canonical_file
from .datasets import Topic
from .engine import (
    ComponentFailure,
    Decision,
    EngineError,
    Environment,
    RunDeadlineExceeded,
    SessionState,
    compute_session_measures,
    encode_trace,
    run_session,
)
from .model import PipelineNode, RegistrySource
from .registry import ComponentRegistry, parse_component_manifest
from .templates import TemplateError, TemplateStore

COMPONENT_TIMEOUT = "COMPONENT_TIMEOUT"
COMPONENT_PROTOCOL = "COMPONENT_PROTOCOL"
COMPONENT_EXIT = "COMPONENT_EXIT"
TIMEOUT = "TIMEOUT"
SESSION_CAP = "SESSION_CAP"


@dataclass(frozen=True)
class RunLimits:
    wall_clock_s: float = 60.0
    component_timeout_s: float = 5.0
    session_cap: int = 100


@dataclass(frozen=True)
class Stores:
    templates: TemplateStore
    registry: ComponentRegistry


@dataclass(frozen=True)
class RunFailure:
    code: str
    detail: str
    node_id: Optional[str] = None

    def to_value(self) -> dict:
        value: dict[str, Any] = {"code": self.code, "detail": self.detail}
        if self.node_id is not None:
            value["node_id"] = self.node_id
        return value


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    bundle_hash: str
    status: str  # QUEUED | RUNNING | COMPLETED | FAILED
    started: str = ""
    finished: str = ""
    log: str = "run.log"
    outputs: Optional[dict] = None
    failure: Optional[RunFailure] = None

    def to_value(self) -> dict:
        return {
            "run_id": self.run_id,
            "bundle_hash": self.bundle_hash,
            "status": self.status,
            "started": self.started,
            "finished": self.finished,
            "log": self.log,
            "outputs": self.outputs,
            "failure": self.failure.to_value() if self.failure else None,
        }

    @classmethod
    def from_value(cls, value: Mapping) -> "RunRecord":
        failure = value.get("failure")
        return cls(
            run_id=value["run_id"],
            bundle_hash=value["bundle_hash"],
            status=value["status"],
            started=value.get("started", ""),
            finished=value.get("finished", ""),
            log=value.get("log", "run.log"),
            outputs=value.get("outputs"),
            failure=RunFailure(failure["code"], failure["detail"], failure.get("node_id")) if failure else None,
        )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


_run_counter = 0
_run_counter_lock = threading.Lock()


def new_run_id() -> str:
    """Time-ordered, unique, matches the identifier grammar."""
    global _run_counter
    with _run_counter_lock:
        _run_counter += 1
        n = _run_counter
    return f"r{time.time_ns():x}_{n:04d}_{os.urandom(2).hex()}"


class RunLog:
    """Plain text lines `RFC3339 LEVEL message`, append-only."""

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()
        self.path.touch()

    def write(self, level: str, message: str) -> None:
        line = f"{_now()} {level} {message}\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)


class _LineChannel:
    """Request/reply over a child's stdio with a per-request timeout."""

    def __init__(self, proc: subprocess.Popen, node_id: str, timeout_s: float):
        self.proc = proc
        self.node_id = node_id
        self.timeout_s = timeout_s
        self._queue: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        try:
            for line in self.proc.stdout:  # type: ignore[union-attr]
                self._queue.put(line)
        finally:
            self._queue.put(None)  # EOF sentinel

    def request(self, payload: dict) -> dict:
        try:
            self.proc.stdin.write(canonicalize(payload) + b"\n")  # type: ignore[union-attr]
            self.proc.stdin.flush()  # type: ignore[union-attr]
        except (BrokenPipeError, OSError):
            raise self._exit_failure()
        try:
            line = self._queue.get(timeout=self.timeout_s)
        except queue.Empty:
            raise ComponentFailure(COMPONENT_TIMEOUT, f"no reply within {self.timeout_s}s", node_id=self.node_id)
        if line is None:
            raise self._exit_failure()
        try:
            reply = parse_canonical(line.strip())
        except CanonicalError as exc:
            raise ComponentFailure(
                COMPONENT_PROTOCOL,
                f"malformed reply {line!r}: {exc}",
                node_id=self.node_id,
            ) from exc
        if not isinstance(reply, dict):
            raise ComponentFailure(COMPONENT_PROTOCOL, f"reply is not an object: {line!r}", node_id=self.node_id)
        return reply

    def _exit_failure(self) -> ComponentFailure:
        try:
            code = self.proc.wait(timeout=1.0)
        except subprocess.TimeoutExpired:
            code = None
        if code not in (0, None):
            return ComponentFailure(COMPONENT_EXIT, f"component exited with status {code}", node_id=self.node_id)
        return ComponentFailure(COMPONENT_PROTOCOL, "component closed its output stream", node_id=self.node_id)


def _scrubbed_env(extra: Mapping[str, str]) -> dict[str, str]:
    env = {
        "PATH": os.environ.get("PATH", "/usr/local/bin:/usr/bin:/bin"),
        "LANG": "C.UTF-8",
        "PYTHONUNBUFFERED": "1",
        "PYTHONDONTWRITEBYTECODE": "1",
    }
    env.update(extra)
    return env


class SubprocessComponent:
    """One child process serving one component for one session."""

    def __init__(
        self,
        node: PipelineNode,
        workdir: Path,
        manifest_path: str,
        topic: Topic,
        timeout_s: float,
    ):
        self.node_id = node.node_id
        manifest = parse_component_manifest((workdir / manifest_path).read_bytes())
        component_dir = (workdir / manifest_path).parent
        argv = list(manifest.entrypoint)
        head = component_dir / argv[0]
        if head.is_file():
            argv[0] = str(head)
        try:
            self.proc = subprocess.Popen(
                argv,
                cwd=component_dir,
                env=_scrubbed_env(manifest.env or {}),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise ComponentFailure(COMPONENT_EXIT, f"failed to launch {argv[0]!r}: {exc}", node_id=self.node_id)
        self.channel = _LineChannel(self.proc, self.node_id, timeout_s)
        reply = self.channel.request(
            {
                "op": "init",
                "category": node.component.role.value,
                "params": dict(node.component.params),
                "topic": {"topic_id": topic.topic_id, "title": topic.title, "description": topic.description},
            }
        )
        if reply.get("ok") is not True:
            raise ComponentFailure(COMPONENT_PROTOCOL, f"bad init reply {reply!r}", node_id=self.node_id)

    def close(self) -> None:
        # EOF on stdin lets well-behaved children exit; kill the rest before
        # touching stdout (the reader thread holds its lock while blocked).
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=0.5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()
        try:
            if self.proc.stdout:
                self.proc.stdout.close()
        except OSError:
            pass

    # -- role adapters -------------------------------------------------------

    def next_query(self, state: SessionState) -> Optional[str]:
        reply = self.channel.request({"op": "next_query", "state_summary": state.summary()})
        query = reply.get("query")
        if query is not None and not isinstance(query, str):
            raise ComponentFailure(COMPONENT_PROTOCOL, f"bad next_query reply {reply!r}", node_id=self.node_id)
        return query

    def classify_snippet(self, entry: SerpEntry, rand: float) -> bool:
        reply = self.channel.request(
            {
                "op": "classify_snippet",
                "snippet": {"doc_id": entry.doc_id, "text": entry.snippet},
                "rank": entry.rank,
                "rand": rand,
            }
        )
        verdict = reply.get("attractive")
        if not isinstance(verdict, bool):
            raise ComponentFailure(COMPONENT_PROTOCOL, f"bad classify_snippet reply {reply!r}", node_id=self.node_id)
        return verdict

    def classify_document(self, doc: Document, rand: float) -> bool:
        reply = self.channel.request(
            {
                "op": "classify_document",
                "doc": {"doc_id": doc.doc_id, "title": doc.title, "body": doc.body},
                "rand": rand,
            }
        )
        verdict = reply.get("relevant")
        if not isinstance(verdict, bool):
            raise ComponentFailure(COMPONENT_PROTOCOL, f"bad classify_document reply {reply!r}", node_id=self.node_id)
        return verdict

    def decide(self, state: SessionState) -> Decision:
        reply = self.channel.request({"op": "decide", "state_summary": state.summary()})
        action = reply.get("action")
        if action not in ("CONTINUE", "NEXT_QUERY", "END"):
            raise ComponentFailure(COMPONENT_PROTOCOL, f"bad decide reply {reply!r}", node_id=self.node_id)
        return Decision(action)


def _make_component_factory(run_dir: Path, checkouts: Mapping[str, str], limits: RunLimits):
    from .builtins import default_component_factory

    def factory(node: PipelineNode, environment: Environment, topic: Topic):
        if isinstance(node.component.source, RegistrySource):
            return SubprocessComponent(
                node=node,
                workdir=run_dir / "components" / node.node_id,
                manifest_path=node.component.source.path,
                topic=topic,
                timeout_s=limits.component_timeout_s,
            )
        return default_component_factory(node, environment, topic)

    return factory


class RunStore:
    """Run directories plus their persisted records under one root."""

    RECORD_FILE = "record.canon.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def run_dir(self, run_id: str) -> Path:
        return self.root / run_id

    def save(self, record: RunRecord) -> RunRecord:
        with self._lock:
            run_dir = self.run_dir(record.run_id)
            run_dir.mkdir(parents=True, exist_ok=True)
            write_canonical_file(run_dir / self.RECORD_FILE, record.to_value())
        return record

    def get(self, run_id: str) -> Optional[RunRecord]:
        path = self.run_dir(run_id) / self.RECORD_FILE
        if not path.is_file():
            return None
        return RunRecord.from_value(parse_canonical(path.read_bytes()))

    def list_ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / self.RECORD_FILE).is_file())


def execute(
    bundle: ExperimentBundle,
    stores: Stores,
    run_store: RunStore,
    limits: RunLimits = RunLimits(),
    run_id: Optional[str] = None,
) -> RunRecord:
    """Run a validated bundle to completion; failures become FAILED records."""
    run_id = run_id or new_run_id()
    record = RunRecord(run_id=run_id, bundle_hash=bundle_hash(bundle), status="RUNNING", started=_now())
    run_store.save(record)
    run_dir = run_store.run_dir(run_id)
    log = RunLog(run_dir / "run.log")
    deadline = time.monotonic() + limits.wall_clock_s

    def fail(code: str, detail: str, node_id: Optional[str] = None) -> RunRecord:
        log.write("ERROR", f"{code}: {detail}")
        failed = replace(record, status="FAILED", finished=_now(), failure=RunFailure(code, detail, node_id))
        return run_store.save(failed)

    try:
        save_bundle(run_dir / "bundle.canon.json", bundle)
        log.write("INFO", f"run {run_id} for bundle {record.bundle_hash}")

        report = validate_bundle(bundle, stores.templates, stores.registry)
        if not report.ok:
            first = report.violations[0]
            return fail(first.code, first.detail, first.node_id)

        if bundle.repetitions > limits.session_cap:
            return fail(SESSION_CAP, f"repetitions {bundle.repetitions} exceed the per-run cap {limits.session_cap}")

        try:
            environment = stores.templates.resolve_environment(
                bundle.template_ref.name, bundle.template_ref.version
            )
        except TemplateError as exc:
            return fail(exc.code, str(exc))

        checkouts: dict[str, str] = {}
        for node in bundle.pipeline.nodes:
            source = node.component.source
            if isinstance(source, RegistrySource):
                dest = run_dir / "components" / node.node_id
                stores.registry.checkout(source.commit_id, dest)
                checkouts[node.node_id] = source.commit_id
                log.write("INFO", f"checked out {source.commit_id} into components/{node.node_id}")

        factory = _make_component_factory(run_dir, checkouts, limits)
        outputs_dir = run_dir / "outputs"
        outputs_dir.mkdir(parents=True, exist_ok=True)
        trace_paths: list[str] = []
        per_user_measures: list[dict] = []
        for user_index in range(bundle.repetitions):
            log.write("INFO", f"session user={user_index} starting")
            trace = run_session(
                pipeline=bundle.pipeline,
                environment=environment,
                user_index=user_index,
                master_seed=bundle.master_seed,
                costs=bundle.run_params.costs,
                budget=bundle.run_params.budget,
                component_factory=factory,
                deadline=deadline,
            )
            trace_path = outputs_dir / f"trace.u{user_index}.jsonl"
            trace_path.write_bytes(encode_trace(trace))
            trace_paths.append(f"outputs/trace.u{user_index}.jsonl")
            measures = compute_session_measures(trace, environment.qrels)
            per_user_measures.append({"user": user_index, **measures})
            log.write("INFO", f"session user={user_index} finished with {len(trace)} events")
            if time.monotonic() > deadline:
                raise RunDeadlineExceeded()

        merged = _merge_measures(per_user_measures)
        write_canonical_file(outputs_dir / "measures.canon.json", merged)
        outputs = {"traces": trace_paths, "measures": "outputs/measures.canon.json"}
        log.write("INFO", "run completed")
        done = replace(record, status="COMPLETED", finished=_now(), outputs=outputs)
        return run_store.save(done)
    except RunDeadlineExceeded:
        return fail(TIMEOUT, f"wall clock limit {limits.wall_clock_s}s exceeded")
    except ComponentFailure as exc:
        return fail(exc.code, exc.detail, exc.node_id)
    except EngineError as exc:
        return fail(exc.code, exc.detail, exc.node_id)
    except Exception as exc:  # surfaced as a failure record, never raised
        return fail("INTERNAL", f"{type(exc).__name__}: {exc}")


def _merge_measures(per_user: list[dict]) -> dict:
    numeric_keys = sorted({k for m in per_user for k in m if k != "user"})
    mean = {}
    for key in numeric_keys:
        values = [m[key] for m in per_user if key in m]
        mean[key] = sum(values) / len(values) if values else 0.0
    return {"users": per_user, "mean": mean}


def execute_batch(
    bundles: list[ExperimentBundle],
    stores: Stores,
    run_store: RunStore,
    parallelism: int = 1,
    limits: RunLimits = RunLimits(),
) -> list[RunRecord]:
    """Run up to `parallelism` bundles concurrently; results keep submission order."""
    if not bundles:
        return []
    parallelism = max(1, parallelism)
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(execute, b, stores, run_store, limits) for b in bundles]
        return [f.result() for f in futures]


def trace_hashes_of_run(run_store: RunStore, record: RunRecord) -> list[str]:
    run_dir = run_store.run_dir(record.run_id)
    return [file_sha256(run_dir / rel) for rel in (record.outputs or {}).get("traces", [])]


@dataclass(frozen=True)
class VerifyResult:
    status: str  # PASS | FAIL | SCOPE_LIMITED
    first_divergent_user: Optional[int] = None
    failure: Optional[RunFailure] = None
    run_id: Optional[str] = None

    def to_value(self) -> dict:
        return {
            "status": self.status,
            "first_divergent_user": self.first_divergent_user,
            "failure": self.failure.to_value() if self.failure else None,
            "run_id": self.run_id,
        }


def verify_reproduction(
    bundle: ExperimentBundle,
    recorded_trace_hashes: list[str],
    stores: Stores,
    run_store: RunStore,
    limits: RunLimits = RunLimits(),
) -> VerifyResult:
    """Re-execute and compare per-user trace hashes.

    Components flagged external put the run outside the replication scope:
    only configuration identity can be asserted, so no execution happens.
    """
    if bundle.has_external_component():
        return VerifyResult(status="SCOPE_LIMITED")
    record = execute(bundle, stores, run_store, limits)
    if record.status != "COMPLETED":
        return VerifyResult(status="FAIL", failure=record.failure, run_id=record.run_id)
    actual = trace_hashes_of_run(run_store, record)
    if len(actual) != len(recorded_trace_hashes):
        return VerifyResult(status="FAIL", first_divergent_user=min(len(actual), len(recorded_trace_hashes)), run_id=record.run_id)
    for user_index, (got, expected) in enumerate(zip(actual, recorded_trace_hashes)):
        if got != expected:
            return VerifyResult(status="FAIL", first_divergent_user=user_index, run_id=record.run_id)
    return VerifyResult(status="PASS", run_id=record.run_id)


class RunQueue:
    """Bounded worker pool consuming queued runs; records update atomically."""

    def __init__(self, stores: Stores, run_store: RunStore, limits: RunLimits = RunLimits(), workers: int = 2):
        self.stores = stores
        self.run_store = run_store
        self.limits = limits
        self._queue: queue.Queue = queue.Queue()
        self._workers = [threading.Thread(target=self._work, daemon=True) for _ in range(max(1, workers))]
        for w in self._workers:
            w.start()

    def submit(self, bundle: ExperimentBundle) -> str:
        run_id = new_run_id()
        self.run_store.save(RunRecord(run_id=run_id, bundle_hash=bundle_hash(bundle), status="QUEUED"))
        self._queue.put((run_id, bundle))
        return run_id

    def _work(self) -> None:
        while True:
            run_id, bundle = self._queue.get()
            try:
                execute(bundle, self.stores, self.run_store, self.limits, run_id=run_id)
            except Exception:
                # execute() records its own failures; this guards the worker.
                pass
            finally:
                self._queue.task_done()

    def join(self) -> None:
        self._queue.join()
