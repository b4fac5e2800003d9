"""Reference session engine: the complex-searcher loop over one pipeline.

One session = one simulated user working one topic: issue a query, scan the
SERP top-down, examine each snippet, maybe click and judge the document,
ask the stopping strategy after every snippet step, reformulate or stop.
The trace is a pure function of (pipeline, environment, user_index,
master_seed, costs, budget).

Timing rule (normative for this artifact): an action's cost is charged
before its event is emitted, so every event carries the simulated time at
which the action completed. The budget check runs after each event and
ends the session once sim_time exceeds the budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Protocol

from .backend import Bm25Index, Document, Serp, SerpEntry, build_index
from .canonical import canonicalize, parse_canonical
from .datasets import Qrels, Topic, read_corpus
from .model import ComponentRole, PipelineGraph, PipelineNode
from .rng import RngStream

ENGINE_VERSION = "ref/0.1"

DEFAULT_BUDGET = 600.0


@dataclass(frozen=True)
class TimeCosts:
    """Simulated seconds charged per user action."""

    query: float = 10.0
    snippet: float = 3.0
    doc: float = 20.0
    mark: float = 5.0

    def to_value(self) -> dict:
        return {"query": self.query, "snippet": self.snippet, "doc": self.doc, "mark": self.mark}

    @classmethod
    def from_value(cls, value: Mapping) -> "TimeCosts":
        known = {"query", "snippet", "doc", "mark"}
        unknown = set(value) - known
        if unknown:
            raise ValueError(f"unknown cost keys {sorted(unknown)}")
        kwargs = {}
        for key in known & set(value):
            raw = value[key]
            if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw < 0:
                raise ValueError(f"cost {key} must be a non-negative number")
            kwargs[key] = float(raw)
        return cls(**kwargs)


class Action(str, Enum):
    QUERY_ISSUED = "QUERY_ISSUED"
    SNIPPET_EXAMINED = "SNIPPET_EXAMINED"
    DOC_CLICKED = "DOC_CLICKED"
    DOC_JUDGED = "DOC_JUDGED"
    DOC_MARKED_RELEVANT = "DOC_MARKED_RELEVANT"
    SESSION_END = "SESSION_END"


class EndReason(str, Enum):
    EXHAUSTED = "EXHAUSTED"
    STOPPED = "STOPPED"
    BUDGET = "BUDGET"


class Decision(str, Enum):
    CONTINUE = "CONTINUE"
    NEXT_QUERY = "NEXT_QUERY"
    END = "END"


class EngineError(Exception):
    def __init__(self, code: str, detail: str, node_id: Optional[str] = None):
        self.code = code
        self.detail = detail
        self.node_id = node_id
        super().__init__(f"{code}: {detail}" + (f" (node {node_id})" if node_id else ""))


class ComponentFailure(EngineError):
    """A behavioral component broke its contract; code names the failure mode."""


class BackendFailure(EngineError):
    def __init__(self, detail: str):
        super().__init__("BACKEND_FAILURE", detail)


class RunDeadlineExceeded(Exception):
    """Wall-clock limit hit; raised out of the loop, never recorded in a trace."""


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    user: int
    topic_id: str
    sim_time: float
    action: Action
    payload: dict

    def to_value(self) -> dict:
        return {
            "seq": self.seq,
            "user": self.user,
            "topic_id": self.topic_id,
            "sim_time": self.sim_time,
            "action": self.action.value,
            "payload": self.payload,
        }

    @classmethod
    def from_value(cls, value: Mapping) -> "TraceEvent":
        return cls(
            seq=value["seq"],
            user=value["user"],
            topic_id=value["topic_id"],
            sim_time=float(value["sim_time"]),
            action=Action(value["action"]),
            payload=dict(value["payload"]),
        )


SessionTrace = list[TraceEvent]


def encode_trace(events: SessionTrace) -> bytes:
    """JSON lines, one canonical event per line, in seq order."""
    return b"".join(canonicalize(e.to_value()) + b"\n" for e in events)


def decode_trace(data: bytes) -> SessionTrace:
    events = []
    for raw in data.splitlines():
        if raw.strip():
            events.append(TraceEvent.from_value(parse_canonical(raw)))
    return events


@dataclass
class SessionState:
    topic: Topic
    current_query: Optional[str] = None
    serp: Optional[Serp] = None
    serp_position: int = 0
    snippets_examined_this_serp: int = 0
    consecutive_unattractive: int = 0
    marked_docs: list[str] = field(default_factory=list)
    queries_issued: int = 0
    snippets_examined: int = 0
    clicks: int = 0
    docs_judged: int = 0
    sim_time_elapsed: float = 0.0

    def mark(self, doc_id: str) -> None:
        if doc_id not in self.marked_docs:
            self.marked_docs.append(doc_id)

    def summary(self) -> dict:
        """The read surface stopping strategies and the wire protocol see."""
        return {
            "queries_issued": self.queries_issued,
            "snippets_examined_this_serp": self.snippets_examined_this_serp,
            "consecutive_unattractive": self.consecutive_unattractive,
            "docs_marked": len(self.marked_docs),
            "sim_time_elapsed": self.sim_time_elapsed,
        }


class QueryGenerator(Protocol):
    def next_query(self, state: SessionState) -> Optional[str]: ...


class SnippetClassifier(Protocol):
    def classify_snippet(self, entry: SerpEntry, rand: float) -> bool: ...


class DocumentClassifier(Protocol):
    def classify_document(self, doc: Document, rand: float) -> bool: ...


class StoppingStrategy(Protocol):
    def decide(self, state: SessionState) -> Decision: ...


class SearchPort(Protocol):
    def search(self, query: str) -> Serp: ...

    def get_document(self, doc_id: str) -> Optional[Document]: ...


@dataclass
class Environment:
    """Materialized evaluation context a session runs against."""

    name: str
    version: int
    engine_version: str
    topics: list[Topic]
    qrels: Optional[Qrels]
    backend_type: str
    backend_params: dict
    corpus_path: Optional[Path] = None
    _index: Optional[Bm25Index] = None
    _docs: Optional[dict[str, Document]] = None

    def index(self) -> Bm25Index:
        if self._index is None:
            docs = read_corpus(self.corpus_path) if self.corpus_path else ()
            self._index = build_index(docs)
        return self._index

    def documents(self) -> dict[str, Document]:
        if self._docs is None:
            self._docs = dict(self.index().docs)
        return self._docs

    def topic_for_user(self, user_index: int) -> Topic:
        if not self.topics:
            raise EngineError("NO_TOPICS", "environment has no topics")
        return self.topics[user_index % len(self.topics)]


# Builds one component instance for a pipeline node, fresh per session.
# The default factory (builtins only) lives in builtins.py; the executor
# wraps it to inject registry-sourced subprocess components.
ComponentFactory = Callable[[PipelineNode, Environment, Topic], Any]


def _budget_exceeded(state: SessionState, budget: float) -> bool:
    return state.sim_time_elapsed > budget


def run_session(
    pipeline: PipelineGraph,
    environment: Environment,
    user_index: int,
    master_seed: int,
    costs: TimeCosts = TimeCosts(),
    budget: float = DEFAULT_BUDGET,
    component_factory: Optional[ComponentFactory] = None,
    deadline: Optional[float] = None,
) -> SessionTrace:
    """Run one simulated session and return its ordered event trace."""
    from .builtins import default_component_factory

    factory = component_factory or default_component_factory
    topic = environment.topic_for_user(user_index)

    nodes = {role: pipeline.node_for_role(role) for role in ComponentRole}
    missing = [role.value for role, node in nodes.items() if node is None]
    if missing:
        raise EngineError("INVALID_PIPELINE", f"missing roles: {missing}")

    generator: QueryGenerator = factory(nodes[ComponentRole.QUERY_GENERATOR], environment, topic)
    snippet_clf: SnippetClassifier = factory(nodes[ComponentRole.SNIPPET_CLASSIFIER], environment, topic)
    doc_clf: DocumentClassifier = factory(nodes[ComponentRole.DOCUMENT_CLASSIFIER], environment, topic)
    stopper: StoppingStrategy = factory(nodes[ComponentRole.STOPPING_STRATEGY], environment, topic)
    backend: SearchPort = factory(nodes[ComponentRole.SEARCH_BACKEND], environment, topic)

    snippet_rng = RngStream(master_seed, f"u{user_index}/{nodes[ComponentRole.SNIPPET_CLASSIFIER].node_id}")
    doc_rng = RngStream(master_seed, f"u{user_index}/{nodes[ComponentRole.DOCUMENT_CLASSIFIER].node_id}")

    state = SessionState(topic=topic)
    events: SessionTrace = []

    def emit(action: Action, payload: dict) -> TraceEvent:
        event = TraceEvent(
            seq=len(events) + 1,
            user=user_index,
            topic_id=topic.topic_id,
            sim_time=state.sim_time_elapsed,
            action=action,
            payload=payload,
        )
        events.append(event)
        return event

    def end(reason: EndReason) -> SessionTrace:
        emit(Action.SESSION_END, {"reason": reason.value})
        for component in (generator, snippet_clf, doc_clf, stopper, backend):
            close = getattr(component, "close", None)
            if close is not None:
                close()
        return events

    try:
        while True:
            if deadline is not None and time.monotonic() > deadline:
                raise RunDeadlineExceeded()
            query = generator.next_query(state)
            if query is None:
                return end(EndReason.EXHAUSTED)
            state.queries_issued += 1
            state.current_query = query
            state.sim_time_elapsed += costs.query
            emit(Action.QUERY_ISSUED, {"query": query})
            if _budget_exceeded(state, budget):
                return end(EndReason.BUDGET)

            try:
                serp = backend.search(query)
            except EngineError:
                raise
            except Exception as exc:
                raise BackendFailure(str(exc)) from exc
            state.serp = serp
            state.serp_position = 0
            state.snippets_examined_this_serp = 0

            for entry in serp.entries:
                if deadline is not None and time.monotonic() > deadline:
                    raise RunDeadlineExceeded()
                state.serp_position = entry.rank
                state.snippets_examined_this_serp += 1
                state.snippets_examined += 1
                state.sim_time_elapsed += costs.snippet
                emit(Action.SNIPPET_EXAMINED, {"rank": entry.rank, "doc_id": entry.doc_id})
                if _budget_exceeded(state, budget):
                    return end(EndReason.BUDGET)

                attractive = snippet_clf.classify_snippet(entry, snippet_rng.next_float())
                if attractive:
                    state.consecutive_unattractive = 0
                    state.clicks += 1
                    emit(Action.DOC_CLICKED, {"rank": entry.rank, "doc_id": entry.doc_id})
                    if _budget_exceeded(state, budget):
                        return end(EndReason.BUDGET)

                    doc = backend.get_document(entry.doc_id) or Document(doc_id=entry.doc_id)
                    state.sim_time_elapsed += costs.doc
                    relevant = doc_clf.classify_document(doc, doc_rng.next_float())
                    state.docs_judged += 1
                    emit(Action.DOC_JUDGED, {"rank": entry.rank, "doc_id": entry.doc_id, "relevant": relevant})
                    if _budget_exceeded(state, budget):
                        return end(EndReason.BUDGET)

                    if relevant:
                        state.mark(entry.doc_id)
                        state.sim_time_elapsed += costs.mark
                        emit(Action.DOC_MARKED_RELEVANT, {"rank": entry.rank, "doc_id": entry.doc_id})
                        if _budget_exceeded(state, budget):
                            return end(EndReason.BUDGET)
                else:
                    state.consecutive_unattractive += 1

                decision = stopper.decide(state)
                if decision is Decision.END:
                    return end(EndReason.STOPPED)
                if decision is Decision.NEXT_QUERY:
                    break
            # SERP exhausted without a stopping signal: move to the next query.
    except BaseException:
        for component in (generator, snippet_clf, doc_clf, stopper, backend):
            close = getattr(component, "close", None)
            if close is not None:
                try:
                    close()
                except Exception:
                    pass
        raise


def compute_session_measures(trace: SessionTrace, qrels: Optional[Qrels] = None) -> dict:
    """Per-session counters; marked_precision only when qrels are available."""
    queries = sum(1 for e in trace if e.action is Action.QUERY_ISSUED)
    snippets = sum(1 for e in trace if e.action is Action.SNIPPET_EXAMINED)
    clicks = sum(1 for e in trace if e.action is Action.DOC_CLICKED)
    marked: list[str] = []
    for e in trace:
        if e.action is Action.DOC_MARKED_RELEVANT and e.payload["doc_id"] not in marked:
            marked.append(e.payload["doc_id"])
    measures: dict[str, Any] = {
        "queries_issued": queries,
        "snippets_examined": snippets,
        "clicks": clicks,
        "docs_marked": len(marked),
        "session_sim_time": trace[-1].sim_time if trace else 0.0,
    }
    if qrels is not None:
        topic_id = trace[0].topic_id if trace else ""
        if marked:
            hits = sum(1 for d in marked if qrels.is_relevant(topic_id, d))
            measures["marked_precision"] = hits / len(marked)
        else:
            measures["marked_precision"] = 0.0
    return measures
