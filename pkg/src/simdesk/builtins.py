"""Builtin behavioral components and the catalog that publishes their schemas.

Every classifier decision costs exactly one rng draw, supplied by the
engine, even when a parameter makes the outcome certain; that keeps traces
stable while probabilities are tuned.
"""

from __future__ import annotations

from importlib import resources
from typing import Mapping, Optional

from .backend import (
    Bm25Params,
    Document,
    MockConfig,
    Serp,
    SerpEntry,
    mock_search,
    search,
    tokenize,
)
from .datasets import Qrels, Topic
from .engine import Decision, EngineError, Environment, SessionState
from .model import ComponentCatalog, ComponentRole, ParameterSchema, PipelineNode, SchemaEntry


def load_stopwords() -> frozenset[str]:
    text = resources.files("simdesk").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


STOPWORDS = load_stopwords()


# --- query generators --------------------------------------------------------


class SingleTermGenerator:
    """Topic terms one per query, ordered by (frequency desc, term asc)."""

    def __init__(self, topic: Topic):
        counts: dict[str, int] = {}
        for term in tokenize(topic.title + " " + topic.description):
            if term not in STOPWORDS:
                counts[term] = counts.get(term, 0) + 1
        self._queue = [t for t, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
        self._pos = 0

    def next_query(self, state: SessionState) -> Optional[str]:
        if self._pos >= len(self._queue):
            return None
        query = self._queue[self._pos]
        self._pos += 1
        return query


class TitlePairsGenerator:
    """Title terms in text order, then every ordered pair joined by a space."""

    def __init__(self, topic: Topic):
        terms: list[str] = []
        for term in tokenize(topic.title):
            if term not in terms:
                terms.append(term)
        queue = list(terms)
        for i in range(len(terms)):
            for j in range(i + 1, len(terms)):
                queue.append(f"{terms[i]} {terms[j]}")
        self._queue = queue
        self._pos = 0

    def next_query(self, state: SessionState) -> Optional[str]:
        if self._pos >= len(self._queue):
            return None
        query = self._queue[self._pos]
        self._pos += 1
        return query


# --- snippet classifiers ------------------------------------------------------


class RandomAttract:
    def __init__(self, p: float):
        self.p = p

    def classify_snippet(self, entry: SerpEntry, rand: float) -> bool:
        return rand < self.p


class RankBiased:
    """Attraction probability decays geometrically with rank: gamma^(rank-1)."""

    def __init__(self, gamma: float):
        self.gamma = gamma

    def classify_snippet(self, entry: SerpEntry, rand: float) -> bool:
        return rand < self.gamma ** (entry.rank - 1)


class QrelInformedSnippet:
    def __init__(self, p_rel: float, p_nonrel: float, topic_id: str, qrels: Qrels):
        self.p_rel = p_rel
        self.p_nonrel = p_nonrel
        self.topic_id = topic_id
        self.qrels = qrels

    def classify_snippet(self, entry: SerpEntry, rand: float) -> bool:
        p = self.p_rel if self.qrels.is_relevant(self.topic_id, entry.doc_id) else self.p_nonrel
        return rand < p


# --- document classifiers -----------------------------------------------------


class AlwaysRelevant:
    def classify_document(self, doc: Document, rand: float) -> bool:
        return True


class QrelAccuracy:
    """True-positive / false-positive judge against the environment qrels."""

    def __init__(self, p_tp: float, p_fp: float, topic_id: str, qrels: Qrels):
        self.p_tp = p_tp
        self.p_fp = p_fp
        self.topic_id = topic_id
        self.qrels = qrels

    def classify_document(self, doc: Document, rand: float) -> bool:
        p = self.p_tp if self.qrels.is_relevant(self.topic_id, doc.doc_id) else self.p_fp
        return rand < p


# --- stopping strategies ------------------------------------------------------


class FixedDepth:
    def __init__(self, k: int):
        self.k = k

    def decide(self, state: SessionState) -> Decision:
        if state.snippets_examined_this_serp >= self.k:
            return Decision.NEXT_QUERY
        return Decision.CONTINUE


class Frustration:
    def __init__(self, n: int):
        self.n = n

    def decide(self, state: SessionState) -> Decision:
        if state.consecutive_unattractive >= self.n:
            return Decision.NEXT_QUERY
        return Decision.CONTINUE


class TotalMarks:
    def __init__(self, m: int):
        self.m = m

    def decide(self, state: SessionState) -> Decision:
        if len(state.marked_docs) >= self.m:
            return Decision.END
        return Decision.CONTINUE


class CombinedStopping:
    """Any subset of the three rules; zero disables one. END beats NEXT_QUERY."""

    def __init__(self, k: int, n: int, m: int):
        self.k = k
        self.n = n
        self.m = m

    def decide(self, state: SessionState) -> Decision:
        if self.m and len(state.marked_docs) >= self.m:
            return Decision.END
        if self.k and state.snippets_examined_this_serp >= self.k:
            return Decision.NEXT_QUERY
        if self.n and state.consecutive_unattractive >= self.n:
            return Decision.NEXT_QUERY
        return Decision.CONTINUE


# --- search backend ports -----------------------------------------------------


class Bm25Backend:
    def __init__(self, environment: Environment, params: Mapping):
        self.index = environment.index()
        self.params = Bm25Params(
            k1=float(params.get("k1", 1.2)),
            b=float(params.get("b", 0.75)),
            serp_depth=int(params.get("serp_depth", 10)),
        )

    def search(self, query: str) -> Serp:
        return search(self.index, query, self.params)

    def get_document(self, doc_id: str) -> Optional[Document]:
        return self.index.get_document(doc_id)


class MockBackend:
    def __init__(self, environment: Environment, params: Mapping):
        # Node params win over the template's backend block.
        merged = dict(environment.backend_params)
        merged.update(params)
        self.config = MockConfig.from_params(merged)
        self.docs = environment.documents() if environment.corpus_path else {}

    def search(self, query: str) -> Serp:
        return mock_search(self.config, query, self.docs)

    def get_document(self, doc_id: str) -> Optional[Document]:
        return self.docs.get(doc_id)


# --- catalog ------------------------------------------------------------------


def _prob(name: str, default: float, description: str) -> SchemaEntry:
    return SchemaEntry(name=name, kind="float", default=default, min=0.0, max=1.0, description=description)


def build_catalog() -> ComponentCatalog:
    catalog = ComponentCatalog()
    catalog.register(ComponentRole.QUERY_GENERATOR, "single_term", ParameterSchema())
    catalog.register(ComponentRole.QUERY_GENERATOR, "title_pairs", ParameterSchema())
    catalog.register(
        ComponentRole.SNIPPET_CLASSIFIER,
        "random_attract",
        ParameterSchema((_prob("p", 0.5, "probability a snippet attracts a click"),)),
    )
    catalog.register(
        ComponentRole.SNIPPET_CLASSIFIER,
        "rank_biased",
        ParameterSchema((_prob("gamma", 0.5, "geometric decay of attraction with rank"),)),
    )
    catalog.register(
        ComponentRole.SNIPPET_CLASSIFIER,
        "qrel_informed",
        ParameterSchema(
            (
                _prob("p_rel", 0.8, "click probability for relevant documents"),
                _prob("p_nonrel", 0.2, "click probability for non-relevant documents"),
            )
        ),
    )
    catalog.register(ComponentRole.DOCUMENT_CLASSIFIER, "always_relevant", ParameterSchema())
    catalog.register(
        ComponentRole.DOCUMENT_CLASSIFIER,
        "qrel_accuracy",
        ParameterSchema(
            (
                _prob("p_tp", 1.0, "probability a relevant document is judged relevant"),
                _prob("p_fp", 0.0, "probability a non-relevant document is judged relevant"),
            )
        ),
    )
    catalog.register(
        ComponentRole.STOPPING_STRATEGY,
        "fixed_depth",
        ParameterSchema((SchemaEntry(name="k", kind="int", default=3, min=1, description="snippets per SERP"),)),
    )
    catalog.register(
        ComponentRole.STOPPING_STRATEGY,
        "frustration",
        ParameterSchema(
            (SchemaEntry(name="n", kind="int", default=3, min=1, description="consecutive unattractive snippets"),)
        ),
    )
    catalog.register(
        ComponentRole.STOPPING_STRATEGY,
        "total_marks",
        ParameterSchema((SchemaEntry(name="m", kind="int", default=3, min=1, description="marked docs to end at"),)),
    )
    catalog.register(
        ComponentRole.STOPPING_STRATEGY,
        "combined",
        ParameterSchema(
            (
                SchemaEntry(name="k", kind="int", default=0, min=0, description="fixed depth, 0 disables"),
                SchemaEntry(name="n", kind="int", default=0, min=0, description="frustration limit, 0 disables"),
                SchemaEntry(name="m", kind="int", default=0, min=0, description="total marks, 0 disables"),
            )
        ),
    )
    catalog.register(
        ComponentRole.SEARCH_BACKEND,
        "bm25",
        ParameterSchema(
            (
                SchemaEntry(name="k1", kind="float", default=1.2, min=0.0, description="term-frequency saturation"),
                SchemaEntry(name="b", kind="float", default=0.75, min=0.0, max=1.0, description="length normalization"),
                SchemaEntry(name="serp_depth", kind="int", default=10, min=1, description="results per page"),
            )
        ),
    )
    catalog.register(ComponentRole.SEARCH_BACKEND, "mock", ParameterSchema())
    return catalog


BUILTIN_CATALOG = build_catalog()


def _require_qrels(environment: Environment, name: str) -> Qrels:
    if environment.qrels is None:
        raise EngineError("MISSING_QRELS", f"component {name!r} requires qrels in the environment")
    return environment.qrels


def default_component_factory(node: PipelineNode, environment: Environment, topic: Topic):
    """Instantiate a builtin component for one session."""
    ref = node.component
    schema = BUILTIN_CATALOG.lookup(ref.role, ref.name)
    if schema is None:
        raise EngineError(
            "UNKNOWN_COMPONENT", f"no builtin {ref.role.value} named {ref.name!r}", node_id=node.node_id
        )
    params = schema.resolve(ref.params)
    role, name = ref.role, ref.name
    if role is ComponentRole.QUERY_GENERATOR:
        return SingleTermGenerator(topic) if name == "single_term" else TitlePairsGenerator(topic)
    if role is ComponentRole.SNIPPET_CLASSIFIER:
        if name == "random_attract":
            return RandomAttract(params["p"])
        if name == "rank_biased":
            return RankBiased(params["gamma"])
        return QrelInformedSnippet(
            params["p_rel"], params["p_nonrel"], topic.topic_id, _require_qrels(environment, name)
        )
    if role is ComponentRole.DOCUMENT_CLASSIFIER:
        if name == "always_relevant":
            return AlwaysRelevant()
        return QrelAccuracy(params["p_tp"], params["p_fp"], topic.topic_id, _require_qrels(environment, name))
    if role is ComponentRole.STOPPING_STRATEGY:
        if name == "fixed_depth":
            return FixedDepth(params["k"])
        if name == "frustration":
            return Frustration(params["n"])
        if name == "total_marks":
            return TotalMarks(params["m"])
        return CombinedStopping(params["k"], params["n"], params["m"])
    if name == "bm25":
        return Bm25Backend(environment, params)
    return MockBackend(environment, params)
