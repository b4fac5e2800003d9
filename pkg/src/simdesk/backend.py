"""Embedded retrieval: Okapi BM25 over template corpora, plus a mock backend.

Scoring: score(d,q) = sum_t idf(t) * tf*(k1+1) / (tf + k1*(1-b + b*dl/avgdl))
with idf(t) = ln((N-df+0.5)/(df+0.5) + 1). The +1 inside the log keeps idf
non-negative, so the score>0 SERP cutoff stays meaningful near df == N.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .datasets import DUPLICATE_DOC_ID, DatasetError, Document

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

SNIPPET_MAX_CHARS = 160


def tokenize(text: str) -> list[str]:
    """Lowercase, split on any non-alphanumeric, drop empties. No stemming."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75
    serp_depth: int = 10

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not (0.0 <= self.b <= 1.0):
            raise ValueError("b must be in [0, 1]")
        if self.serp_depth < 1:
            raise ValueError("serp_depth must be >= 1")


@dataclass(frozen=True)
class SerpEntry:
    rank: int
    doc_id: str
    score: float
    snippet: str

    def to_value(self) -> dict:
        return {"rank": self.rank, "doc_id": self.doc_id, "score": self.score, "snippet": self.snippet}


@dataclass(frozen=True)
class Serp:
    query: str
    entries: tuple[SerpEntry, ...]


class Bm25Index:
    """Immutable inverted index over title + " " + body."""

    def __init__(self) -> None:
        self.doc_ids: list[str] = []
        self.docs: dict[str, Document] = {}
        self.doc_lengths: list[int] = []
        self.postings: dict[str, dict[int, int]] = {}
        self.avgdl: float = 0.0

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def get_document(self, doc_id: str) -> Optional[Document]:
        return self.docs.get(doc_id)


def build_index(corpus: Iterable[Document]) -> Bm25Index:
    index = Bm25Index()
    total_len = 0
    for doc in corpus:
        if doc.doc_id in index.docs:
            raise DatasetError(DUPLICATE_DOC_ID, f"duplicate doc_id {doc.doc_id!r}")
        doc_idx = len(index.doc_ids)
        index.doc_ids.append(doc.doc_id)
        index.docs[doc.doc_id] = doc
        tokens = tokenize(doc.title + " " + doc.body)
        index.doc_lengths.append(len(tokens))
        total_len += len(tokens)
        for term in tokens:
            bucket = index.postings.setdefault(term, {})
            bucket[doc_idx] = bucket.get(doc_idx, 0) + 1
    index.avgdl = total_len / index.doc_count if index.doc_count else 0.0
    return index


def idf(index: Bm25Index, term: str) -> float:
    df = index.document_frequency(term)
    n = index.doc_count
    return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


def make_snippet(body: str, query_terms: Iterable[str]) -> str:
    """First sentence containing a query term, else body prefix; 160-char cap."""
    terms = set(query_terms)
    for sentence in re.split(r"[.?!]", body):
        sentence = sentence.strip()
        if sentence and terms.intersection(tokenize(sentence)):
            return sentence[:SNIPPET_MAX_CHARS]
    return body[:SNIPPET_MAX_CHARS]


def search(index: Bm25Index, query: str, params: Bm25Params = Bm25Params()) -> Serp:
    """Top serp_depth docs with score > 0, ordered (score desc, doc_id asc)."""
    query_terms = tokenize(query)
    scores: dict[int, float] = {}
    if index.doc_count and index.avgdl > 0:
        for term in query_terms:
            term_idf = idf(index, term)
            for doc_idx, tf in index.postings.get(term, {}).items():
                dl = index.doc_lengths[doc_idx]
                norm = tf + params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
                scores[doc_idx] = scores.get(doc_idx, 0.0) + term_idf * tf * (params.k1 + 1.0) / norm
    ranked = sorted(
        ((s, index.doc_ids[i]) for i, s in scores.items() if s > 0.0),
        key=lambda pair: (-pair[0], pair[1].encode("utf-8")),
    )[: params.serp_depth]
    entries = tuple(
        SerpEntry(
            rank=rank,
            doc_id=doc_id,
            score=score,
            snippet=make_snippet(index.docs[doc_id].body, query_terms),
        )
        for rank, (score, doc_id) in enumerate(ranked, start=1)
    )
    return Serp(query=query, entries=entries)


@dataclass(frozen=True)
class MockConfig:
    """Fixed ranking returned for every query, with per-query overrides."""

    ranking: tuple[str, ...] = ()
    per_query: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    @classmethod
    def from_params(cls, params: Mapping) -> "MockConfig":
        ranking = params.get("ranking", [])
        if not isinstance(ranking, list) or not all(isinstance(d, str) for d in ranking):
            raise ValueError("mock backend 'ranking' must be a list of doc ids")
        per_query_raw = params.get("per_query", {})
        if not isinstance(per_query_raw, dict):
            raise ValueError("mock backend 'per_query' must be a map")
        per_query = {}
        for q, docs in per_query_raw.items():
            if not isinstance(docs, list) or not all(isinstance(d, str) for d in docs):
                raise ValueError(f"mock backend override for {q!r} must be a list of doc ids")
            per_query[q] = tuple(docs)
        return cls(ranking=tuple(ranking), per_query=per_query)


def mock_search(config: MockConfig, query: str, docs: Mapping[str, Document] | None = None) -> Serp:
    """Configured ranking with scores 1/rank; snippet from the corpus if known."""
    ranking = config.per_query.get(query, config.ranking)
    entries = []
    for rank, doc_id in enumerate(ranking, start=1):
        doc = docs.get(doc_id) if docs else None
        snippet = doc.body[:SNIPPET_MAX_CHARS] if doc else ""
        entries.append(SerpEntry(rank=rank, doc_id=doc_id, score=1.0 / rank, snippet=snippet))
    return Serp(query=query, entries=tuple(entries))
