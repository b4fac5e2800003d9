from __future__ import annotations

import math
import random
import string

import pytest

from simdesk.backend import (
    Bm25Params,
    Document,
    MockConfig,
    build_index,
    make_snippet,
    mock_search,
    search,
    tokenize,
)
from simdesk.datasets import DatasetError


class TestTokenize:
    def test_lowercase_split_nonalnum(self):
        assert tokenize("Hello, World-2000!") == ["hello", "world", "2000"]

    def test_underscore_splits(self):
        assert tokenize("a_b") == ["a", "b"]

    def test_empty_dropped(self):
        assert tokenize("  ... ") == []


SMALL_CORPUS = [
    Document(doc_id="d1", body="a b"),
    Document(doc_id="d2", body="a"),
    Document(doc_id="d3", body="c"),
]


class TestIndex:
    def test_counts(self):
        index = build_index(SMALL_CORPUS)
        assert index.doc_count == 3
        assert index.document_frequency("a") == 2
        assert index.avgdl == pytest.approx(4 / 3)

    def test_empty_corpus(self):
        index = build_index([])
        assert index.doc_count == 0
        assert search(index, "anything").entries == ()

    def test_duplicate_doc_id(self):
        with pytest.raises(DatasetError) as err:
            build_index([Document(doc_id="d1"), Document(doc_id="d1")])
        assert err.value.code == "DUPLICATE_DOC_ID"

    def test_title_and_body_both_indexed(self):
        index = build_index([Document(doc_id="d1", title="alpha", body="beta")])
        assert index.document_frequency("alpha") == 1
        assert index.doc_lengths == [2]


class TestSearch:
    def test_hand_derived_ranking(self):
        """Query "a": idf=ln(1.6); d2 scores 2.2/1.975, d1 scores 2.2/2.65."""
        index = build_index(SMALL_CORPUS)
        serp = search(index, "a")
        assert [e.doc_id for e in serp.entries] == ["d2", "d1"]
        expected_idf = math.log(1.6)
        assert serp.entries[0].score == pytest.approx(expected_idf * 2.2 / 1.975)
        assert serp.entries[1].score == pytest.approx(expected_idf * 2.2 / 2.65)

    def test_absent_term_empty_serp(self):
        index = build_index(SMALL_CORPUS)
        assert search(index, "zzz").entries == ()

    def test_tie_break_ascending_doc_id(self):
        index = build_index(
            [
                Document(doc_id="db", body="same words here"),
                Document(doc_id="da", body="same words here"),
            ]
        )
        serp = search(index, "same")
        assert [e.doc_id for e in serp.entries] == ["da", "db"]
        assert [e.rank for e in serp.entries] == [1, 2]
        assert serp.entries[0].score == serp.entries[1].score

    def test_ranks_contiguous_scores_non_increasing(self):
        index = build_index([Document(doc_id=f"d{i}", body="common " + "extra " * i) for i in range(8)])
        serp = search(index, "common extra")
        assert [e.rank for e in serp.entries] == list(range(1, len(serp.entries) + 1))
        scores = [e.score for e in serp.entries]
        assert scores == sorted(scores, reverse=True)

    def test_serp_depth_truncates(self):
        docs = [Document(doc_id=f"d{i:02d}", body="term") for i in range(20)]
        index = build_index(docs)
        serp = search(index, "term", Bm25Params(serp_depth=5))
        assert len(serp.entries) == 5

    def test_depth_monotonicity(self):
        docs = [Document(doc_id=f"d{i:02d}", body="term " * (i + 1)) for i in range(12)]
        index = build_index(docs)
        shallow = search(index, "term", Bm25Params(serp_depth=4))
        deep = search(index, "term", Bm25Params(serp_depth=10))
        assert [e.doc_id for e in deep.entries[:4]] == [e.doc_id for e in shallow.entries]

    def test_params_validation(self):
        with pytest.raises(ValueError):
            Bm25Params(k1=-0.1)
        with pytest.raises(ValueError):
            Bm25Params(b=1.5)
        with pytest.raises(ValueError):
            Bm25Params(serp_depth=0)


def brute_force_scores(docs: list[Document], query: str, params: Bm25Params) -> dict[str, float]:
    """Direct per-document evaluation of the documented formula."""
    token_lists = {d.doc_id: tokenize(d.title + " " + d.body) for d in docs}
    n = len(docs)
    if n == 0:
        return {}
    avgdl = sum(len(t) for t in token_lists.values()) / n
    scores = {}
    for doc in docs:
        tokens = token_lists[doc.doc_id]
        dl = len(tokens)
        score = 0.0
        for term in tokenize(query):
            tf = tokens.count(term)
            if tf == 0:
                continue
            df = sum(1 for other in token_lists.values() if term in other)
            term_idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
            score += term_idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl))
        if score > 0.0:
            scores[doc.doc_id] = score
    return scores


def random_corpus(rng: random.Random) -> list[Document]:
    vocabulary = ["".join(rng.choice(string.ascii_lowercase) for _ in range(3)) for _ in range(30)]
    docs = []
    for i in range(rng.randint(1, 100)):
        body = " ".join(rng.choice(vocabulary) for _ in range(rng.randint(0, 40)))
        title = " ".join(rng.choice(vocabulary) for _ in range(rng.randint(0, 3)))
        docs.append(Document(doc_id=f"doc{i:03d}", title=title, body=body))
    return docs


def test_oracle_equivalence_random_corpora():
    """search() agrees with brute force within 1e-9 and orders identically."""
    rng = random.Random(1234)
    for _ in range(20):
        docs = random_corpus(rng)
        index = build_index(docs)
        params = Bm25Params(serp_depth=100)
        for _ in range(10):
            vocabulary = sorted({t for d in docs for t in tokenize(d.body)} | {"zzz"})
            query = " ".join(rng.choice(vocabulary) for _ in range(rng.randint(1, 3)))
            expected = brute_force_scores(docs, query, params)
            expected_order = sorted(expected.items(), key=lambda kv: (-kv[1], kv[0].encode()))
            serp = search(index, query, params)
            assert [e.doc_id for e in serp.entries] == [doc_id for doc_id, _ in expected_order]
            for entry in serp.entries:
                assert entry.score == pytest.approx(expected[entry.doc_id], abs=1e-9)


class TestSnippet:
    def test_first_matching_sentence(self):
        body = "Nothing here. Coral reefs are colorful! Another sentence."
        assert make_snippet(body, ["coral"]) == "Coral reefs are colorful"

    def test_fallback_to_prefix(self):
        body = "Plain text without the term."
        assert make_snippet(body, ["zzz"]) == body[:160]

    def test_hard_cap(self):
        body = "coral " * 100
        assert len(make_snippet(body, ["coral"])) <= 160

    def test_serp_entries_carry_snippets(self):
        index = build_index([Document(doc_id="d1", body="Filler intro. The reef is alive. Tail.")])
        serp = search(index, "reef")
        assert serp.entries[0].snippet == "The reef is alive"


class TestMock:
    def test_fixed_ranking_and_scores(self):
        config = MockConfig(ranking=tuple(f"m{i}" for i in range(1, 11)))
        serp = mock_search(config, "whatever")
        assert [e.doc_id for e in serp.entries] == [f"m{i}" for i in range(1, 11)]
        assert serp.entries[0].score == 1.0
        assert serp.entries[1].score == 0.5
        assert serp.entries[2].score == pytest.approx(1 / 3)

    def test_per_query_override(self):
        config = MockConfig(ranking=("m1",), per_query={"x": ("m9", "m8")})
        assert [e.doc_id for e in mock_search(config, "x").entries] == ["m9", "m8"]
        assert [e.doc_id for e in mock_search(config, "y").entries] == ["m1"]

    def test_empty_config(self):
        assert mock_search(MockConfig(), "q").entries == ()

    def test_from_params_validation(self):
        with pytest.raises(ValueError):
            MockConfig.from_params({"ranking": "not-a-list"})
        config = MockConfig.from_params({"ranking": ["a"], "per_query": {"q": ["b"]}})
        assert config.per_query["q"] == ("b",)
