from __future__ import annotations

import pytest

from simdesk.backend import SerpEntry
from simdesk.builtins import (
    RandomAttract,
    RankBiased,
    SingleTermGenerator,
    TitlePairsGenerator,
    load_stopwords,
)
from simdesk.datasets import Qrels, Topic
from simdesk.demo import build_pipeline, deterministic_pipeline, stochastic_pipeline
from simdesk.engine import (
    Action,
    EngineError,
    Environment,
    TimeCosts,
    compute_session_measures,
    decode_trace,
    encode_trace,
    run_session,
)
from simdesk.rng import RngStream

ENGINE_VERSION = "ref/0.1"


def make_env(topics=None, ranking=None, qrels=None) -> Environment:
    return Environment(
        name="test",
        version=1,
        engine_version=ENGINE_VERSION,
        topics=topics or [Topic(topic_id="t1", title="coral reef", description="")],
        qrels=qrels,
        backend_type="mock",
        backend_params={"ranking": ranking if ranking is not None else [f"m{i}" for i in range(1, 11)]},
    )


def actions(trace):
    return [e.action for e in trace]


class TestHandTrace:
    def test_nine_event_reference_session(self):
        """Two queries, fixed_depth 3, no clicks: Q,S,S,S,Q,S,S,S,END."""
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42)
        assert len(trace) == 9
        assert actions(trace) == [
            Action.QUERY_ISSUED,
            Action.SNIPPET_EXAMINED,
            Action.SNIPPET_EXAMINED,
            Action.SNIPPET_EXAMINED,
            Action.QUERY_ISSUED,
            Action.SNIPPET_EXAMINED,
            Action.SNIPPET_EXAMINED,
            Action.SNIPPET_EXAMINED,
            Action.SESSION_END,
        ]
        assert trace[-1].payload == {"reason": "EXHAUSTED"}
        assert trace[0].payload == {"query": "coral"}
        assert trace[4].payload == {"query": "reef"}

    def test_cost_accumulation(self):
        """query=10, snippet=3 over 2 queries and 6 snippets: 38.0 total."""
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42)
        assert trace[-1].sim_time == 38.0
        assert [e.sim_time for e in trace[:4]] == [10.0, 13.0, 16.0, 19.0]

    def test_total_marks_one_stops_at_first_mark(self):
        pipeline = build_pipeline(
            snippet_params={"p": 1.0},
            stop_name="total_marks",
            stop_params={"m": 1},
        )
        trace = run_session(pipeline, make_env(), 0, 42)
        assert actions(trace) == [
            Action.QUERY_ISSUED,
            Action.SNIPPET_EXAMINED,
            Action.DOC_CLICKED,
            Action.DOC_JUDGED,
            Action.DOC_MARKED_RELEVANT,
            Action.SESSION_END,
        ]
        assert trace[-1].payload == {"reason": "STOPPED"}
        assert trace[4].payload["rank"] == 1
        # 10 + 3 + 20 + 5 simulated seconds.
        assert trace[-1].sim_time == 38.0

    def test_budget_ends_session(self):
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42, budget=5.0)
        assert actions(trace) == [Action.QUERY_ISSUED, Action.SESSION_END]
        assert trace[-1].payload == {"reason": "BUDGET"}

    def test_budget_is_strict_inequality(self):
        # Exactly on budget does not end the session.
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42, budget=38.0)
        assert trace[-1].payload == {"reason": "EXHAUSTED"}

    def test_immediate_exhaustion_single_event(self):
        env = make_env(topics=[Topic(topic_id="t0", title="a", description="")])
        trace = run_session(deterministic_pipeline(), env, 0, 42)
        assert len(trace) == 1
        assert trace[0].action is Action.SESSION_END
        assert trace[0].payload == {"reason": "EXHAUSTED"}
        assert trace[0].seq == 1

    def test_empty_serp_advances_to_next_query(self):
        env = make_env(ranking=[])
        trace = run_session(deterministic_pipeline(), env, 0, 42)
        assert actions(trace) == [Action.QUERY_ISSUED, Action.QUERY_ISSUED, Action.SESSION_END]


class TestGenerators:
    def test_single_term_frequency_then_lexicographic(self):
        topic = Topic(topic_id="t", title="blue whale", description="the blue sea")
        gen = SingleTermGenerator(topic)
        assert [gen.next_query(None) for _ in range(4)] == ["blue", "sea", "whale", None]

    def test_single_term_all_stopwords_exhausts_immediately(self):
        topic = Topic(topic_id="t", title="the a an", description="")
        assert SingleTermGenerator(topic).next_query(None) is None

    def test_title_pairs(self):
        topic = Topic(topic_id="t", title="x y", description="ignored here")
        gen = TitlePairsGenerator(topic)
        assert [gen.next_query(None) for _ in range(4)] == ["x", "y", "x y", None]

    def test_title_pairs_three_terms(self):
        gen = TitlePairsGenerator(Topic(topic_id="t", title="a1 b2 c3", description=""))
        out = [gen.next_query(None) for _ in range(7)]
        assert out == ["a1", "b2", "c3", "a1 b2", "a1 c3", "b2 c3", None]

    def test_stopword_list_has_fifty_entries(self):
        assert len(load_stopwords()) == 50


class TestClassifiers:
    def test_random_attract_boundaries(self):
        always = RandomAttract(1.0)
        never = RandomAttract(0.0)
        entry = SerpEntry(rank=1, doc_id="d", score=1.0, snippet="")
        stream = RngStream(5, "t")
        for _ in range(100):
            rand = stream.next_float()
            assert always.classify_snippet(entry, rand) is True
            assert never.classify_snippet(entry, rand) is False

    def test_rank_biased_probability(self):
        clf = RankBiased(0.5)
        entry_r3 = SerpEntry(rank=3, doc_id="d", score=1.0, snippet="")
        assert clf.classify_snippet(entry_r3, 0.24) is True
        assert clf.classify_snippet(entry_r3, 0.26) is False

    def test_p_one_clicks_every_snippet(self):
        pipeline = build_pipeline(snippet_params={"p": 1.0}, stop_params={"k": 3})
        trace = run_session(pipeline, make_env(), 0, 42)
        snippets = sum(1 for e in trace if e.action is Action.SNIPPET_EXAMINED)
        clicks = sum(1 for e in trace if e.action is Action.DOC_CLICKED)
        assert snippets == clicks > 0

    def test_p_zero_never_clicks(self):
        trace = run_session(stochastic_pipeline(p=0.0), make_env(), 0, 42)
        assert not any(e.action is Action.DOC_CLICKED for e in trace)

    def test_qrel_informed_requires_qrels(self):
        pipeline = build_pipeline(snippet_name="qrel_informed", stop_params={"k": 3})
        with pytest.raises(EngineError) as err:
            run_session(pipeline, make_env(), 0, 42)
        assert err.value.code == "MISSING_QRELS"

    def test_qrel_informed_uses_grades(self):
        qrels = Qrels()
        qrels.add("t1", "m1", 1)
        pipeline = build_pipeline(
            snippet_name="qrel_informed",
            snippet_params={"p_rel": 1.0, "p_nonrel": 0.0},
            stop_params={"k": 3},
        )
        trace = run_session(pipeline, make_env(qrels=qrels), 0, 42)
        clicked = [e.payload["doc_id"] for e in trace if e.action is Action.DOC_CLICKED]
        assert clicked == ["m1", "m1"]  # once per query, only the relevant doc


class ScriptedSnippets:
    def __init__(self, pattern):
        self.pattern = list(pattern)
        self.pos = 0

    def classify_snippet(self, entry, rand):
        verdict = self.pattern[self.pos % len(self.pattern)]
        self.pos += 1
        return verdict


class TestStopping:
    def test_fixed_depth_three_examinations_per_query(self):
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42)
        per_query = []
        count = 0
        for event in trace:
            if event.action is Action.QUERY_ISSUED:
                if count:
                    per_query.append(count)
                count = 0
            elif event.action is Action.SNIPPET_EXAMINED:
                count += 1
        per_query.append(count)
        assert per_query == [3, 3]

    def test_frustration_counter_resets_on_click(self):
        """Pattern (no, yes, no, no) with n=2 advances after the 4th snippet."""
        from simdesk.builtins import default_component_factory

        def factory(node, environment, topic):
            if node.node_id == "snippets":
                return ScriptedSnippets([False, True, False, False])
            return default_component_factory(node, environment, topic)

        pipeline = build_pipeline(stop_name="frustration", stop_params={"n": 2})
        trace = run_session(pipeline, make_env(), 0, 42, component_factory=factory)
        first_query_snippets = 0
        for event in trace[1:]:
            if event.action is Action.QUERY_ISSUED:
                break
            if event.action is Action.SNIPPET_EXAMINED:
                first_query_snippets += 1
        assert first_query_snippets == 4

    def test_combined_end_beats_next_query(self):
        pipeline = build_pipeline(
            snippet_params={"p": 1.0},
            stop_name="combined",
            stop_params={"k": 1, "m": 1},
        )
        trace = run_session(pipeline, make_env(), 0, 42)
        assert trace[-1].payload == {"reason": "STOPPED"}

    def test_mark_deduplication_across_queries(self):
        # The same doc marked in both queries counts once toward total_marks.
        pipeline = build_pipeline(
            snippet_params={"p": 1.0},
            stop_name="combined",
            stop_params={"k": 1, "m": 2},
        )
        trace = run_session(pipeline, make_env(ranking=["m1"]), 0, 42)
        assert trace[-1].payload == {"reason": "EXHAUSTED"}
        marks = [e for e in trace if e.action is Action.DOC_MARKED_RELEVANT]
        assert len(marks) == 2
        assert compute_session_measures(trace)["docs_marked"] == 1


class TestDeterminism:
    def test_trace_is_pure_function(self):
        a = run_session(stochastic_pipeline(), make_env(), 0, 7)
        b = run_session(stochastic_pipeline(), make_env(), 0, 7)
        assert encode_trace(a) == encode_trace(b)

    def test_seed_changes_stochastic_outcomes(self):
        a = run_session(stochastic_pipeline(), make_env(), 0, 7)
        b = run_session(stochastic_pipeline(), make_env(), 0, 8)
        assert encode_trace(a) != encode_trace(b)

    def test_deterministic_pipeline_is_seed_invariant(self):
        a = run_session(deterministic_pipeline(), make_env(), 0, 7)
        b = run_session(deterministic_pipeline(), make_env(), 0, 8)
        assert encode_trace(a) == encode_trace(b)

    def test_user_index_selects_topic_round_robin(self):
        env = make_env(
            topics=[
                Topic(topic_id="t1", title="coral reef", description=""),
                Topic(topic_id="t2", title="blue whale", description=""),
            ]
        )
        t0 = run_session(deterministic_pipeline(), env, 0, 7)
        t1 = run_session(deterministic_pipeline(), env, 1, 7)
        t2 = run_session(deterministic_pipeline(), env, 2, 7)
        assert t0[0].topic_id == "t1"
        assert t1[0].topic_id == "t2"
        assert t2[0].topic_id == "t1"

    def test_document_stream_follows_named_stream(self):
        """The k-th judgment consumes the k-th draw of u{user}/{doc node id}."""
        pipeline = build_pipeline(
            snippet_params={"p": 1.0},
            doc_name="qrel_accuracy",
            doc_params={"p_tp": 0.5, "p_fp": 0.5},
            stop_params={"k": 5},
        )
        qrels = Qrels()
        trace = run_session(pipeline, make_env(qrels=qrels), 3, 99)
        judged = [e.payload["relevant"] for e in trace if e.action is Action.DOC_JUDGED]
        stream = RngStream(99, "u3/docs")
        expected = [stream.next_float() < 0.5 for _ in judged]
        assert judged == expected

    def test_snippet_stream_unaffected_by_document_component(self):
        """Swapping the document classifier never shifts snippet decisions."""
        env = make_env()
        a = run_session(stochastic_pipeline(), env, 0, 31)
        pipeline_b = build_pipeline(
            snippet_params={"p": 0.5},
            doc_name="qrel_accuracy",
            doc_params={"p_tp": 0.5, "p_fp": 0.5},
            stop_params={"k": 5},
        )
        qrels = Qrels()
        b = run_session(pipeline_b, make_env(qrels=qrels), 0, 31)
        clicks_a = [(e.payload["rank"], e.payload["doc_id"]) for e in a if e.action is Action.DOC_CLICKED]
        clicks_b = [(e.payload["rank"], e.payload["doc_id"]) for e in b if e.action is Action.DOC_CLICKED]
        assert clicks_a == clicks_b


class TestTraceWellFormedness:
    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_invariants(self, seed):
        pipeline = build_pipeline(
            snippet_params={"p": 0.5},
            doc_name="qrel_accuracy",
            doc_params={"p_tp": 0.7, "p_fp": 0.3},
            stop_name="combined",
            stop_params={"k": 5, "m": 2},
        )
        qrels = Qrels()
        qrels.add("t1", "m1", 1)
        qrels.add("t1", "m3", 1)
        trace = run_session(pipeline, make_env(qrels=qrels), 0, seed)
        assert [e.seq for e in trace] == list(range(1, len(trace) + 1))
        assert trace[0].action in (Action.QUERY_ISSUED, Action.SESSION_END)
        assert trace[-1].action is Action.SESSION_END
        assert trace[-1].payload["reason"] in ("EXHAUSTED", "STOPPED", "BUDGET")
        times = [e.sim_time for e in trace]
        assert times == sorted(times)
        measures = compute_session_measures(trace)
        assert measures["clicks"] <= measures["snippets_examined"]
        assert measures["docs_marked"] <= measures["clicks"]
        judged = sum(1 for e in trace if e.action is Action.DOC_JUDGED)
        assert judged == measures["clicks"]

    def test_encode_decode_round_trip(self):
        trace = run_session(stochastic_pipeline(), make_env(), 0, 11)
        assert decode_trace(encode_trace(trace)) == trace


class TestMeasures:
    def test_reference_session_counts(self):
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42)
        measures = compute_session_measures(trace)
        assert measures == {
            "queries_issued": 2,
            "snippets_examined": 6,
            "clicks": 0,
            "docs_marked": 0,
            "session_sim_time": 38.0,
        }

    def test_marked_precision_zero_when_nothing_marked(self):
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42)
        assert compute_session_measures(trace, Qrels())["marked_precision"] == 0.0

    def test_marked_precision_one_when_all_relevant(self):
        qrels = Qrels()
        for i in range(1, 11):
            qrels.add("t1", f"m{i}", 1)
        pipeline = build_pipeline(snippet_params={"p": 1.0}, stop_params={"k": 2})
        trace = run_session(pipeline, make_env(qrels=qrels), 0, 42)
        measures = compute_session_measures(trace, qrels)
        assert measures["docs_marked"] > 0
        assert measures["marked_precision"] == 1.0

    def test_marked_precision_omitted_without_qrels(self):
        trace = run_session(deterministic_pipeline(), make_env(), 0, 42)
        assert "marked_precision" not in compute_session_measures(trace)


class TestTimeCosts:
    def test_from_value(self):
        costs = TimeCosts.from_value({"query": 1, "snippet": 2.5})
        assert costs == TimeCosts(query=1.0, snippet=2.5, doc=20.0, mark=5.0)

    def test_rejects_unknown_and_negative(self):
        with pytest.raises(ValueError):
            TimeCosts.from_value({"bogus": 1})
        with pytest.raises(ValueError):
            TimeCosts.from_value({"query": -1})
