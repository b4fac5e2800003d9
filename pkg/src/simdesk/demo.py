"""Embedded desk-scale demo content: dataset, template, reference pipelines.

Everything here is deterministic by construction so the same template and
fixture bundles can be recreated in any store. Topic t1 ("coral reef")
drives the hand-traceable reference session: two single-term queries over
the mock ranking, three snippets each, no clicks, 9 events, 38 simulated
seconds.
"""

from __future__ import annotations

import hashlib
import tempfile
from pathlib import Path
from typing import Optional

from .bundle import BundleMeta, ExperimentBundle, TemplateRef
from .engine import ENGINE_VERSION
from .model import BuiltinSource, ComponentRef, ComponentRole, PipelineGraph, PipelineNode, RegistrySource
from .templates import DatasetFile, TemplateContent, TemplateStore

DEMO_TEMPLATE = "demo"

DEMO_CORPUS = "".join(
    f'{{"doc_id":"m{i}","title":"{title}","body":"{body}"}}\n'
    for i, (title, body) in enumerate(
        [
            ("coral reef fish", "Coral reef fish shelter among the coral. Healthy reef systems teem with fish."),
            ("deep sea mining", "Deep sea mining disturbs the sea floor and its habitats."),
            ("reef conservation", "Conservation programs protect coral reef habitats worldwide."),
            ("ocean currents", "Ocean currents move heat and nutrients around the globe."),
            ("whale migration", "Blue whale migration follows krill blooms across the sea."),
            ("tidal energy", "Tidal energy converts predictable tides into electricity."),
            ("kelp forests", "Kelp forests grow quickly and host many species."),
            ("sea turtles", "Sea turtles return to the beach where they hatched."),
            ("plankton blooms", "Plankton blooms feed fish larvae and whales alike."),
            ("coastal erosion", "Coastal erosion reshapes shorelines over decades."),
        ],
        start=1,
    )
)

DEMO_TOPICS = (
    '{"topic_id":"t1","title":"coral reef","description":""}\n'
    '{"topic_id":"t2","title":"blue whale","description":"the blue sea"}\n'
)

DEMO_QRELS = "t1 0 m1 1\nt1 0 m2 0\nt1 0 m3 2\nt2 0 m5 1\nt2 0 m9 1\n"

MOCK_RANKING = [f"m{i}" for i in range(1, 11)]


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def demo_template_content() -> TemplateContent:
    return TemplateContent(
        name=DEMO_TEMPLATE,
        engine_version=ENGINE_VERSION,
        corpus=DatasetFile(path="corpus.jsonl", sha256=_sha256_text(DEMO_CORPUS)),
        topics=DatasetFile(path="topics.jsonl", sha256=_sha256_text(DEMO_TOPICS)),
        qrels=DatasetFile(path="qrels.txt", sha256=_sha256_text(DEMO_QRELS)),
        backend_type="mock",
        backend_params={"ranking": MOCK_RANKING},
        baselines=(deterministic_pipeline(),),
    )


def write_demo_dataset(dest: Path) -> None:
    dest.mkdir(parents=True, exist_ok=True)
    (dest / "corpus.jsonl").write_text(DEMO_CORPUS, encoding="utf-8")
    (dest / "topics.jsonl").write_text(DEMO_TOPICS, encoding="utf-8")
    (dest / "qrels.txt").write_text(DEMO_QRELS, encoding="utf-8")


def install_demo(template_store: TemplateStore) -> tuple[str, int]:
    """Publish the demo template; repeated calls append new versions."""
    with tempfile.TemporaryDirectory() as tmp:
        write_demo_dataset(Path(tmp))
        return template_store.publish(demo_template_content(), tmp)


def _node(node_id: str, role: ComponentRole, name: str, params: Optional[dict] = None, source=None, external=False) -> PipelineNode:
    return PipelineNode(
        node_id=node_id,
        component=ComponentRef(
            role=role,
            name=name,
            source=source or BuiltinSource(),
            external=external,
            params=params or {},
        ),
    )


FULL_CYCLE_EDGES = (
    ("gen", "backend"),
    ("backend", "snippets"),
    ("snippets", "docs"),
    ("docs", "stop"),
    ("stop", "gen"),
)


def build_pipeline(
    snippet_name: str = "random_attract",
    snippet_params: Optional[dict] = None,
    doc_name: str = "always_relevant",
    doc_params: Optional[dict] = None,
    stop_name: str = "fixed_depth",
    stop_params: Optional[dict] = None,
    stop_source=None,
    stop_external: bool = False,
    backend_name: str = "mock",
    backend_params: Optional[dict] = None,
    generator_name: str = "single_term",
) -> PipelineGraph:
    return PipelineGraph(
        nodes=(
            _node("gen", ComponentRole.QUERY_GENERATOR, generator_name),
            _node("backend", ComponentRole.SEARCH_BACKEND, backend_name, backend_params),
            _node("snippets", ComponentRole.SNIPPET_CLASSIFIER, snippet_name, snippet_params),
            _node("docs", ComponentRole.DOCUMENT_CLASSIFIER, doc_name, doc_params),
            _node("stop", ComponentRole.STOPPING_STRATEGY, stop_name, stop_params, source=stop_source, external=stop_external),
        ),
        edges=FULL_CYCLE_EDGES,
    )


def deterministic_pipeline() -> PipelineGraph:
    """Two queries, three examinations each, no clicks: the 9-event trace."""
    return build_pipeline(snippet_params={"p": 0.0}, stop_params={"k": 3})


def stochastic_pipeline(p: float = 0.5) -> PipelineGraph:
    return build_pipeline(snippet_params={"p": p}, stop_params={"k": 5})


DEMO_META = BundleMeta(created_utc="2026-01-01T00:00:00+00:00", author="demo")


def demo_bundle(
    pipeline: Optional[PipelineGraph] = None,
    master_seed: int = 42,
    repetitions: int = 1,
    template_version: int = 1,
    engine_version: str = ENGINE_VERSION,
) -> ExperimentBundle:
    return ExperimentBundle(
        engine_version=engine_version,
        template_ref=TemplateRef(name=DEMO_TEMPLATE, version=template_version),
        pipeline=pipeline or deterministic_pipeline(),
        master_seed=master_seed,
        repetitions=repetitions,
        meta=DEMO_META,
    )


STOP_AFTER_FIRST_MAIN = """\
import json
import sys

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    request = json.loads(line)
    op = request.get("op")
    if op == "init":
        reply = {"ok": True}
    elif op == "decide":
        state = request.get("state_summary", {})
        done = state.get("snippets_examined_this_serp", 0) >= 1
        reply = {"action": "END" if done else "CONTINUE"}
    else:
        reply = {"error": "unsupported op"}
    sys.stdout.write(json.dumps(reply) + "\\n")
    sys.stdout.flush()
"""

STOP_AFTER_FIRST_MANIFEST = (
    b'{"category":"stopping_strategy","entrypoint":["python3","main.py"],'
    b'"external":false,"name":"stop_after_first"}'
)


def stop_after_first_tree() -> dict[str, bytes]:
    """A registry component that ends the session after the first snippet."""
    return {
        "component.canon.json": STOP_AFTER_FIRST_MANIFEST,
        "main.py": STOP_AFTER_FIRST_MAIN.encode("utf-8"),
    }


def registry_stop_pipeline(commit_id: str) -> PipelineGraph:
    """Deterministic pipeline with the stopping node swapped for a commit ref."""
    return build_pipeline(
        snippet_params={"p": 0.0},
        stop_name="stop_after_first",
        stop_params={},
        stop_source=RegistrySource(commit_id=commit_id, path="component.canon.json"),
    )
