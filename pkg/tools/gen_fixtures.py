"""Regenerate the shipped fixture files under fixtures/.

Run from the repo root: python tools/gen_fixtures.py
The test suite freezes the resulting bundle hashes; regenerate only when
the fixture content is meant to change.
"""

from __future__ import annotations

import sys
from pathlib import Path

from simdesk.canonical import canonicalize
from simdesk.demo import (
    FULL_CYCLE_EDGES,
    build_pipeline,
    demo_bundle,
    stochastic_pipeline,
    stop_after_first_tree,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def write(name: str, value) -> None:
    path = FIXTURES / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(canonicalize(value) + b"\n")
    print(f"wrote {path}")


def node_value(node_id, role, name, params=None, source=None, external=False):
    return {
        "node_id": node_id,
        "component": {
            "role": role,
            "name": name,
            "source": source or {"type": "builtin"},
            "external": external,
            "params": params or {},
        },
    }


def default_nodes():
    return [
        node_value("gen", "query_generator", "single_term"),
        node_value("backend", "search_backend", "mock"),
        node_value("snippets", "snippet_classifier", "random_attract", {"p": 0.0}),
        node_value("docs", "document_classifier", "always_relevant"),
        node_value("stop", "stopping_strategy", "fixed_depth", {"k": 3}),
    ]


def edges_value(pairs):
    return [{"from": a, "to": b} for a, b in pairs]


def bundle_value(nodes=None, edges=None, engine_version="ref/0.1", template=("demo", 1), seed=42):
    return {
        "format_version": "1",
        "engine_version": engine_version,
        "template_ref": {"name": template[0], "version": template[1]},
        "pipeline": {
            "nodes": nodes if nodes is not None else default_nodes(),
            "edges": edges if edges is not None else edges_value(FULL_CYCLE_EDGES),
        },
        "seeds": {"master": seed},
        "repetitions": 1,
        "run_params": {
            "costs": {"query": 10.0, "snippet": 3.0, "doc": 20.0, "mark": 5.0},
            "budget": 600.0,
        },
        "aux_files": [],
        "meta": {"created_utc": "2026-01-01T00:00:00+00:00", "author": "demo"},
    }


def main() -> int:
    write("minimal.bundle.canon.json", demo_bundle().to_value())
    write("stochastic.bundle.canon.json", demo_bundle(pipeline=stochastic_pipeline()).to_value())
    write(
        "external.bundle.canon.json",
        demo_bundle(pipeline=build_pipeline(snippet_params={"p": 0.0}, stop_params={"k": 3}, stop_external=True)).to_value(),
    )

    # Ten invalid bundles, one designated violation code each.
    nodes = default_nodes()
    write(
        "missing_role.canon.json",
        bundle_value(nodes=nodes[:4], edges=edges_value(FULL_CYCLE_EDGES[:3])),
    )
    write(
        "duplicate_role.canon.json",
        bundle_value(
            nodes=default_nodes() + [node_value("stop2", "stopping_strategy", "fixed_depth", {"k": 3})],
            edges=edges_value(FULL_CYCLE_EDGES + (("docs", "stop2"),)),
        ),
    )
    write(
        "bad_edge.canon.json",
        bundle_value(edges=edges_value(FULL_CYCLE_EDGES + (("backend", "stop"),))),
    )
    bad_name = default_nodes()
    bad_name[2] = node_value("snippets", "snippet_classifier", "does_not_exist")
    write("unknown_component.canon.json", bundle_value(nodes=bad_name))
    bad_param = default_nodes()
    bad_param[4] = node_value("stop", "stopping_strategy", "fixed_depth", {"k": 0})
    write("param_invalid.canon.json", bundle_value(nodes=bad_param))
    write("disconnected.canon.json", bundle_value(edges=[]))
    write("template_not_found.canon.json", bundle_value(template=("ghost", 1)))
    registry_nodes = default_nodes()
    registry_nodes[4] = node_value(
        "stop",
        "stopping_strategy",
        "stop_after_first",
        {},
        source={"type": "registry", "commit_id": "ab" * 32, "path": "component.canon.json"},
    )
    write("commit_not_found.canon.json", bundle_value(nodes=registry_nodes))
    write("engine_mismatch.canon.json", bundle_value(engine_version="ref/0.2"))
    short_id_nodes = default_nodes()
    short_id_nodes[4] = node_value(
        "stop",
        "stopping_strategy",
        "stop_after_first",
        {},
        source={"type": "registry", "commit_id": "a" * 63, "path": "component.canon.json"},
    )
    write("bad_commit_id.canon.json", bundle_value(nodes=short_id_nodes))

    component_dir = FIXTURES / "components" / "stop_after_first"
    component_dir.mkdir(parents=True, exist_ok=True)
    for rel, data in stop_after_first_tree().items():
        (component_dir / rel).write_bytes(data)
        print(f"wrote {component_dir / rel}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
