from __future__ import annotations

import hashlib
import json

import pytest

from simdesk.bundle import (
    BundleError,
    ExperimentBundle,
    BundleMeta,
    bundle_from_value,
    bundle_hash,
    diff_bundles,
    export_bundle,
    import_bundle,
    load_bundle,
    validate_bundle,
    validate_bundle_value,
)
from simdesk.canonical import file_sha256
from simdesk.demo import build_pipeline, demo_bundle, stop_after_first_tree
from simdesk.model import SchemaViolation

# Frozen after computing once with the reference SHA-256 oracle (see
# test_golden_hash_matches_independent_oracle below).
GOLDEN_MINIMAL_BUNDLE_HASH = "04c5e8e2d46633e4a06b769fabfd2c2187cfff41458e4a3020be0b8828929011"


class TestHash:
    def test_meta_excluded_from_identity(self):
        a = demo_bundle()
        b = ExperimentBundle(
            engine_version=a.engine_version,
            template_ref=a.template_ref,
            pipeline=a.pipeline,
            master_seed=a.master_seed,
            repetitions=a.repetitions,
            meta=BundleMeta(created_utc="2031-12-31T23:59:59+00:00", author="someone else"),
        )
        assert bundle_hash(a) == bundle_hash(b)

    def test_seed_changes_hash(self):
        assert bundle_hash(demo_bundle(master_seed=7)) != bundle_hash(demo_bundle(master_seed=8))

    def test_golden_fixture_hash(self, fixtures_dir):
        bundle = load_bundle(fixtures_dir / "minimal.bundle.canon.json")
        assert bundle_hash(bundle) == GOLDEN_MINIMAL_BUNDLE_HASH

    def test_golden_hash_matches_independent_oracle(self, fixtures_dir):
        """Strip meta, re-serialize with the stdlib, hash with hashlib."""
        raw = (fixtures_dir / "minimal.bundle.canon.json").read_bytes()
        value = json.loads(raw)
        del value["meta"]
        # For this all-ASCII fixture the stdlib compact sorted form coincides
        # with the canonical encoding, giving an independent byte oracle.
        encoded = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        assert hashlib.sha256(encoded.encode()).hexdigest() == GOLDEN_MINIMAL_BUNDLE_HASH

    def test_every_non_meta_field_is_hash_covered(self):
        base = demo_bundle()
        variants = [
            demo_bundle(master_seed=43),
            demo_bundle(repetitions=2),
            demo_bundle(template_version=2),
            demo_bundle(engine_version="ref/0.2"),
            demo_bundle(pipeline=build_pipeline(snippet_params={"p": 0.25}, stop_params={"k": 3})),
            demo_bundle(pipeline=build_pipeline(snippet_params={"p": 0.0}, stop_params={"k": 4})),
        ]
        hashes = {bundle_hash(base)} | {bundle_hash(v) for v in variants}
        assert len(hashes) == 1 + len(variants)


class TestSerialization:
    def test_round_trip(self):
        bundle = demo_bundle()
        assert bundle_from_value(bundle.to_value()) == bundle

    def test_unknown_key_rejected(self):
        value = demo_bundle().to_value()
        value["surprise"] = 1
        with pytest.raises(SchemaViolation):
            bundle_from_value(value)

    def test_format_version_gate(self):
        value = demo_bundle().to_value()
        value["format_version"] = "2"
        with pytest.raises(SchemaViolation):
            bundle_from_value(value)

    def test_master_seed_range(self):
        value = demo_bundle().to_value()
        value["seeds"]["master"] = -1
        with pytest.raises(SchemaViolation):
            bundle_from_value(value)
        value["seeds"]["master"] = 2**63  # not representable in canonical form
        with pytest.raises(SchemaViolation):
            bundle_from_value(value)

    def test_aux_path_escape_rejected(self):
        value = demo_bundle().to_value()
        value["aux_files"] = [{"kind": "other", "path": "../evil", "sha256": "0" * 64}]
        with pytest.raises(SchemaViolation):
            bundle_from_value(value)

    def test_repetitions_positive(self):
        value = demo_bundle().to_value()
        value["repetitions"] = 0
        with pytest.raises(SchemaViolation):
            bundle_from_value(value)

    def test_run_params_defaults_fill(self):
        value = demo_bundle().to_value()
        del value["run_params"]
        bundle = bundle_from_value(value)
        assert bundle.run_params.budget == 600.0
        assert bundle.run_params.costs.query == 10.0


class TestValidateBundle:
    def test_valid_against_stores(self, workspace):
        report = validate_bundle(demo_bundle(), workspace.templates, workspace.registry)
        assert report.ok

    def test_template_not_found(self, workspace):
        value = demo_bundle().to_value()
        value["template_ref"] = {"name": "ghost", "version": 1}
        bundle = bundle_from_value(value)
        report = validate_bundle(bundle, workspace.templates, workspace.registry)
        assert report.codes() == ["TEMPLATE_NOT_FOUND"]

    def test_engine_mismatch(self, workspace):
        bundle = demo_bundle(engine_version="ref/0.2")
        report = validate_bundle(bundle, workspace.templates, workspace.registry)
        assert report.codes() == ["ENGINE_MISMATCH"]

    def test_commit_not_found(self, workspace):
        from simdesk.demo import registry_stop_pipeline

        bundle = demo_bundle(pipeline=registry_stop_pipeline("ab" * 32))
        report = validate_bundle(bundle, workspace.templates, workspace.registry)
        assert report.codes() == ["COMMIT_NOT_FOUND"]
        assert report.violations[0].node_id == "stop"

    def test_commit_found_after_commit(self, workspace_with_component):
        from simdesk.demo import registry_stop_pipeline

        workspace, commit = workspace_with_component
        bundle = demo_bundle(pipeline=registry_stop_pipeline(commit.commit_id))
        report = validate_bundle(bundle, workspace.templates, workspace.registry)
        assert report.ok

    def test_referenced_path_missing_from_tree(self, workspace):
        from simdesk.demo import build_pipeline
        from simdesk.model import RegistrySource

        tree = stop_after_first_tree()
        commit = workspace.registry.commit_component("demo", "stop_after_first", tree, "demo", "v1")
        pipeline = build_pipeline(
            snippet_params={"p": 0.0},
            stop_name="stop_after_first",
            stop_params={},
            stop_source=RegistrySource(commit_id=commit.commit_id, path="nested/component.canon.json"),
        )
        report = validate_bundle(demo_bundle(pipeline=pipeline), workspace.templates, workspace.registry)
        assert report.codes() == ["UNKNOWN_COMPONENT"]

    def test_category_must_match_role(self, workspace):
        from simdesk.model import ComponentRef, ComponentRole, PipelineGraph, PipelineNode, RegistrySource

        commit = workspace.registry.commit_component(
            "demo", "stop_after_first", stop_after_first_tree(), "demo", "v1"
        )
        base = demo_bundle().pipeline
        nodes = []
        for node in base.nodes:
            if node.node_id == "snippets":
                node = PipelineNode(
                    node_id="snippets",
                    component=ComponentRef(
                        role=ComponentRole.SNIPPET_CLASSIFIER,
                        name="stop_after_first",
                        source=RegistrySource(commit_id=commit.commit_id, path="component.canon.json"),
                    ),
                )
            nodes.append(node)
        bundle = demo_bundle(pipeline=PipelineGraph(nodes=tuple(nodes), edges=base.edges))
        report = validate_bundle(bundle, workspace.templates, workspace.registry)
        assert "UNKNOWN_COMPONENT" in report.codes()

    def test_short_commit_id_is_schema_violation(self, workspace, fixtures_dir):
        from simdesk.canonical import read_canonical_file

        value = read_canonical_file(fixtures_dir / "bad_commit_id.canon.json")
        bundle, report = validate_bundle_value(value, workspace.templates, workspace.registry)
        assert bundle is None
        assert report.codes() == ["SCHEMA_VIOLATION"]


class TestDiff:
    def test_identity(self):
        assert diff_bundles(demo_bundle(), demo_bundle()).is_empty()

    def test_single_param_change(self):
        a = demo_bundle()
        b = demo_bundle(pipeline=build_pipeline(snippet_params={"p": 0.0}, stop_params={"k": 5}))
        diff = diff_bundles(a, b)
        assert diff.param_changed == ({"node_id": "stop", "key": "k", "old": 3, "new": 5},)
        assert not diff.component_changed
        assert not diff.structure_changed

    def test_component_change(self):
        a = demo_bundle()
        b = demo_bundle(pipeline=build_pipeline(snippet_params={"p": 0.0}, stop_name="frustration", stop_params={"n": 3}))
        diff = diff_bundles(a, b)
        assert len(diff.component_changed) == 1
        assert diff.component_changed[0]["node_id"] == "stop"

    def test_node_rename_is_structure_change(self):
        a = demo_bundle()
        value = demo_bundle().to_value()
        value["pipeline"]["nodes"][4]["node_id"] = "stopper"
        value["pipeline"]["edges"][3]["to"] = "stopper"
        value["pipeline"]["edges"][4]["from"] = "stopper"
        b = bundle_from_value(value)
        diff = diff_bundles(a, b)
        assert diff.structure_changed
        assert not diff.param_changed and not diff.component_changed

    def test_seed_and_template_changes(self):
        a = demo_bundle()
        b = demo_bundle(master_seed=77, template_version=2)
        diff = diff_bundles(a, b)
        assert diff.seed_changed == {"old": 42, "new": 77}
        assert diff.template_changed == {"old": {"name": "demo", "version": 1}, "new": {"name": "demo", "version": 2}}

    def test_empty_iff_hash_equal(self):
        variants = [
            demo_bundle(),
            demo_bundle(master_seed=43),
            demo_bundle(repetitions=3),
            demo_bundle(engine_version="ref/0.2"),
            demo_bundle(template_version=2),
            demo_bundle(pipeline=build_pipeline(snippet_params={"p": 0.5}, stop_params={"k": 3})),
        ]
        for a in variants:
            for b in variants:
                empty = diff_bundles(a, b).is_empty()
                assert empty == (bundle_hash(a) == bundle_hash(b))

    def test_meta_difference_is_not_a_diff(self):
        a = demo_bundle()
        value = demo_bundle().to_value()
        value["meta"]["author"] = "else"
        b = bundle_from_value(value)
        assert diff_bundles(a, b).is_empty()


class TestExportImport:
    def test_round_trip_preserves_hash(self, tmp_path):
        bundle = demo_bundle()
        export_bundle(bundle, tmp_path / "export")
        imported = import_bundle(tmp_path / "export")
        assert bundle_hash(imported) == bundle_hash(bundle)
        assert imported == bundle

    def test_no_aux_manifest_lists_bundle_only(self, tmp_path):
        manifest = export_bundle(demo_bundle(), tmp_path / "export")
        assert list(manifest["files"]) == ["bundle.canon.json"]

    def test_aux_files_copied_and_verified(self, tmp_path):
        aux_root = tmp_path / "aux_src"
        aux_root.mkdir()
        payload = aux_root / "notes.txt"
        payload.write_text("aux payload\n")
        value = demo_bundle().to_value()
        value["aux_files"] = [{"kind": "other", "path": "notes.txt", "sha256": file_sha256(payload)}]
        bundle = bundle_from_value(value)
        manifest = export_bundle(bundle, tmp_path / "export", aux_root=aux_root)
        assert "aux/notes.txt" in manifest["files"]
        assert import_bundle(tmp_path / "export") == bundle

    def test_tampered_aux_file_fails_import(self, tmp_path):
        aux_root = tmp_path / "aux_src"
        aux_root.mkdir()
        payload = aux_root / "notes.txt"
        payload.write_text("aux payload\n")
        value = demo_bundle().to_value()
        value["aux_files"] = [{"kind": "other", "path": "notes.txt", "sha256": file_sha256(payload)}]
        bundle = bundle_from_value(value)
        export_bundle(bundle, tmp_path / "export", aux_root=aux_root)
        target = tmp_path / "export" / "aux" / "notes.txt"
        data = bytearray(target.read_bytes())
        data[0] ^= 0xFF
        target.write_bytes(bytes(data))
        with pytest.raises(BundleError) as err:
            import_bundle(tmp_path / "export")
        assert err.value.code == "HASH_MISMATCH"
        assert err.value.path == "aux/notes.txt"

    def test_missing_aux_source(self, tmp_path):
        value = demo_bundle().to_value()
        value["aux_files"] = [{"kind": "other", "path": "gone.txt", "sha256": "0" * 64}]
        bundle = bundle_from_value(value)
        with pytest.raises(BundleError) as err:
            export_bundle(bundle, tmp_path / "export", aux_root=tmp_path)
        assert err.value.code == "MISSING_FILE"

    def test_run_outputs_attached(self, tmp_path):
        outputs = tmp_path / "outputs_src"
        outputs.mkdir()
        (outputs / "trace.u0.jsonl").write_text("{}\n")
        manifest = export_bundle(demo_bundle(), tmp_path / "export", run_outputs=outputs)
        assert "outputs/trace.u0.jsonl" in manifest["files"]

    def test_missing_listed_file(self, tmp_path):
        export_bundle(demo_bundle(), tmp_path / "export", run_outputs=None)
        # Manually list a file that does not exist.
        from simdesk.canonical import read_canonical_file, write_canonical_file

        manifest_path = tmp_path / "export" / "MANIFEST.canon.json"
        manifest = read_canonical_file(manifest_path)
        manifest["files"]["outputs/ghost.jsonl"] = "0" * 64
        write_canonical_file(manifest_path, manifest)
        with pytest.raises(BundleError) as err:
            import_bundle(tmp_path / "export")
        assert err.value.code == "MISSING_FILE"
