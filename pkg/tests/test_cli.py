from __future__ import annotations

import pytest

from simdesk.canonical import parse_canonical
from simdesk.cli import main

INVALID_FIXTURES = {
    "missing_role.canon.json": "MISSING_ROLE",
    "duplicate_role.canon.json": "DUPLICATE_ROLE",
    "bad_edge.canon.json": "BAD_EDGE",
    "unknown_component.canon.json": "UNKNOWN_COMPONENT",
    "param_invalid.canon.json": "PARAM_INVALID",
    "disconnected.canon.json": "DISCONNECTED",
    "template_not_found.canon.json": "TEMPLATE_NOT_FOUND",
    "commit_not_found.canon.json": "COMMIT_NOT_FOUND",
    "engine_mismatch.canon.json": "ENGINE_MISMATCH",
    "bad_commit_id.canon.json": "SCHEMA_VIOLATION",
}


@pytest.fixture()
def store_root(tmp_path):
    root = tmp_path / "store"
    assert main(["--store-root", str(root), "init-demo"]) == 0
    return root


def run_cli(store_root, *argv: str, porcelain: bool = False) -> int:
    base = ["--store-root", str(store_root)]
    if porcelain:
        base.append("--porcelain")
    return main(base + list(argv))


class TestValidate:
    def test_valid_fixture_exits_zero(self, store_root, fixtures_dir, capsys):
        assert run_cli(store_root, "validate", str(fixtures_dir / "minimal.bundle.canon.json")) == 0
        out = capsys.readouterr().out
        assert "ok" in out

    @pytest.mark.parametrize("fixture,code", sorted(INVALID_FIXTURES.items()))
    def test_invalid_fixtures_exit_two_with_code(self, store_root, fixtures_dir, capsys, fixture, code):
        assert run_cli(store_root, "validate", str(fixtures_dir / fixture)) == 2
        err = capsys.readouterr().err
        assert code in err

    def test_porcelain_report_parses(self, store_root, fixtures_dir, capsys):
        assert run_cli(store_root, "validate", str(fixtures_dir / "missing_role.canon.json"), porcelain=True) == 2
        report = parse_canonical(capsys.readouterr().out.strip())
        assert report["ok"] is False
        assert report["violations"][0]["code"] == "MISSING_ROLE"

    def test_missing_file_exits_four(self, store_root, capsys):
        assert run_cli(store_root, "validate", "no/such/file.json") == 4


class TestRunAndReplay:
    def test_run_then_replay_check_passes(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "minimal.bundle.canon.json")
        out1 = tmp_path / "runs" / "first"
        assert run_cli(store_root, "run", bundle, "--out", str(out1)) == 0
        assert (out1 / "outputs" / "trace.u0.jsonl").is_file()
        assert (out1 / "MANIFEST.canon.json").is_file()
        capsys.readouterr()

        out2 = tmp_path / "runs" / "second"
        assert run_cli(store_root, "run", bundle, "--out", str(out2)) == 0
        capsys.readouterr()
        assert (
            run_cli(store_root, "replay-check", bundle, str(out1 / "MANIFEST.canon.json")) == 0
        )
        assert "PASS" in capsys.readouterr().out

    def test_replay_check_fails_on_other_seed(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "stochastic.bundle.canon.json")
        out = tmp_path / "seeded"
        assert run_cli(store_root, "run", bundle, "--out", str(out), "--seed", "7") == 0
        capsys.readouterr()
        code = run_cli(store_root, "replay-check", bundle, str(out / "MANIFEST.canon.json"))
        assert code == 3
        assert "FAIL" in capsys.readouterr().out

    def test_replay_check_scope_limited(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "external.bundle.canon.json")
        manifest = tmp_path / "manifest.canon.json"
        manifest.write_text('{"trace_hashes":[]}')
        assert run_cli(store_root, "replay-check", bundle, str(manifest)) == 0
        assert "SCOPE_LIMITED" in capsys.readouterr().out

    def test_seed_override_changes_effective_hash(self, store_root, fixtures_dir, tmp_path, capsys):
        from simdesk.bundle import bundle_hash, load_bundle

        bundle_path = fixtures_dir / "minimal.bundle.canon.json"
        default_hash = bundle_hash(load_bundle(bundle_path))
        out = tmp_path / "seeded-run"
        assert run_cli(store_root, "run", str(bundle_path), "--out", str(out), "--seed", "99", porcelain=True) == 0
        result = parse_canonical(capsys.readouterr().out.strip())
        assert result["bundle_hash"] != default_hash
        assert result["status"] == "COMPLETED"
        expected = bundle_hash(load_bundle(bundle_path).with_master_seed(99))
        assert result["bundle_hash"] == expected

    def test_run_failure_exits_three(self, store_root, fixtures_dir, tmp_path, capsys):
        # Validation failures surface as FAILED runs through `run`.
        bundle = str(fixtures_dir / "engine_mismatch.canon.json")
        assert run_cli(store_root, "run", bundle, "--out", str(tmp_path / "x")) == 3


class TestDiff:
    def test_identical_bundles(self, store_root, fixtures_dir, capsys):
        a = str(fixtures_dir / "minimal.bundle.canon.json")
        assert run_cli(store_root, "diff", a, a) == 0
        assert "identical" in capsys.readouterr().out

    def test_param_change_reported(self, store_root, fixtures_dir, tmp_path, capsys):
        from simdesk.canonical import read_canonical_file, write_canonical_file

        value = read_canonical_file(fixtures_dir / "minimal.bundle.canon.json")
        value["pipeline"]["nodes"][4]["component"]["params"]["k"] = 5
        other = tmp_path / "changed.canon.json"
        write_canonical_file(other, value)
        a = str(fixtures_dir / "minimal.bundle.canon.json")
        assert run_cli(store_root, "diff", a, str(other)) == 0
        assert "stop.k" in capsys.readouterr().out
        assert run_cli(store_root, "diff", a, str(other), "--exit-code") == 2

    def test_porcelain_diff(self, store_root, fixtures_dir, capsys):
        a = str(fixtures_dir / "minimal.bundle.canon.json")
        b = str(fixtures_dir / "stochastic.bundle.canon.json")
        assert run_cli(store_root, "diff", a, b, porcelain=True) == 0
        diff = parse_canonical(capsys.readouterr().out.strip())
        assert diff["empty"] is False


class TestExportImport:
    def test_round_trip(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "minimal.bundle.canon.json")
        dest = tmp_path / "export"
        assert run_cli(store_root, "export", bundle, "--out", str(dest)) == 0
        capsys.readouterr()
        assert run_cli(store_root, "import", str(dest), porcelain=True) == 0
        imported = parse_canonical(capsys.readouterr().out.strip())
        from simdesk.bundle import bundle_hash, load_bundle

        assert imported["bundle_hash"] == bundle_hash(load_bundle(bundle))

    def test_tampered_import_fails(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "minimal.bundle.canon.json")
        dest = tmp_path / "export"
        run_cli(store_root, "export", bundle, "--out", str(dest))
        target = dest / "bundle.canon.json"
        target.write_bytes(target.read_bytes().replace(b'"master":42', b'"master":43'))
        assert run_cli(store_root, "import", str(dest)) == 2

    def test_export_with_run_outputs(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "minimal.bundle.canon.json")
        run_dir = tmp_path / "run1"
        run_cli(store_root, "run", bundle, "--out", str(run_dir))
        capsys.readouterr()
        dest = tmp_path / "export"
        assert (
            run_cli(
                store_root,
                "export",
                bundle,
                "--out",
                str(dest),
                "--run-outputs",
                str(run_dir / "outputs"),
                porcelain=True,
            )
            == 0
        )
        manifest = parse_canonical(capsys.readouterr().out.strip())
        assert "outputs/trace.u0.jsonl" in manifest["files"]


class TestMeasures:
    def test_measures_from_trace(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "minimal.bundle.canon.json")
        run_dir = tmp_path / "run1"
        run_cli(store_root, "run", bundle, "--out", str(run_dir))
        capsys.readouterr()
        trace = run_dir / "outputs" / "trace.u0.jsonl"
        assert run_cli(store_root, "measures", str(trace), porcelain=True) == 0
        measures = parse_canonical(capsys.readouterr().out.strip())
        assert measures["queries_issued"] == 2
        assert measures["snippets_examined"] == 6
        assert "marked_precision" not in measures

    def test_measures_with_qrels(self, store_root, fixtures_dir, tmp_path, capsys):
        bundle = str(fixtures_dir / "minimal.bundle.canon.json")
        run_dir = tmp_path / "run1"
        run_cli(store_root, "run", bundle, "--out", str(run_dir))
        capsys.readouterr()
        qrels = tmp_path / "qrels.txt"
        qrels.write_text("t1 0 m1 1\n")
        trace = run_dir / "outputs" / "trace.u0.jsonl"
        assert run_cli(store_root, "measures", str(trace), "--qrels", str(qrels), porcelain=True) == 0
        measures = parse_canonical(capsys.readouterr().out.strip())
        assert measures["marked_precision"] == 0.0


class TestTemplateCommands:
    def test_list_and_get(self, store_root, capsys):
        assert run_cli(store_root, "template", "list", porcelain=True) == 0
        listing = parse_canonical(capsys.readouterr().out.strip())
        assert listing["templates"][0]["name"] == "demo"
        assert run_cli(store_root, "template", "get", "demo", "active", porcelain=True) == 0
        template = parse_canonical(capsys.readouterr().out.strip())
        assert template["version"] == 1

    def test_publish_from_files(self, store_root, tmp_path, capsys):
        from simdesk.canonical import write_canonical_file
        from simdesk.demo import demo_template_content, write_demo_dataset

        files = tmp_path / "payload"
        write_demo_dataset(files)
        content = demo_template_content().to_value()
        content["name"] = "fromcli"
        template_file = tmp_path / "template.canon.json"
        write_canonical_file(template_file, content)
        assert (
            run_cli(
                store_root, "template", "publish", str(template_file), "--files-root", str(files), porcelain=True
            )
            == 0
        )
        assert parse_canonical(capsys.readouterr().out.strip()) == {"name": "fromcli", "version": 1}

    def test_get_materializes_files(self, store_root, tmp_path, capsys):
        dest = tmp_path / "materialized"
        assert run_cli(store_root, "template", "get", "demo", "1", "--out", str(dest)) == 0
        assert (dest / "corpus.jsonl").is_file()
        assert (dest / "template.canon.json").is_file()


class TestComponentCommands:
    def test_commit_checkout_check(self, store_root, fixtures_dir, tmp_path, capsys):
        src = fixtures_dir / "components" / "stop_after_first"
        assert (
            run_cli(
                store_root,
                "component",
                "commit",
                "alice",
                "stopper",
                str(src),
                "--author",
                "alice",
                "--message",
                "v1",
                porcelain=True,
            )
            == 0
        )
        commit = parse_canonical(capsys.readouterr().out.strip())
        assert len(commit["commit_id"]) == 64

        dest = tmp_path / "checkout"
        assert run_cli(store_root, "component", "checkout", commit["commit_id"], "--out", str(dest)) == 0
        assert (dest / "main.py").read_bytes() == (src / "main.py").read_bytes()

        capsys.readouterr()
        assert run_cli(store_root, "component", "check", str(src)) == 0

    def test_check_reports_findings(self, store_root, tmp_path, capsys):
        bad = tmp_path / "bad_component"
        bad.mkdir()
        (bad / "component.canon.json").write_text(
            '{"category":"stopping_strategy","entrypoint":[],"external":false,"name":"s"}'
        )
        assert run_cli(store_root, "component", "check", str(bad)) == 2
        assert "EMPTY_ENTRYPOINT" in capsys.readouterr().out


class TestServe:
    def test_missing_config_exits_four(self, store_root):
        assert run_cli(store_root, "serve", "--config", "nope.canon.json") == 4


class TestInitDemo:
    def test_idempotent_like_versioning(self, tmp_path, capsys):
        root = tmp_path / "store"
        assert main(["--store-root", str(root), "--porcelain", "init-demo"]) == 0
        first = parse_canonical(capsys.readouterr().out.strip())
        assert first["template"] == {"name": "demo", "version": 1}
        assert len(first["component_commit"]) == 64
        assert main(["--store-root", str(root), "--porcelain", "init-demo"]) == 0
        second = parse_canonical(capsys.readouterr().out.strip())
        assert second["template"] == {"name": "demo", "version": 2}
