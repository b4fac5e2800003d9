"""Command-line surface for headless use.

Exit codes: 0 success or PASS; 2 validation failure (and `diff --exit-code`
with a non-empty diff); 3 run or replay failure; 4 I/O or config error.
With --porcelain all machine output is canonical form on stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Optional

from .bundle import (
    BundleError,
    ExperimentBundle,
    bundle_hash,
    diff_bundles,
    export_bundle,
    import_bundle,
    load_bundle,
    validate_bundle_value,
)
from .canonical import CanonicalError, canonicalize, read_canonical_file, write_canonical_file
from .datasets import DatasetError, read_qrels
from .demo import install_demo, stop_after_first_tree
from .engine import compute_session_measures, decode_trace
from .executor import RunLimits, RunStore, execute, trace_hashes_of_run, verify_reproduction
from .model import SchemaViolation
from .registry import RegistryError, read_directory_tree, static_check
from .templates import TemplateContent, TemplateError, TemplateNotFound
from .workspace import Workspace

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUN = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, exit_code: int, message: str):
        self.exit_code = exit_code
        super().__init__(message)


def _emit(args: argparse.Namespace, value: Any, human: str) -> None:
    if args.porcelain:
        sys.stdout.write(canonicalize(value).decode("utf-8") + "\n")
    elif human:
        sys.stdout.write(human + "\n")


def _read_bundle_file(path: str) -> ExperimentBundle:
    file = Path(path)
    if not file.is_file():
        raise CliError(EXIT_IO, f"bundle file not found: {path}")
    try:
        return load_bundle(file)
    except (CanonicalError, SchemaViolation) as exc:
        raise CliError(EXIT_VALIDATION, f"{path}: {exc}") from exc


def _read_bundle_value(path: str) -> Any:
    file = Path(path)
    if not file.is_file():
        raise CliError(EXIT_IO, f"bundle file not found: {path}")
    try:
        return read_canonical_file(file)
    except CanonicalError as exc:
        raise CliError(EXIT_VALIDATION, f"{path}: {exc}") from exc


def _workspace(args: argparse.Namespace) -> Workspace:
    return Workspace(args.store_root)


def _limits(args: argparse.Namespace) -> RunLimits:
    return RunLimits(wall_clock_s=getattr(args, "wall_clock", 60.0))


# --- commands ----------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    workspace = _workspace(args)
    value = _read_bundle_value(args.bundle)
    bundle, report = validate_bundle_value(value, workspace.templates, workspace.registry)
    if args.porcelain:
        _emit(args, report.to_value(), "")
    elif report.ok:
        sys.stdout.write(f"ok: {args.bundle} (bundle_hash {bundle_hash(bundle)})\n")
    else:
        for violation in report.violations:
            where = f" [{violation.node_id or violation.key}]" if (violation.node_id or violation.key) else ""
            sys.stderr.write(f"{violation.code}{where}: {violation.detail}\n")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_run(args: argparse.Namespace) -> int:
    workspace = _workspace(args)
    bundle = _read_bundle_file(args.bundle)
    if args.seed is not None:
        bundle = bundle.with_master_seed(args.seed)
    effective_hash = bundle_hash(bundle)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    run_store = RunStore(out.parent)
    record = execute(bundle, workspace.stores, run_store, _limits(args), run_id=out.name)
    result: dict[str, Any] = {"bundle_hash": effective_hash, **record.to_value()}
    if record.status == "COMPLETED":
        hashes = trace_hashes_of_run(run_store, record)
        result["trace_hashes"] = hashes
        manifest = {
            "bundle_hash": effective_hash,
            "files": {rel: h for rel, h in zip(record.outputs["traces"], hashes)},
        }
        write_canonical_file(out / "MANIFEST.canon.json", manifest)
        _emit(args, result, f"bundle_hash {effective_hash}\nrun {record.run_id} COMPLETED ({len(hashes)} traces)")
        return EXIT_OK
    failure = record.failure.to_value() if record.failure else {}
    _emit(args, result, f"bundle_hash {effective_hash}\nrun {record.run_id} FAILED: {failure}")
    return EXIT_RUN


def cmd_diff(args: argparse.Namespace) -> int:
    a = _read_bundle_file(args.a)
    b = _read_bundle_file(args.b)
    diff = diff_bundles(a, b)
    human_lines = []
    if diff.is_empty():
        human_lines.append("bundles are identical")
    else:
        for change in diff.param_changed:
            human_lines.append(
                f"param {change['node_id']}.{change['key']}: {change['old']!r} -> {change['new']!r}"
            )
        for change in diff.component_changed:
            human_lines.append(f"component {change['node_id']} changed")
        if diff.seed_changed:
            human_lines.append(f"seed: {diff.seed_changed['old']} -> {diff.seed_changed['new']}")
        if diff.template_changed:
            human_lines.append(f"template: {diff.template_changed['old']} -> {diff.template_changed['new']}")
        if diff.structure_changed:
            human_lines.append("structure changed")
    _emit(args, diff.to_value(), "\n".join(human_lines))
    if args.exit_code and not diff.is_empty():
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    bundle = _read_bundle_file(args.bundle)
    try:
        manifest = export_bundle(bundle, args.out, aux_root=args.aux_root, run_outputs=args.run_outputs)
    except BundleError as exc:
        raise CliError(EXIT_IO, str(exc)) from exc
    _emit(args, manifest, f"exported to {args.out} ({len(manifest['files'])} files)")
    return EXIT_OK


def cmd_import(args: argparse.Namespace) -> int:
    try:
        bundle = import_bundle(args.src)
    except BundleError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from exc
    _emit(
        args,
        {"bundle_hash": bundle_hash(bundle), "bundle": bundle.to_value()},
        f"imported bundle {bundle_hash(bundle)}",
    )
    return EXIT_OK


def _manifest_trace_hashes(path: str) -> list[str]:
    file = Path(path)
    if not file.is_file():
        raise CliError(EXIT_IO, f"manifest file not found: {path}")
    try:
        value = read_canonical_file(file)
    except CanonicalError as exc:
        raise CliError(EXIT_VALIDATION, f"{path}: {exc}") from exc
    if not isinstance(value, dict):
        raise CliError(EXIT_VALIDATION, f"{path}: manifest must be a map")
    if isinstance(value.get("trace_hashes"), list):
        return list(value["trace_hashes"])
    files = value.get("files")
    if not isinstance(files, dict):
        raise CliError(EXIT_VALIDATION, f"{path}: manifest has neither trace_hashes nor files")
    pairs = []
    for rel, digest in files.items():
        name = rel.rsplit("/", 1)[-1]
        if name.startswith("trace.u") and name.endswith(".jsonl"):
            try:
                user = int(name[len("trace.u") : -len(".jsonl")])
            except ValueError:
                continue
            pairs.append((user, digest))
    if not pairs:
        raise CliError(EXIT_VALIDATION, f"{path}: manifest lists no trace files")
    return [digest for _, digest in sorted(pairs)]


def cmd_replay_check(args: argparse.Namespace) -> int:
    workspace = _workspace(args)
    bundle = _read_bundle_file(args.bundle)
    recorded = _manifest_trace_hashes(args.manifest)
    result = verify_reproduction(bundle, recorded, workspace.stores, workspace.runs, _limits(args))
    _emit(args, result.to_value(), result.status)
    if result.status == "FAIL":
        return EXIT_RUN
    return EXIT_OK


def cmd_measures(args: argparse.Namespace) -> int:
    file = Path(args.trace)
    if not file.is_file():
        raise CliError(EXIT_IO, f"trace file not found: {args.trace}")
    try:
        trace = decode_trace(file.read_bytes())
    except (CanonicalError, KeyError, ValueError) as exc:
        raise CliError(EXIT_VALIDATION, f"{args.trace}: {exc}") from exc
    qrels = None
    if args.qrels:
        qrels_file = Path(args.qrels)
        if not qrels_file.is_file():
            raise CliError(EXIT_IO, f"qrels file not found: {args.qrels}")
        try:
            qrels = read_qrels(qrels_file)
        except DatasetError as exc:
            raise CliError(EXIT_VALIDATION, f"{args.qrels}: {exc}") from exc
    measures = compute_session_measures(trace, qrels)
    human = "\n".join(f"{key}: {value}" for key, value in measures.items())
    _emit(args, measures, human)
    return EXIT_OK


def cmd_template(args: argparse.Namespace) -> int:
    workspace = _workspace(args)
    if args.template_cmd == "publish":
        file = Path(args.template)
        if not file.is_file():
            raise CliError(EXIT_IO, f"template file not found: {args.template}")
        try:
            content = TemplateContent.from_value(read_canonical_file(file))
        except (CanonicalError, SchemaViolation) as exc:
            raise CliError(EXIT_VALIDATION, f"{args.template}: {exc}") from exc
        files_root = args.files_root or str(file.parent)
        try:
            name, version = workspace.templates.publish(content, files_root)
        except TemplateError as exc:
            raise CliError(EXIT_VALIDATION, str(exc)) from exc
        _emit(args, {"name": name, "version": version}, f"published ({name}, {version})")
        return EXIT_OK
    if args.template_cmd == "get":
        selector: int | str = args.version if args.version == "active" else int(args.version)
        try:
            template = workspace.templates.get(args.name, selector)
        except TemplateNotFound as exc:
            raise CliError(EXIT_IO, str(exc)) from exc
        if args.out:
            dest = Path(args.out)
            dest.mkdir(parents=True, exist_ok=True)
            for rel, data in workspace.templates.version_bytes(args.name, selector).items():
                target = dest / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(data)
        _emit(args, template.to_value(), f"({template.name}, {template.version}) status={template.status}")
        return EXIT_OK
    entries = workspace.templates.list()
    human = "\n".join(f"{e['name']}: active v{e['active']}, versions {e['versions']}" for e in entries)
    _emit(args, {"templates": entries}, human or "no templates")
    return EXIT_OK


def cmd_component(args: argparse.Namespace) -> int:
    workspace = _workspace(args)
    if args.component_cmd == "commit":
        src = Path(args.dir)
        if not src.is_dir():
            raise CliError(EXIT_IO, f"component directory not found: {args.dir}")
        tree = read_directory_tree(src)
        try:
            commit = workspace.registry.commit_component(args.namespace, args.name, tree, args.author, args.message)
        except (RegistryError, SchemaViolation) as exc:
            raise CliError(EXIT_VALIDATION, str(exc)) from exc
        _emit(
            args,
            {"commit_id": commit.commit_id, "tree_hash": commit.tree_hash, "parent": commit.parent},
            f"committed {commit.commit_id}",
        )
        return EXIT_OK
    if args.component_cmd == "checkout":
        try:
            tree_hash = workspace.registry.checkout(args.commit_id, args.out)
        except RegistryError as exc:
            raise CliError(EXIT_IO, str(exc)) from exc
        _emit(args, {"tree_hash": tree_hash}, f"checked out into {args.out} (tree {tree_hash})")
        return EXIT_OK
    src = Path(args.dir)
    if not src.is_dir():
        raise CliError(EXIT_IO, f"component directory not found: {args.dir}")
    report = static_check(read_directory_tree(src))
    human = "\n".join(f"{f.severity}: {f.code}: {f.detail}" for f in report.findings)
    _emit(args, report.to_value(), human or "ok")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import ServiceConfig, serve

    config_path = Path(args.config)
    if not config_path.is_file():
        raise CliError(EXIT_IO, f"config file not found: {args.config}")
    try:
        config = ServiceConfig.from_file(config_path)
    except (CanonicalError, ValueError, KeyError) as exc:
        raise CliError(EXIT_IO, f"{args.config}: {exc}") from exc
    serve(config)
    return EXIT_OK


def cmd_init_demo(args: argparse.Namespace) -> int:
    workspace = _workspace(args)
    name, version = install_demo(workspace.templates)
    commit = workspace.registry.commit_component(
        "demo", "stop_after_first", stop_after_first_tree(), "demo", "initial import"
    )
    _emit(
        args,
        {"template": {"name": name, "version": version}, "component_commit": commit.commit_id},
        f"published template ({name}, {version}); committed demo component {commit.commit_id}",
    )
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simdesk", description=__doc__)
    parser.add_argument("--store-root", default="./simdesk-store", help="workspace store directory")
    parser.add_argument("--porcelain", action="store_true", help="canonical-form output on stdout")
    # The same flags are accepted after the subcommand; SUPPRESS keeps the
    # top-level values when they are not repeated there.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--store-root", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    common.add_argument("--porcelain", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate a bundle file against the stores")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", parents=[common], help="execute a bundle into an output directory")
    p.add_argument("bundle")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--seed", type=int, default=None, help="override seeds.master before hashing/executing")
    p.add_argument("--wall-clock", type=float, default=60.0, help="wall clock limit in seconds")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("diff", parents=[common], help="compare two bundle files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--exit-code", action="store_true", help="exit 2 when the diff is non-empty")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("export", parents=[common], help="write the export layout for a bundle")
    p.add_argument("bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--aux-root", default=None, help="directory holding declared aux files")
    p.add_argument("--run-outputs", default=None, help="run outputs directory to attach")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("import", parents=[common], help="verify and read a prior export")
    p.add_argument("src")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("replay-check", parents=[common], help="re-execute and compare trace hashes")
    p.add_argument("bundle")
    p.add_argument("manifest", help="manifest with recorded trace hashes")
    p.add_argument("--wall-clock", type=float, default=60.0)
    p.set_defaults(func=cmd_replay_check)

    p = sub.add_parser("measures", parents=[common], help="session measures from a trace file")
    p.add_argument("trace")
    p.add_argument("--qrels", default=None)
    p.set_defaults(func=cmd_measures)

    p = sub.add_parser("template", parents=[common], help="template store administration")
    tsub = p.add_subparsers(dest="template_cmd", required=True)
    tp = tsub.add_parser("publish", parents=[common])
    tp.add_argument("template", help="template content file (canonical form)")
    tp.add_argument("--files-root", default=None, help="directory holding the dataset payloads")
    tg = tsub.add_parser("get", parents=[common])
    tg.add_argument("name")
    tg.add_argument("version", help='version number or "active"')
    tg.add_argument("--out", default=None, help="materialize the version into a directory")
    tsub.add_parser("list", parents=[common])
    p.set_defaults(func=cmd_template)

    p = sub.add_parser("component", parents=[common], help="component registry administration")
    csub = p.add_subparsers(dest="component_cmd", required=True)
    cc = csub.add_parser("commit", parents=[common])
    cc.add_argument("namespace")
    cc.add_argument("name")
    cc.add_argument("dir")
    cc.add_argument("--author", required=True)
    cc.add_argument("--message", required=True)
    co = csub.add_parser("checkout", parents=[common])
    co.add_argument("commit_id")
    co.add_argument("--out", required=True)
    ck = csub.add_parser("check", parents=[common])
    ck.add_argument("dir")
    p.set_defaults(func=cmd_component)

    p = sub.add_parser("serve", parents=[common], help="run the REST service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("init-demo", parents=[common], help="publish the demo template and component")
    p.set_defaults(func=cmd_init_demo)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"io error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
