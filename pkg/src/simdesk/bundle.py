"""Experiment bundles: the canonical, content-hashed unit of sharing.

A bundle pins everything a rerun needs: the pipeline graph, component
commits, the template version, the engine version, the master seed, and
run parameters. The volatile `meta` block (author, creation time) is
stored but excluded from the bundle hash, so reruns of the same
configuration share one identity.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .canonical import canonical_equal, content_hash, file_sha256, read_canonical_file, write_canonical_file
from .engine import DEFAULT_BUDGET, TimeCosts
from .model import (
    HEX64_RE,
    ComponentCatalog,
    ParameterSchema,
    PipelineGraph,
    RegistrySource,
    SchemaViolation,
    ValidationReport,
    Violation,
    check_relative_path,
    require_identifier,
    validate_pipeline,
)

FORMAT_VERSION = "1"

AUX_KINDS = ("qrels", "topics", "corpus", "other")

# The canonical integer range is 64-bit signed, so master seeds are
# restricted to [0, 2^63) to stay representable in the manifest.
MASTER_SEED_MAX = 2**63 - 1

TEMPLATE_NOT_FOUND = "TEMPLATE_NOT_FOUND"
COMMIT_NOT_FOUND = "COMMIT_NOT_FOUND"
ENGINE_MISMATCH = "ENGINE_MISMATCH"
SCHEMA_VIOLATION = "SCHEMA_VIOLATION"
HASH_MISMATCH = "HASH_MISMATCH"
MISSING_FILE = "MISSING_FILE"


class BundleError(ValueError):
    def __init__(self, code: str, message: str, path: Optional[str] = None):
        self.code = code
        self.path = path
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)


@dataclass(frozen=True)
class TemplateRef:
    name: str
    version: int

    def to_value(self) -> dict:
        return {"name": self.name, "version": self.version}


@dataclass(frozen=True)
class AuxFile:
    kind: str
    path: str
    sha256: str

    def to_value(self) -> dict:
        return {"kind": self.kind, "path": self.path, "sha256": self.sha256}


@dataclass(frozen=True)
class BundleMeta:
    created_utc: str = ""
    author: str = ""

    def to_value(self) -> dict:
        return {"created_utc": self.created_utc, "author": self.author}


@dataclass(frozen=True)
class RunParams:
    costs: TimeCosts = TimeCosts()
    budget: float = DEFAULT_BUDGET

    def to_value(self) -> dict:
        return {"costs": self.costs.to_value(), "budget": self.budget}


@dataclass(frozen=True)
class ExperimentBundle:
    engine_version: str
    template_ref: TemplateRef
    pipeline: PipelineGraph
    master_seed: int
    repetitions: int
    format_version: str = FORMAT_VERSION
    run_params: RunParams = RunParams()
    aux_files: tuple[AuxFile, ...] = ()
    meta: BundleMeta = BundleMeta()

    def to_value(self, include_meta: bool = True) -> dict:
        value = {
            "format_version": self.format_version,
            "engine_version": self.engine_version,
            "template_ref": self.template_ref.to_value(),
            "pipeline": self.pipeline.to_value(),
            "seeds": {"master": self.master_seed},
            "repetitions": self.repetitions,
            "run_params": self.run_params.to_value(),
            "aux_files": [a.to_value() for a in self.aux_files],
        }
        if include_meta:
            value["meta"] = self.meta.to_value()
        return value

    def with_master_seed(self, seed: int) -> "ExperimentBundle":
        if not (0 <= seed <= MASTER_SEED_MAX):
            raise SchemaViolation("seeds.master", f"seed must be in [0, {MASTER_SEED_MAX}]")
        return ExperimentBundle(
            engine_version=self.engine_version,
            template_ref=self.template_ref,
            pipeline=self.pipeline,
            master_seed=seed,
            repetitions=self.repetitions,
            format_version=self.format_version,
            run_params=self.run_params,
            aux_files=self.aux_files,
            meta=self.meta,
        )

    def has_external_component(self) -> bool:
        return any(n.component.external for n in self.pipeline.nodes)


def bundle_from_value(value: Any) -> ExperimentBundle:
    if not isinstance(value, dict):
        raise SchemaViolation("bundle", "expected a map")
    known = {
        "format_version",
        "engine_version",
        "template_ref",
        "pipeline",
        "seeds",
        "repetitions",
        "run_params",
        "aux_files",
        "meta",
    }
    unknown = set(value) - known
    if unknown:
        raise SchemaViolation("bundle", f"unknown keys {sorted(unknown)}")

    fmt = value.get("format_version")
    if fmt != FORMAT_VERSION:
        raise SchemaViolation("format_version", f"unsupported format_version {fmt!r}")
    engine_version = value.get("engine_version")
    if not isinstance(engine_version, str) or not engine_version:
        raise SchemaViolation("engine_version", "expected a non-empty string")

    raw_ref = value.get("template_ref")
    if not isinstance(raw_ref, dict) or set(raw_ref) != {"name", "version"}:
        raise SchemaViolation("template_ref", "expected a map with name and version")
    name = require_identifier(raw_ref["name"], "template_ref.name")
    version = raw_ref["version"]
    if isinstance(version, bool) or not isinstance(version, int) or version < 1:
        raise SchemaViolation("template_ref.version", "expected a positive integer")

    pipeline = PipelineGraph.from_value(value.get("pipeline"), "pipeline")

    raw_seeds = value.get("seeds")
    if not isinstance(raw_seeds, dict) or set(raw_seeds) != {"master"}:
        raise SchemaViolation("seeds", "expected a map with a master seed")
    master = raw_seeds["master"]
    if isinstance(master, bool) or not isinstance(master, int) or not (0 <= master <= MASTER_SEED_MAX):
        raise SchemaViolation("seeds.master", f"expected an integer in [0, {MASTER_SEED_MAX}]")

    repetitions = value.get("repetitions")
    if isinstance(repetitions, bool) or not isinstance(repetitions, int) or repetitions < 1:
        raise SchemaViolation("repetitions", "expected a positive integer")

    raw_rp = value.get("run_params", {})
    if not isinstance(raw_rp, dict) or set(raw_rp) - {"costs", "budget"}:
        raise SchemaViolation("run_params", "expected a map with costs and budget")
    try:
        costs = TimeCosts.from_value(raw_rp.get("costs", {}))
    except ValueError as exc:
        raise SchemaViolation("run_params.costs", str(exc)) from None
    raw_budget = raw_rp.get("budget", DEFAULT_BUDGET)
    if isinstance(raw_budget, bool) or not isinstance(raw_budget, (int, float)) or raw_budget < 0:
        raise SchemaViolation("run_params.budget", "expected a non-negative number")
    run_params = RunParams(costs=costs, budget=float(raw_budget))

    raw_aux = value.get("aux_files", [])
    if not isinstance(raw_aux, list):
        raise SchemaViolation("aux_files", "expected a list")
    aux_files = []
    for i, raw in enumerate(raw_aux):
        path = f"aux_files[{i}]"
        if not isinstance(raw, dict) or set(raw) != {"kind", "path", "sha256"}:
            raise SchemaViolation(path, "expected a map with kind, path, sha256")
        if raw["kind"] not in AUX_KINDS:
            raise SchemaViolation(f"{path}.kind", f"unknown kind {raw['kind']!r}")
        check_relative_path(raw["path"], f"{path}.path")
        if not isinstance(raw["sha256"], str) or not HEX64_RE.match(raw["sha256"]):
            raise SchemaViolation(f"{path}.sha256", "expected 64 lowercase hex characters")
        aux_files.append(AuxFile(kind=raw["kind"], path=raw["path"], sha256=raw["sha256"]))

    raw_meta = value.get("meta", {})
    if not isinstance(raw_meta, dict) or set(raw_meta) - {"created_utc", "author"}:
        raise SchemaViolation("meta", "expected a map with created_utc and author")
    meta = BundleMeta(created_utc=str(raw_meta.get("created_utc", "")), author=str(raw_meta.get("author", "")))

    return ExperimentBundle(
        engine_version=engine_version,
        template_ref=TemplateRef(name=name, version=version),
        pipeline=pipeline,
        master_seed=master,
        repetitions=repetitions,
        run_params=run_params,
        aux_files=tuple(aux_files),
        meta=meta,
    )


def load_bundle(path: str | Path) -> ExperimentBundle:
    return bundle_from_value(read_canonical_file(path))


def save_bundle(path: str | Path, bundle: ExperimentBundle) -> None:
    write_canonical_file(path, bundle.to_value())


def bundle_hash(bundle: ExperimentBundle) -> str:
    """Content hash over the canonical form with `meta` removed."""
    return content_hash(bundle.to_value(include_meta=False))


def validate_bundle(
    bundle: ExperimentBundle,
    templates,
    registry,
    catalog: Optional[ComponentCatalog] = None,
) -> ValidationReport:
    """Full validation against the template store and component registry."""
    from .builtins import BUILTIN_CATALOG
    from .model import PARAM_INVALID, UNKNOWN_COMPONENT
    from .registry import CommitNotFound, parse_component_manifest
    from .templates import TemplateNotFound

    violations = list(validate_pipeline(bundle.pipeline, catalog or BUILTIN_CATALOG).violations)

    template = None
    try:
        template = templates.get(bundle.template_ref.name, bundle.template_ref.version)
    except TemplateNotFound:
        violations.append(
            Violation(
                TEMPLATE_NOT_FOUND,
                f"template ({bundle.template_ref.name}, {bundle.template_ref.version}) not in store",
            )
        )
    if template is not None and template.engine_version != bundle.engine_version:
        violations.append(
            Violation(
                ENGINE_MISMATCH,
                f"bundle pins engine {bundle.engine_version!r} but template pins {template.engine_version!r}",
            )
        )

    for node in bundle.pipeline.nodes:
        source = node.component.source
        if not isinstance(source, RegistrySource):
            continue
        try:
            tree = registry.get_tree(source.commit_id)
        except CommitNotFound:
            violations.append(
                Violation(COMMIT_NOT_FOUND, f"commit {source.commit_id} not in registry", node_id=node.node_id)
            )
            continue
        if source.path not in tree:
            violations.append(
                Violation(
                    UNKNOWN_COMPONENT,
                    f"commit {source.commit_id} tree has no file {source.path!r}",
                    node_id=node.node_id,
                )
            )
            continue
        try:
            manifest = parse_component_manifest(tree[source.path])
        except SchemaViolation as exc:
            violations.append(Violation(UNKNOWN_COMPONENT, f"bad component manifest: {exc}", node_id=node.node_id))
            continue
        if manifest.category is not node.component.role:
            violations.append(
                Violation(
                    UNKNOWN_COMPONENT,
                    f"component category {manifest.category.value} does not fill role {node.component.role.value}",
                    node_id=node.node_id,
                )
            )
        schema_path = _sibling_path(source.path, "schema.canon.json")
        if schema_path in tree:
            try:
                schema = ParameterSchema.from_value(read_schema_bytes(tree[schema_path]))
            except (SchemaViolation, ValueError) as exc:
                violations.append(
                    Violation(UNKNOWN_COMPONENT, f"bad component schema: {exc}", node_id=node.node_id)
                )
                continue
            for key, problem in schema.check_params(node.component.params):
                violations.append(Violation(PARAM_INVALID, problem, node_id=node.node_id, key=key))

    return ValidationReport(violations=tuple(violations))


def _sibling_path(path: str, name: str) -> str:
    head, _, _ = path.rpartition("/")
    return f"{head}/{name}" if head else name


def read_schema_bytes(data: bytes):
    from .canonical import parse_canonical

    return parse_canonical(data)


def validate_bundle_value(value: Any, templates, registry) -> tuple[Optional[ExperimentBundle], ValidationReport]:
    """Parse + validate; shape errors become SCHEMA_VIOLATION violations."""
    try:
        bundle = bundle_from_value(value)
    except SchemaViolation as exc:
        return None, ValidationReport((Violation(SCHEMA_VIOLATION, str(exc), key=exc.field_path),))
    return bundle, validate_bundle(bundle, templates, registry)


# --- diffing ------------------------------------------------------------------


@dataclass(frozen=True)
class BundleDiff:
    param_changed: tuple[dict, ...] = ()
    component_changed: tuple[dict, ...] = ()
    seed_changed: Optional[dict] = None
    template_changed: Optional[dict] = None
    structure_changed: bool = False

    def is_empty(self) -> bool:
        return not (
            self.param_changed
            or self.component_changed
            or self.seed_changed
            or self.template_changed
            or self.structure_changed
        )

    def to_value(self) -> dict:
        return {
            "param_changed": list(self.param_changed),
            "component_changed": list(self.component_changed),
            "seed_changed": self.seed_changed,
            "template_changed": self.template_changed,
            "structure_changed": self.structure_changed,
            "empty": self.is_empty(),
        }


_ABSENT = object()


def diff_bundles(a: ExperimentBundle, b: ExperimentBundle) -> BundleDiff:
    """Complete accounting of hashed content differences between two bundles."""
    param_changed: list[dict] = []
    component_changed: list[dict] = []
    structure_changed = False

    a_ids = [n.node_id for n in a.pipeline.nodes]
    b_ids = [n.node_id for n in b.pipeline.nodes]
    a_edges = list(a.pipeline.edges)
    b_edges = list(b.pipeline.edges)
    if a_ids != b_ids or a_edges != b_edges:
        # Differing node sets (or ordering): per-node detail is suppressed.
        structure_changed = True
    else:
        for node_a in a.pipeline.nodes:
            node_b = b.pipeline.node(node_a.node_id)
            ref_a, ref_b = node_a.component, node_b.component  # type: ignore[union-attr]
            same_identity = (
                ref_a.role is ref_b.role
                and ref_a.name == ref_b.name
                and ref_a.source == ref_b.source
                and ref_a.external == ref_b.external
            )
            if not same_identity:
                component_changed.append(
                    {"node_id": node_a.node_id, "old": ref_a.to_value(), "new": ref_b.to_value()}
                )
                continue
            for key in sorted(set(ref_a.params) | set(ref_b.params)):
                old = ref_a.params.get(key, _ABSENT)
                new = ref_b.params.get(key, _ABSENT)
                if old is _ABSENT or new is _ABSENT or not canonical_equal(old, new):
                    param_changed.append(
                        {
                            "node_id": node_a.node_id,
                            "key": key,
                            "old": None if old is _ABSENT else old,
                            "new": None if new is _ABSENT else new,
                        }
                    )

    seed_changed = None
    if a.master_seed != b.master_seed:
        seed_changed = {"old": a.master_seed, "new": b.master_seed}
    template_changed = None
    if a.template_ref != b.template_ref:
        template_changed = {"old": a.template_ref.to_value(), "new": b.template_ref.to_value()}

    # Hash-relevant fields without a dedicated diff slot fall back to the
    # structure flag so that an empty diff always implies hash equality.
    if (
        a.format_version != b.format_version
        or a.engine_version != b.engine_version
        or a.repetitions != b.repetitions
        or not canonical_equal(a.run_params.to_value(), b.run_params.to_value())
        or [x.to_value() for x in a.aux_files] != [x.to_value() for x in b.aux_files]
    ):
        structure_changed = True

    return BundleDiff(
        param_changed=tuple(param_changed),
        component_changed=tuple(component_changed),
        seed_changed=seed_changed,
        template_changed=template_changed,
        structure_changed=structure_changed,
    )


# --- export / import ----------------------------------------------------------

BUNDLE_FILE = "bundle.canon.json"
MANIFEST_FILE = "MANIFEST.canon.json"


def export_bundle(
    bundle: ExperimentBundle,
    dest: str | Path,
    aux_root: Optional[str | Path] = None,
    run_outputs: Optional[str | Path] = None,
) -> dict:
    """Write the export layout; returns the manifest value."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}

    save_bundle(dest / BUNDLE_FILE, bundle)
    files[BUNDLE_FILE] = file_sha256(dest / BUNDLE_FILE)

    for aux in bundle.aux_files:
        if aux_root is None:
            raise BundleError(MISSING_FILE, "bundle declares aux files but no aux root was given", path=aux.path)
        src = Path(aux_root) / aux.path
        if not src.is_file():
            raise BundleError(MISSING_FILE, "aux file missing", path=aux.path)
        actual = file_sha256(src)
        if actual != aux.sha256:
            raise BundleError(HASH_MISMATCH, f"aux file hash {actual} != declared {aux.sha256}", path=aux.path)
        target = dest / "aux" / aux.path
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(src, target)
        files[f"aux/{aux.path}"] = actual

    if run_outputs is not None:
        out_root = Path(run_outputs)
        for src in sorted(p for p in out_root.rglob("*") if p.is_file()):
            rel = src.relative_to(out_root).as_posix()
            target = dest / "outputs" / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(src, target)
            files[f"outputs/{rel}"] = file_sha256(target)

    manifest = {"bundle_hash": bundle_hash(bundle), "files": files}
    write_canonical_file(dest / MANIFEST_FILE, manifest)
    return manifest


def import_bundle(src: str | Path) -> ExperimentBundle:
    """Read a prior export, verifying every recorded hash."""
    src = Path(src)
    manifest_path = src / MANIFEST_FILE
    if not manifest_path.is_file():
        raise BundleError(MISSING_FILE, "export manifest missing", path=MANIFEST_FILE)
    manifest = read_canonical_file(manifest_path)
    if not isinstance(manifest, dict) or not isinstance(manifest.get("files"), dict):
        raise BundleError(MISSING_FILE, "malformed export manifest", path=MANIFEST_FILE)
    for rel, expected in sorted(manifest["files"].items()):
        path = src / rel
        if not path.is_file():
            raise BundleError(MISSING_FILE, "file listed in manifest missing", path=rel)
        actual = file_sha256(path)
        if actual != expected:
            raise BundleError(HASH_MISMATCH, f"file hash {actual} != recorded {expected}", path=rel)
    bundle = load_bundle(src / BUNDLE_FILE)
    recorded = manifest.get("bundle_hash")
    if recorded is not None and recorded != bundle_hash(bundle):
        raise BundleError(HASH_MISMATCH, "bundle hash does not match manifest", path=BUNDLE_FILE)
    return bundle
