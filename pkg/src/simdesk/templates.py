"""Environment templates: named, immutable-versioned evaluation contexts.

A template packages dataset references (with content hashes), the search
backend configuration, an engine version pin, and baseline pipelines.
Publishing never mutates an existing version; the newest publish becomes
active and all prior versions stay retrievable byte-for-byte, so archived
bundles keep resolving against the exact context they pinned.

Store layout: one directory per (name, version) holding template.canon.json
plus the dataset payloads, and a store-level index.canon.json mapping each
name to its active version. The index is updated by atomic rename; a
single-writer lock serializes publishes, readers never block.
"""

from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from filelock import FileLock

from .canonical import file_sha256, read_canonical_file, write_canonical_file
from .datasets import read_qrels, read_topics
from .engine import Environment
from .model import (
    HEX64_RE,
    PipelineGraph,
    SchemaViolation,
    check_relative_path,
    require_identifier,
    validate_pipeline,
)

HASH_MISMATCH = "HASH_MISMATCH"
INVALID_BASELINE = "INVALID_BASELINE"
NOT_FOUND = "NOT_FOUND"
STORE_IO = "STORE_IO"

BACKEND_TYPES = ("bm25", "mock")


class TemplateError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class TemplateNotFound(TemplateError):
    def __init__(self, message: str):
        super().__init__(NOT_FOUND, message)


@dataclass(frozen=True)
class DatasetFile:
    path: str
    sha256: str

    def to_value(self) -> dict:
        return {"path": self.path, "sha256": self.sha256}

    @classmethod
    def from_value(cls, value: Any, field_path: str) -> "DatasetFile":
        if not isinstance(value, dict) or set(value) != {"path", "sha256"}:
            raise SchemaViolation(field_path, "expected a map with path and sha256")
        check_relative_path(value["path"], f"{field_path}.path")
        if not isinstance(value["sha256"], str) or not HEX64_RE.match(value["sha256"]):
            raise SchemaViolation(f"{field_path}.sha256", "expected 64 lowercase hex characters")
        return cls(path=value["path"], sha256=value["sha256"])


@dataclass(frozen=True)
class TemplateContent:
    name: str
    engine_version: str
    corpus: DatasetFile
    topics: DatasetFile
    qrels: Optional[DatasetFile]
    backend_type: str
    backend_params: dict
    baselines: tuple[PipelineGraph, ...] = ()

    def to_value(self) -> dict:
        dataset: dict[str, Any] = {"corpus": self.corpus.to_value(), "topics": self.topics.to_value()}
        if self.qrels is not None:
            dataset["qrels"] = self.qrels.to_value()
        return {
            "name": self.name,
            "engine_version": self.engine_version,
            "dataset": dataset,
            "backend": {"type": self.backend_type, "params": self.backend_params},
            "baselines": [g.to_value() for g in self.baselines],
        }

    @classmethod
    def from_value(cls, value: Any) -> "TemplateContent":
        if not isinstance(value, dict):
            raise SchemaViolation("template", "expected a map")
        unknown = set(value) - {"name", "engine_version", "dataset", "backend", "baselines"}
        if unknown:
            raise SchemaViolation("template", f"unknown keys {sorted(unknown)}")
        name = require_identifier(value.get("name"), "template.name")
        engine_version = value.get("engine_version")
        if not isinstance(engine_version, str) or not engine_version:
            raise SchemaViolation("template.engine_version", "expected a non-empty string")
        dataset = value.get("dataset")
        if not isinstance(dataset, dict) or set(dataset) - {"corpus", "topics", "qrels"} or "corpus" not in dataset or "topics" not in dataset:
            raise SchemaViolation("template.dataset", "expected corpus, topics and optional qrels")
        corpus = DatasetFile.from_value(dataset["corpus"], "template.dataset.corpus")
        topics = DatasetFile.from_value(dataset["topics"], "template.dataset.topics")
        qrels = DatasetFile.from_value(dataset["qrels"], "template.dataset.qrels") if "qrels" in dataset else None
        backend = value.get("backend")
        if not isinstance(backend, dict) or set(backend) != {"type", "params"}:
            raise SchemaViolation("template.backend", "expected a map with type and params")
        if backend["type"] not in BACKEND_TYPES:
            raise SchemaViolation("template.backend.type", f"unknown backend type {backend['type']!r}")
        if not isinstance(backend["params"], dict):
            raise SchemaViolation("template.backend.params", "expected a map")
        raw_baselines = value.get("baselines", [])
        if not isinstance(raw_baselines, list):
            raise SchemaViolation("template.baselines", "expected a list")
        baselines = tuple(
            PipelineGraph.from_value(raw, f"template.baselines[{i}]") for i, raw in enumerate(raw_baselines)
        )
        return cls(
            name=name,
            engine_version=engine_version,
            corpus=corpus,
            topics=topics,
            qrels=qrels,
            backend_type=backend["type"],
            backend_params=dict(backend["params"]),
            baselines=baselines,
        )


@dataclass(frozen=True)
class EnvironmentTemplate:
    content: TemplateContent
    version: int
    status: str  # active | superseded
    root: Path

    @property
    def name(self) -> str:
        return self.content.name

    @property
    def engine_version(self) -> str:
        return self.content.engine_version

    def to_value(self) -> dict:
        value = self.content.to_value()
        value["version"] = self.version
        value["status"] = self.status
        return value


class TemplateStore:
    """Append-only store of published templates under one root directory."""

    TEMPLATE_FILE = "template.canon.json"
    INDEX_FILE = "index.canon.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = FileLock(str(self.root / ".publish.lock"))

    # -- index ------------------------------------------------------------

    def _read_index(self) -> dict:
        path = self.root / self.INDEX_FILE
        if not path.is_file():
            return {"names": {}}
        try:
            index = read_canonical_file(path)
        except (OSError, ValueError) as exc:
            raise TemplateError(STORE_IO, f"unreadable template index: {exc}") from exc
        if not isinstance(index, dict) or not isinstance(index.get("names"), dict):
            raise TemplateError(STORE_IO, "malformed template index")
        return index

    def _write_index(self, index: dict) -> None:
        write_canonical_file(self.root / self.INDEX_FILE, index)

    def list(self) -> list[dict]:
        index = self._read_index()
        out = []
        for name in sorted(index["names"]):
            entry = index["names"][name]
            out.append({"name": name, "active": entry["active"], "versions": entry["versions"]})
        return out

    # -- publish ----------------------------------------------------------

    def publish(self, content: TemplateContent, files_root: str | Path) -> tuple[str, int]:
        """Verify payload hashes, validate baselines, append a new version."""
        from .builtins import BUILTIN_CATALOG

        files_root = Path(files_root)
        payload_files = [content.corpus, content.topics] + ([content.qrels] if content.qrels else [])
        for ds in payload_files:
            src = files_root / ds.path
            if not src.is_file():
                raise TemplateError(HASH_MISMATCH, f"dataset file missing: {ds.path}")
            actual = file_sha256(src)
            if actual != ds.sha256:
                raise TemplateError(HASH_MISMATCH, f"dataset file {ds.path}: hash {actual} != declared {ds.sha256}")
        for i, baseline in enumerate(content.baselines):
            report = validate_pipeline(baseline, BUILTIN_CATALOG)
            if not report.ok:
                raise TemplateError(INVALID_BASELINE, f"baseline[{i}] invalid: {report.codes()}")

        with self._lock:
            index = self._read_index()
            entry = index["names"].get(content.name, {"active": 0, "versions": []})
            version = (entry["versions"][-1] + 1) if entry["versions"] else 1
            version_dir = self.root / content.name / str(version)
            staging = self.root / content.name / f".staging.{version}"
            if staging.exists():
                shutil.rmtree(staging)
            staging.mkdir(parents=True)
            try:
                for ds in payload_files:
                    target = staging / ds.path
                    target.parent.mkdir(parents=True, exist_ok=True)
                    shutil.copyfile(files_root / ds.path, target)
                write_canonical_file(staging / self.TEMPLATE_FILE, content.to_value())
                # Atomic publish: the version directory appears fully formed.
                staging.rename(version_dir)
            except BaseException:
                if staging.exists():
                    shutil.rmtree(staging)
                raise
            entry = {"active": version, "versions": entry["versions"] + [version]}
            index["names"][content.name] = entry
            self._write_index(index)
        return content.name, version

    # -- retrieval ---------------------------------------------------------

    def _resolve_version(self, name: str, version: int | str) -> int:
        index = self._read_index()
        entry = index["names"].get(name)
        if entry is None:
            raise TemplateNotFound(f"no template named {name!r}")
        if version == "active":
            return entry["active"]
        if isinstance(version, bool) or not isinstance(version, int):
            raise TemplateNotFound(f"bad version selector {version!r}")
        if version not in entry["versions"]:
            raise TemplateNotFound(f"template ({name}, {version}) not published")
        return version

    def get(self, name: str, version: int | str) -> EnvironmentTemplate:
        resolved = self._resolve_version(name, version)
        version_dir = self.root / name / str(resolved)
        path = version_dir / self.TEMPLATE_FILE
        if not path.is_file():
            raise TemplateNotFound(f"template ({name}, {resolved}) missing from store")
        try:
            content = TemplateContent.from_value(read_canonical_file(path))
        except SchemaViolation as exc:
            raise TemplateError(STORE_IO, f"stored template unreadable: {exc}") from exc
        index = self._read_index()
        active = index["names"][name]["active"]
        status = "active" if resolved == active else "superseded"
        return EnvironmentTemplate(content=content, version=resolved, status=status, root=version_dir)

    def version_bytes(self, name: str, version: int | str) -> dict[str, bytes]:
        """Raw bytes of every file in a published version, keyed by path."""
        template = self.get(name, version)
        out = {}
        for path in sorted(p for p in template.root.rglob("*") if p.is_file()):
            out[path.relative_to(template.root).as_posix()] = path.read_bytes()
        return out

    def resolve_environment(self, name: str, version: int) -> Environment:
        """Materialize the pinned version, re-verifying dataset hashes."""
        template = self.get(name, version)
        content = template.content
        for ds in [content.corpus, content.topics] + ([content.qrels] if content.qrels else []):
            path = template.root / ds.path
            if not path.is_file():
                raise TemplateError(HASH_MISMATCH, f"dataset file missing on disk: {ds.path}")
            actual = file_sha256(path)
            if actual != ds.sha256:
                raise TemplateError(
                    HASH_MISMATCH, f"dataset file {ds.path}: hash {actual} != recorded {ds.sha256}"
                )
        topics = read_topics(template.root / content.topics.path)
        qrels = read_qrels(template.root / content.qrels.path) if content.qrels else None
        return Environment(
            name=content.name,
            version=template.version,
            engine_version=content.engine_version,
            topics=topics,
            qrels=qrels,
            backend_type=content.backend_type,
            backend_params=dict(content.backend_params),
            corpus_path=template.root / content.corpus.path,
        )
