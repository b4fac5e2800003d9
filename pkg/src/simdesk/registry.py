"""Commit-based, content-addressed store for custom components.

The object model mirrors Git at desk scale: file blobs, a tree object
listing (path, file hash) pairs, and commit objects chained through parent
links, all addressed by SHA-256. Commit identity covers (parent, tree,
author, message, category) and deliberately excludes the storage
timestamp, so identical saves always yield identical commit ids.

Store layout: `objects/<first2>/<rest>` content files and
`heads/<namespace>/<name>` pointer files updated by atomic rename.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Optional

from filelock import FileLock

from .canonical import CanonicalError, canonicalize, content_hash, parse_canonical
from .model import (
    ComponentRole,
    ParameterSchema,
    SchemaViolation,
    check_relative_path,
    require_identifier,
)

MANIFEST_FILE = "component.canon.json"
SCHEMA_FILE = "schema.canon.json"

# entrypoint[0] may be a file in the tree or one of these interpreter names.
INTERPRETER_ALLOWLIST = frozenset({"python3", "python", "sh", "bash", "node"})

BAD_MANIFEST = "BAD_MANIFEST"
BAD_SCHEMA = "BAD_SCHEMA"
PATH_ESCAPE = "PATH_ESCAPE"
CONCURRENT_HEAD = "CONCURRENT_HEAD"
COMMIT_NOT_FOUND = "COMMIT_NOT_FOUND"

EMPTY_ENTRYPOINT = "EMPTY_ENTRYPOINT"
ENTRYPOINT_NOT_FOUND = "ENTRYPOINT_NOT_FOUND"
MISSING_MANIFEST = "MISSING_MANIFEST"
BAD_SCHEMA_DEFAULT = "BAD_SCHEMA_DEFAULT"


class RegistryError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class CommitNotFound(RegistryError):
    def __init__(self, commit_id: str):
        super().__init__(COMMIT_NOT_FOUND, f"no commit {commit_id} in registry")


@dataclass(frozen=True)
class ComponentManifest:
    name: str
    category: ComponentRole
    entrypoint: tuple[str, ...]
    external: bool = False
    env: Mapping[str, str] = None  # type: ignore[assignment]

    def to_value(self) -> dict:
        value: dict[str, Any] = {
            "name": self.name,
            "category": self.category.value,
            "entrypoint": list(self.entrypoint),
            "external": self.external,
        }
        if self.env:
            value["env"] = dict(self.env)
        return value


def parse_component_manifest(data: bytes) -> ComponentManifest:
    try:
        value = parse_canonical(data)
    except CanonicalError as exc:
        raise SchemaViolation("manifest", f"unparseable: {exc}") from exc
    if not isinstance(value, dict):
        raise SchemaViolation("manifest", "expected a map")
    unknown = set(value) - {"name", "category", "entrypoint", "external", "env"}
    if unknown:
        raise SchemaViolation("manifest", f"unknown keys {sorted(unknown)}")
    name = require_identifier(value.get("name"), "manifest.name")
    category = ComponentRole.parse(value.get("category"), "manifest.category")
    entrypoint = value.get("entrypoint")
    if not isinstance(entrypoint, list) or not all(isinstance(a, str) and a for a in entrypoint):
        raise SchemaViolation("manifest.entrypoint", "expected a list of non-empty strings")
    external = value.get("external", False)
    if not isinstance(external, bool):
        raise SchemaViolation("manifest.external", "expected a bool")
    env = value.get("env", {})
    if not isinstance(env, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in env.items()):
        raise SchemaViolation("manifest.env", "expected a map of strings")
    return ComponentManifest(
        name=name, category=category, entrypoint=tuple(entrypoint), external=external, env=dict(env)
    )


@dataclass(frozen=True)
class RegistryCommit:
    commit_id: str
    parent: Optional[str]
    tree_hash: str
    author: str
    message: str
    category: str
    stored_at: str

    def identity_value(self) -> dict:
        return {
            "parent": self.parent,
            "tree_hash": self.tree_hash,
            "author": self.author,
            "message": self.message,
            "category": self.category,
        }

    def to_value(self) -> dict:
        value = self.identity_value()
        value["commit_id"] = self.commit_id
        value["stored_at"] = self.stored_at
        return value


def compute_tree_hash(tree: Mapping[str, bytes]) -> str:
    """Hash of [[path, sha256(bytes)], ...] sorted by path bytewise."""
    listing = [
        [path, hashlib.sha256(tree[path]).hexdigest()]
        for path in sorted(tree, key=lambda p: p.encode("utf-8"))
    ]
    return content_hash(listing)


def compute_commit_id(parent: Optional[str], tree_hash: str, author: str, message: str, category: str) -> str:
    return content_hash(
        {"parent": parent, "tree_hash": tree_hash, "author": author, "message": message, "category": category}
    )


def validate_tree(tree: Mapping[str, bytes]) -> ComponentManifest:
    """Check tree invariants and return the parsed manifest."""
    for path in tree:
        try:
            check_relative_path(path, "tree")
        except SchemaViolation as exc:
            raise RegistryError(PATH_ESCAPE, str(exc)) from None
        if not isinstance(tree[path], bytes):
            raise RegistryError(BAD_MANIFEST, f"tree entry {path!r} is not bytes")
    if MANIFEST_FILE not in tree:
        raise RegistryError(BAD_MANIFEST, f"tree is missing {MANIFEST_FILE}")
    try:
        manifest = parse_component_manifest(tree[MANIFEST_FILE])
    except SchemaViolation as exc:
        raise RegistryError(BAD_MANIFEST, str(exc)) from None
    if SCHEMA_FILE in tree:
        try:
            ParameterSchema.from_value(parse_canonical(tree[SCHEMA_FILE]))
        except (SchemaViolation, CanonicalError) as exc:
            raise RegistryError(BAD_SCHEMA, str(exc)) from None
    return manifest


@dataclass(frozen=True)
class CheckFinding:
    code: str
    severity: str  # error | warning
    detail: str

    def to_value(self) -> dict:
        return {"code": self.code, "severity": self.severity, "detail": self.detail}


@dataclass(frozen=True)
class CheckReport:
    findings: tuple[CheckFinding, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def to_value(self) -> dict:
        return {"ok": self.ok, "findings": [f.to_value() for f in self.findings]}


def static_check(tree: Mapping[str, bytes]) -> CheckReport:
    """Manifest, schema and entrypoint checks; findings are data."""
    findings: list[CheckFinding] = []
    for path in tree:
        try:
            check_relative_path(path, "tree")
        except SchemaViolation as exc:
            findings.append(CheckFinding(PATH_ESCAPE, "error", str(exc)))
    if MANIFEST_FILE not in tree:
        findings.append(CheckFinding(MISSING_MANIFEST, "error", f"tree is missing {MANIFEST_FILE}"))
        return CheckReport(tuple(findings))
    try:
        manifest = parse_component_manifest(tree[MANIFEST_FILE])
    except SchemaViolation as exc:
        findings.append(CheckFinding(BAD_MANIFEST, "error", str(exc)))
        return CheckReport(tuple(findings))
    if not manifest.entrypoint:
        findings.append(CheckFinding(EMPTY_ENTRYPOINT, "error", "entrypoint is empty"))
    else:
        head = manifest.entrypoint[0]
        if head not in tree and head not in INTERPRETER_ALLOWLIST:
            findings.append(
                CheckFinding(
                    ENTRYPOINT_NOT_FOUND,
                    "error",
                    f"entrypoint {head!r} is neither a tree file nor an allow-listed interpreter",
                )
            )
    if SCHEMA_FILE in tree:
        try:
            ParameterSchema.from_value(parse_canonical(tree[SCHEMA_FILE]))
        except SchemaViolation as exc:
            code = BAD_SCHEMA_DEFAULT if "default invalid" in str(exc) else BAD_SCHEMA
            findings.append(CheckFinding(code, "error", str(exc)))
        except CanonicalError as exc:
            findings.append(CheckFinding(BAD_SCHEMA, "error", str(exc)))
    return CheckReport(tuple(findings))


class ComponentRegistry:
    """Append-only commit store with per-name linear history."""

    _UNSET = object()

    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        (self.root / "heads").mkdir(parents=True, exist_ok=True)
        self._lock = FileLock(str(self.root / ".commit.lock"))

    # -- objects ------------------------------------------------------------

    def _object_path(self, object_id: str) -> Path:
        return self.root / "objects" / object_id[:2] / object_id[2:]

    def _store_object(self, object_id: str, data: bytes) -> None:
        path = self._object_path(object_id)
        if path.is_file():
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.tmp")
        tmp.write_bytes(data)
        tmp.replace(path)

    def _read_object(self, object_id: str) -> Optional[bytes]:
        path = self._object_path(object_id)
        return path.read_bytes() if path.is_file() else None

    # -- heads ---------------------------------------------------------------

    def _head_path(self, namespace: str, name: str) -> Path:
        return self.root / "heads" / namespace / name

    def head(self, namespace: str, name: str) -> Optional[str]:
        path = self._head_path(namespace, name)
        if not path.is_file():
            return None
        value = parse_canonical(path.read_bytes())
        return value["head"]  # type: ignore[index]

    def heads(self) -> list[dict]:
        out = []
        root = self.root / "heads"
        for path in sorted(p for p in root.rglob("*") if p.is_file()):
            namespace, name = path.relative_to(root).parts[0], path.name
            out.append({"namespace": namespace, "name": name, "head": self.head(namespace, name)})
        return out

    # -- commits ---------------------------------------------------------------

    def commit_component(
        self,
        namespace: str,
        name: str,
        tree: Mapping[str, bytes],
        author: str,
        message: str,
        expected_parent: Any = _UNSET,
    ) -> RegistryCommit:
        """Append one commit; compare-and-set against the current head."""
        require_identifier(namespace, "namespace")
        require_identifier(name, "name")
        manifest = validate_tree(tree)
        tree_hash = compute_tree_hash(tree)
        with self._lock:
            current = self.head(namespace, name)
            if expected_parent is not self._UNSET and expected_parent != current:
                raise RegistryError(
                    CONCURRENT_HEAD,
                    f"expected parent {expected_parent!r} but head is {current!r}",
                )
            parent = current
            commit_id = compute_commit_id(parent, tree_hash, author, message, manifest.category.value)
            stored_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
            commit = RegistryCommit(
                commit_id=commit_id,
                parent=parent,
                tree_hash=tree_hash,
                author=author,
                message=message,
                category=manifest.category.value,
                stored_at=stored_at,
            )
            for path in sorted(tree, key=lambda p: p.encode("utf-8")):
                self._store_object(hashlib.sha256(tree[path]).hexdigest(), tree[path])
            listing = [
                [path, hashlib.sha256(tree[path]).hexdigest()]
                for path in sorted(tree, key=lambda p: p.encode("utf-8"))
            ]
            self._store_object(tree_hash, canonicalize(listing))
            # The commit object carries stored_at; its address is computed
            # over the identity map only.
            self._store_object(commit_id, canonicalize(commit.to_value()))
            head_path = self._head_path(namespace, name)
            head_path.parent.mkdir(parents=True, exist_ok=True)
            tmp = head_path.with_name(f".{head_path.name}.tmp")
            tmp.write_bytes(canonicalize({"head": commit_id}))
            tmp.replace(head_path)
        return commit

    def get_commit(self, commit_id: str) -> RegistryCommit:
        data = self._read_object(commit_id)
        if data is None:
            raise CommitNotFound(commit_id)
        value = parse_canonical(data)
        if not isinstance(value, dict) or "tree_hash" not in value:
            raise CommitNotFound(commit_id)
        return RegistryCommit(
            commit_id=value["commit_id"],
            parent=value["parent"],
            tree_hash=value["tree_hash"],
            author=value["author"],
            message=value["message"],
            category=value["category"],
            stored_at=value["stored_at"],
        )

    def history(self, namespace: str, name: str) -> list[RegistryCommit]:
        out = []
        current = self.head(namespace, name)
        while current is not None:
            commit = self.get_commit(current)
            out.append(commit)
            current = commit.parent
        return out

    def get_tree(self, commit_id: str) -> dict[str, bytes]:
        commit = self.get_commit(commit_id)
        listing_data = self._read_object(commit.tree_hash)
        if listing_data is None:
            raise CommitNotFound(commit_id)
        listing = parse_canonical(listing_data)
        tree = {}
        for path, file_hash in listing:  # type: ignore[misc]
            blob = self._read_object(file_hash)
            if blob is None:
                raise RegistryError(COMMIT_NOT_FOUND, f"blob {file_hash} missing for {path}")
            tree[path] = blob
        return tree

    def checkout(self, commit_id: str, dest: str | Path) -> str:
        """Materialize the committed tree into dest; returns the tree hash."""
        tree = self.get_tree(commit_id)
        dest = Path(dest)
        dest.mkdir(parents=True, exist_ok=True)
        for path in sorted(tree, key=lambda p: p.encode("utf-8")):
            target = dest / path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(tree[path])
        return self.get_commit(commit_id).tree_hash


def hash_directory_tree(root: str | Path) -> str:
    """Re-hash a checked-out directory with the registry's tree rule."""
    root = Path(root)
    tree = {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }
    return compute_tree_hash(tree)


def read_directory_tree(root: str | Path) -> dict[str, bytes]:
    root = Path(root)
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }
