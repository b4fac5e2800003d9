"""Pipeline graph, component roles, parameter schemas, structural validation.

A simulator pipeline is a role-typed directed graph: exactly one node per
role, edges restricted to the fixed adjacency table below. Edges document
the searcher loop; execution order is owned by the engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional, Union

IDENTIFIER_RE = re.compile(r"^[a-z][a-z0-9_]{0,63}$")
HEX64_RE = re.compile(r"^[0-9a-f]{64}$")


class SchemaViolation(ValueError):
    """Malformed serialized input: wrong shape, unknown role, bad identifier."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class ComponentRole(str, Enum):
    QUERY_GENERATOR = "query_generator"
    SNIPPET_CLASSIFIER = "snippet_classifier"
    DOCUMENT_CLASSIFIER = "document_classifier"
    STOPPING_STRATEGY = "stopping_strategy"
    SEARCH_BACKEND = "search_backend"

    @classmethod
    def parse(cls, raw: Any, field_path: str = "role") -> "ComponentRole":
        try:
            return cls(raw)
        except ValueError:
            raise SchemaViolation(field_path, f"unknown role {raw!r}") from None


# from-role -> to-role pairs a pipeline edge may use.
ALLOWED_EDGES: frozenset[tuple[ComponentRole, ComponentRole]] = frozenset(
    {
        (ComponentRole.QUERY_GENERATOR, ComponentRole.SEARCH_BACKEND),
        (ComponentRole.SEARCH_BACKEND, ComponentRole.SNIPPET_CLASSIFIER),
        (ComponentRole.SNIPPET_CLASSIFIER, ComponentRole.DOCUMENT_CLASSIFIER),
        (ComponentRole.DOCUMENT_CLASSIFIER, ComponentRole.STOPPING_STRATEGY),
        (ComponentRole.STOPPING_STRATEGY, ComponentRole.QUERY_GENERATOR),
    }
)

PARAM_KINDS = ("int", "float", "string", "bool", "enum")


def is_identifier(s: Any) -> bool:
    return isinstance(s, str) and bool(IDENTIFIER_RE.match(s))


def require_identifier(s: Any, field_path: str) -> str:
    if not is_identifier(s):
        raise SchemaViolation(field_path, f"not a valid identifier: {s!r}")
    return s


@dataclass(frozen=True)
class SchemaEntry:
    name: str
    kind: str
    default: Any
    min: Optional[float] = None
    max: Optional[float] = None
    choices: Optional[tuple[str, ...]] = None
    description: str = ""
    required: bool = False

    def check_value(self, value: Any) -> Optional[str]:
        """None if the value satisfies this entry, else a problem description."""
        if self.kind == "bool":
            if not isinstance(value, bool):
                return f"expected bool, got {type(value).__name__}"
        elif self.kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                return f"expected int, got {type(value).__name__}"
        elif self.kind == "float":
            # ints are accepted for float params; JSON writers cannot always
            # force a trailing ".0".
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"expected float, got {type(value).__name__}"
        elif self.kind == "string":
            if not isinstance(value, str):
                return f"expected string, got {type(value).__name__}"
        elif self.kind == "enum":
            if not isinstance(value, str):
                return f"expected string, got {type(value).__name__}"
            if self.choices and value not in self.choices:
                return f"value {value!r} not in choices {list(self.choices)}"
        if self.kind in ("int", "float") and not isinstance(value, bool):
            if self.min is not None and value < self.min:
                return f"value {value} below minimum {self.min}"
            if self.max is not None and value > self.max:
                return f"value {value} above maximum {self.max}"
        return None


@dataclass(frozen=True)
class ParameterSchema:
    entries: tuple[SchemaEntry, ...] = ()

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(names) != len(set(names)):
            raise SchemaViolation("entries", "duplicate entry names")
        for e in self.entries:
            if e.kind not in PARAM_KINDS:
                raise SchemaViolation(e.name, f"unknown kind {e.kind!r}")
            if e.kind == "enum" and not e.choices:
                raise SchemaViolation(e.name, "enum entry requires choices")
            problem = e.check_value(e.default)
            if problem is not None:
                raise SchemaViolation(e.name, f"default invalid: {problem}")

    def entry(self, name: str) -> Optional[SchemaEntry]:
        for e in self.entries:
            if e.name == name:
                return e
        return None

    def check_params(self, params: Mapping[str, Any]) -> list[tuple[str, str]]:
        """Return (key, problem) pairs; empty means the params validate."""
        problems: list[tuple[str, str]] = []
        for key, value in params.items():
            entry = self.entry(key)
            if entry is None:
                problems.append((key, "unknown parameter"))
                continue
            problem = entry.check_value(value)
            if problem is not None:
                problems.append((key, problem))
        for e in self.entries:
            if e.required and e.name not in params:
                problems.append((e.name, "required parameter missing"))
        return problems

    def resolve(self, params: Mapping[str, Any]) -> dict[str, Any]:
        """Params with defaults filled in and float-kind ints coerced."""
        out: dict[str, Any] = {}
        for e in self.entries:
            value = params.get(e.name, e.default)
            if e.kind == "float" and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            out[e.name] = value
        return out

    def to_value(self) -> list:
        out = []
        for e in self.entries:
            d: dict[str, Any] = {"name": e.name, "kind": e.kind, "default": e.default}
            if e.min is not None:
                d["min"] = e.min
            if e.max is not None:
                d["max"] = e.max
            if e.choices is not None:
                d["choices"] = list(e.choices)
            if e.description:
                d["description"] = e.description
            d["required"] = e.required
            out.append(d)
        return out

    @classmethod
    def from_value(cls, value: Any, field_path: str = "schema") -> "ParameterSchema":
        if isinstance(value, dict) and "entries" in value:
            value = value["entries"]
        if not isinstance(value, list):
            raise SchemaViolation(field_path, "expected a list of entries")
        entries = []
        for i, raw in enumerate(value):
            path = f"{field_path}[{i}]"
            if not isinstance(raw, dict):
                raise SchemaViolation(path, "expected a map")
            unknown = set(raw) - {"name", "kind", "default", "min", "max", "choices", "description", "required"}
            if unknown:
                raise SchemaViolation(path, f"unknown keys {sorted(unknown)}")
            name = require_identifier(raw.get("name"), f"{path}.name")
            kind = raw.get("kind")
            if kind not in PARAM_KINDS:
                raise SchemaViolation(f"{path}.kind", f"unknown kind {kind!r}")
            if "default" not in raw:
                raise SchemaViolation(f"{path}.default", "default is required")
            choices = raw.get("choices")
            if choices is not None:
                if not isinstance(choices, list) or not all(isinstance(c, str) for c in choices):
                    raise SchemaViolation(f"{path}.choices", "expected a list of strings")
                choices = tuple(choices)
            for bound in ("min", "max"):
                if raw.get(bound) is not None and (
                    isinstance(raw[bound], bool) or not isinstance(raw[bound], (int, float))
                ):
                    raise SchemaViolation(f"{path}.{bound}", "expected a number")
            required = raw.get("required", False)
            if not isinstance(required, bool):
                raise SchemaViolation(f"{path}.required", "expected a bool")
            description = raw.get("description", "")
            if not isinstance(description, str):
                raise SchemaViolation(f"{path}.description", "expected a string")
            try:
                entries.append(
                    SchemaEntry(
                        name=name,
                        kind=kind,
                        default=raw["default"],
                        min=raw.get("min"),
                        max=raw.get("max"),
                        choices=choices,
                        description=description,
                        required=required,
                    )
                )
            except SchemaViolation as exc:
                raise SchemaViolation(f"{path}.{exc.field_path}", str(exc)) from None
        try:
            return cls(entries=tuple(entries))
        except SchemaViolation as exc:
            raise SchemaViolation(field_path, str(exc)) from None


@dataclass(frozen=True)
class BuiltinSource:
    def to_value(self) -> dict:
        return {"type": "builtin"}


@dataclass(frozen=True)
class RegistrySource:
    commit_id: str
    path: str

    def __post_init__(self) -> None:
        if not isinstance(self.commit_id, str) or not HEX64_RE.match(self.commit_id):
            raise SchemaViolation("source.commit_id", "commit id must be 64 lowercase hex characters")
        check_relative_path(self.path, "source.path")

    def to_value(self) -> dict:
        return {"type": "registry", "commit_id": self.commit_id, "path": self.path}


ComponentSource = Union[BuiltinSource, RegistrySource]


def check_relative_path(path: Any, field_path: str) -> str:
    if not isinstance(path, str) or not path:
        raise SchemaViolation(field_path, "expected a non-empty relative path")
    if path.startswith("/") or "\\" in path:
        raise SchemaViolation(field_path, f"path must be relative with / separators: {path!r}")
    parts = path.split("/")
    if any(p in ("", ".", "..") for p in parts):
        raise SchemaViolation(field_path, f"path may not contain empty, '.' or '..' segments: {path!r}")
    return path


@dataclass(frozen=True)
class ComponentRef:
    role: ComponentRole
    name: str
    source: ComponentSource = field(default_factory=BuiltinSource)
    external: bool = False
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_value(self) -> dict:
        return {
            "role": self.role.value,
            "name": self.name,
            "source": self.source.to_value(),
            "external": self.external,
            "params": dict(self.params),
        }

    @classmethod
    def from_value(cls, value: Any, field_path: str = "component") -> "ComponentRef":
        if not isinstance(value, dict):
            raise SchemaViolation(field_path, "expected a map")
        unknown = set(value) - {"role", "name", "source", "external", "params"}
        if unknown:
            raise SchemaViolation(field_path, f"unknown keys {sorted(unknown)}")
        role = ComponentRole.parse(value.get("role"), f"{field_path}.role")
        name = require_identifier(value.get("name"), f"{field_path}.name")
        raw_source = value.get("source", {"type": "builtin"})
        if not isinstance(raw_source, dict) or "type" not in raw_source:
            raise SchemaViolation(f"{field_path}.source", "expected a map with a type")
        source: ComponentSource
        if raw_source["type"] == "builtin":
            if set(raw_source) != {"type"}:
                raise SchemaViolation(f"{field_path}.source", "builtin source takes no extra keys")
            source = BuiltinSource()
        elif raw_source["type"] == "registry":
            if set(raw_source) != {"type", "commit_id", "path"}:
                raise SchemaViolation(f"{field_path}.source", "registry source needs commit_id and path")
            try:
                source = RegistrySource(commit_id=raw_source["commit_id"], path=raw_source["path"])
            except SchemaViolation as exc:
                raise SchemaViolation(f"{field_path}.{exc.field_path}", str(exc)) from None
        else:
            raise SchemaViolation(f"{field_path}.source.type", f"unknown source type {raw_source['type']!r}")
        external = value.get("external", False)
        if not isinstance(external, bool):
            raise SchemaViolation(f"{field_path}.external", "expected a bool")
        params = value.get("params", {})
        if not isinstance(params, dict):
            raise SchemaViolation(f"{field_path}.params", "expected a map")
        return cls(role=role, name=name, source=source, external=external, params=dict(params))


@dataclass(frozen=True)
class PipelineNode:
    node_id: str
    component: ComponentRef

    def to_value(self) -> dict:
        return {"node_id": self.node_id, "component": self.component.to_value()}


@dataclass(frozen=True)
class PipelineGraph:
    nodes: tuple[PipelineNode, ...]
    edges: tuple[tuple[str, str], ...]

    def node(self, node_id: str) -> Optional[PipelineNode]:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        return None

    def node_for_role(self, role: ComponentRole) -> Optional[PipelineNode]:
        for n in self.nodes:
            if n.component.role is role:
                return n
        return None

    def to_value(self) -> dict:
        return {
            "nodes": [n.to_value() for n in self.nodes],
            "edges": [{"from": a, "to": b} for a, b in self.edges],
        }

    @classmethod
    def from_value(cls, value: Any, field_path: str = "pipeline") -> "PipelineGraph":
        if not isinstance(value, dict):
            raise SchemaViolation(field_path, "expected a map")
        unknown = set(value) - {"nodes", "edges"}
        if unknown:
            raise SchemaViolation(field_path, f"unknown keys {sorted(unknown)}")
        raw_nodes = value.get("nodes")
        raw_edges = value.get("edges", [])
        if not isinstance(raw_nodes, list):
            raise SchemaViolation(f"{field_path}.nodes", "expected a list")
        if not isinstance(raw_edges, list):
            raise SchemaViolation(f"{field_path}.edges", "expected a list")
        nodes = []
        seen_ids: set[str] = set()
        for i, raw in enumerate(raw_nodes):
            path = f"{field_path}.nodes[{i}]"
            if not isinstance(raw, dict) or set(raw) != {"node_id", "component"}:
                raise SchemaViolation(path, "expected a map with node_id and component")
            node_id = require_identifier(raw["node_id"], f"{path}.node_id")
            if node_id in seen_ids:
                raise SchemaViolation(f"{path}.node_id", f"duplicate node_id {node_id!r}")
            seen_ids.add(node_id)
            nodes.append(PipelineNode(node_id=node_id, component=ComponentRef.from_value(raw["component"], f"{path}.component")))
        edges = []
        for i, raw in enumerate(raw_edges):
            path = f"{field_path}.edges[{i}]"
            if not isinstance(raw, dict) or set(raw) != {"from", "to"}:
                raise SchemaViolation(path, "expected a map with from and to")
            edges.append((require_identifier(raw["from"], f"{path}.from"), require_identifier(raw["to"], f"{path}.to")))
        return cls(nodes=tuple(nodes), edges=tuple(edges))


# --- validation -------------------------------------------------------------

MISSING_ROLE = "MISSING_ROLE"
DUPLICATE_ROLE = "DUPLICATE_ROLE"
DUPLICATE_NODE_ID = "DUPLICATE_NODE_ID"
BAD_EDGE = "BAD_EDGE"
UNKNOWN_COMPONENT = "UNKNOWN_COMPONENT"
PARAM_INVALID = "PARAM_INVALID"
DISCONNECTED = "DISCONNECTED"


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str
    node_id: Optional[str] = None
    key: Optional[str] = None

    def to_value(self) -> dict:
        out: dict[str, Any] = {"code": self.code, "detail": self.detail}
        if self.node_id is not None:
            out["node_id"] = self.node_id
        if self.key is not None:
            out["key"] = self.key
        return out


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def to_value(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_value() for v in self.violations]}


class ComponentCatalog:
    """Resolves builtin component names to their parameter schemas."""

    def __init__(self) -> None:
        self._schemas: dict[tuple[ComponentRole, str], ParameterSchema] = {}

    def register(self, role: ComponentRole, name: str, schema: ParameterSchema) -> None:
        self._schemas[(role, name)] = schema

    def lookup(self, role: ComponentRole, name: str) -> Optional[ParameterSchema]:
        return self._schemas.get((role, name))

    def names_for_role(self, role: ComponentRole) -> list[str]:
        return sorted(name for (r, name) in self._schemas if r is role)

    def to_value(self) -> dict:
        components = []
        for (role, name), schema in sorted(self._schemas.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
            components.append({"role": role.value, "name": name, "schema": schema.to_value()})
        return {
            "components": components,
            "adjacency": sorted([a.value, b.value] for a, b in ALLOWED_EDGES),
        }


def validate_pipeline(graph: PipelineGraph, catalog: ComponentCatalog) -> ValidationReport:
    """Check every structural invariant; violations are data, not failures."""
    violations: list[Violation] = []

    ids_seen: set[str] = set()
    for node in graph.nodes:
        if node.node_id in ids_seen:
            violations.append(Violation(DUPLICATE_NODE_ID, f"duplicate node_id {node.node_id!r}", node_id=node.node_id))
        ids_seen.add(node.node_id)

    by_role: dict[ComponentRole, list[PipelineNode]] = {}
    for node in graph.nodes:
        by_role.setdefault(node.component.role, []).append(node)
    for role in ComponentRole:
        nodes = by_role.get(role, [])
        if not nodes:
            violations.append(Violation(MISSING_ROLE, f"no node with role {role.value}"))
        elif len(nodes) > 1:
            violations.append(
                Violation(
                    DUPLICATE_ROLE,
                    f"role {role.value} filled by {len(nodes)} nodes: {[n.node_id for n in nodes]}",
                )
            )

    node_ids = {n.node_id for n in graph.nodes}
    for a, b in graph.edges:
        if a not in node_ids or b not in node_ids:
            violations.append(Violation(BAD_EDGE, f"edge {a}->{b} references unknown node"))
            continue
        role_a = graph.node(a).component.role  # type: ignore[union-attr]
        role_b = graph.node(b).component.role  # type: ignore[union-attr]
        if (role_a, role_b) not in ALLOWED_EDGES:
            violations.append(Violation(BAD_EDGE, f"edge {a}->{b} ({role_a.value}->{role_b.value}) not allowed"))

    if graph.nodes and not _weakly_connected(graph):
        violations.append(Violation(DISCONNECTED, "pipeline graph is not weakly connected"))

    for node in graph.nodes:
        ref = node.component
        if isinstance(ref.source, BuiltinSource):
            schema = catalog.lookup(ref.role, ref.name)
            if schema is None:
                violations.append(
                    Violation(UNKNOWN_COMPONENT, f"no builtin {ref.role.value} named {ref.name!r}", node_id=node.node_id)
                )
                continue
            for key, problem in schema.check_params(ref.params):
                violations.append(Violation(PARAM_INVALID, problem, node_id=node.node_id, key=key))
        # Registry-sourced params are validated by validate_bundle, which can
        # read the committed schema file.

    return ValidationReport(violations=tuple(violations))


def _weakly_connected(graph: PipelineGraph) -> bool:
    adjacency: dict[str, set[str]] = {n.node_id: set() for n in graph.nodes}
    for a, b in graph.edges:
        if a in adjacency and b in adjacency:
            adjacency[a].add(b)
            adjacency[b].add(a)
    start = graph.nodes[0].node_id
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adjacency[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(graph.nodes)


# --- form inference ---------------------------------------------------------

_WIDGETS = {"int": "number", "float": "number", "string": "text", "bool": "toggle", "enum": "choice"}


@dataclass(frozen=True)
class FormField:
    name: str
    widget: str
    kind: str
    default: Any
    min: Optional[float] = None
    max: Optional[float] = None
    choices: Optional[tuple[str, ...]] = None
    description: str = ""
    required: bool = False

    def to_value(self) -> dict:
        out: dict[str, Any] = {
            "name": self.name,
            "widget": self.widget,
            "kind": self.kind,
            "default": self.default,
            "required": self.required,
        }
        if self.min is not None:
            out["min"] = self.min
        if self.max is not None:
            out["max"] = self.max
        if self.choices is not None:
            out["choices"] = list(self.choices)
        if self.description:
            out["description"] = self.description
        return out


@dataclass(frozen=True)
class FormDescriptor:
    fields: tuple[FormField, ...]

    def to_value(self) -> dict:
        return {"fields": [f.to_value() for f in self.fields]}


def infer_param_form(schema: ParameterSchema) -> FormDescriptor:
    """One form field per schema entry, order preserved."""
    fields = tuple(
        FormField(
            name=e.name,
            widget=_WIDGETS[e.kind],
            kind=e.kind,
            default=e.default,
            min=e.min,
            max=e.max,
            choices=e.choices,
            description=e.description,
            required=e.required,
        )
        for e in schema.entries
    )
    return FormDescriptor(fields=fields)
