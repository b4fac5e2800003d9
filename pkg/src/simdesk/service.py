"""REST layer: bundle submission, runs, templates, components, catalog.

Every JSON body, request or response, uses the canonical form; errors are
a single machine-stable envelope. Mutating routes require the configured
bearer token; read routes can be left open for local use.
"""

from __future__ import annotations

import io
import os
import tarfile
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request, Response

from .builtins import BUILTIN_CATALOG
from .bundle import (
    ExperimentBundle,
    bundle_hash,
    export_bundle,
    validate_bundle_value,
)
from .canonical import CanonicalError, canonicalize, parse_canonical, read_canonical_file
from .executor import RunLimits, RunQueue, RunRecord, execute, new_run_id, verify_reproduction
from .model import SchemaViolation
from .registry import CONCURRENT_HEAD, RegistryError, static_check
from .templates import TemplateContent, TemplateError, TemplateNotFound
from .workspace import Workspace


@dataclass(frozen=True)
class ServiceConfig:
    store_root: str
    token: str
    listen_address: str = "127.0.0.1:8870"
    open_reads: bool = True
    workers: int = 2
    limits: RunLimits = RunLimits()

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        value = read_canonical_file(path)
        if not isinstance(value, dict):
            raise ValueError("service config must be a map")
        unknown = set(value) - {"store_root", "token", "listen_address", "open_reads", "workers", "limits"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        raw_limits = value.get("limits", {})
        limits = RunLimits(
            wall_clock_s=float(raw_limits.get("wall_clock_s", 60.0)),
            component_timeout_s=float(raw_limits.get("component_timeout_s", 5.0)),
            session_cap=int(raw_limits.get("session_cap", 100)),
        )
        return cls(
            store_root=value["store_root"],
            token=value["token"],
            listen_address=value.get("listen_address", "127.0.0.1:8870"),
            open_reads=value.get("open_reads", True),
            workers=int(value.get("workers", 2)),
            limits=limits,
        )


class ApiError(Exception):
    def __init__(self, http_status: int, code: str, detail: str, offending_field: Optional[str] = None):
        self.http_status = http_status
        self.code = code
        self.detail = detail
        self.offending_field = offending_field
        super().__init__(f"{http_status} {code}: {detail}")

    def to_value(self) -> dict:
        value: dict[str, Any] = {"http_status": self.http_status, "code": self.code, "detail": self.detail}
        if self.offending_field is not None:
            value["offending_field"] = self.offending_field
        return value


def canonical_response(value: Any, status_code: int = 200) -> Response:
    return Response(content=canonicalize(value), status_code=status_code, media_type="application/json")


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="simdesk", docs_url=None, redoc_url=None, openapi_url=None)
    workspace = Workspace(config.store_root)
    run_queue = RunQueue(workspace.stores, workspace.runs, config.limits, workers=config.workers)
    app.state.workspace = workspace
    app.state.run_queue = run_queue
    app.state.config = config

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError) -> Response:
        return canonical_response(exc.to_value(), status_code=exc.http_status)

    @app.exception_handler(Exception)
    async def _unhandled(request: Request, exc: Exception) -> Response:
        incident = os.urandom(6).hex()
        body = {"http_status": 500, "code": "INTERNAL", "detail": f"incident {incident}"}
        return canonical_response(body, status_code=500)

    def check_auth(request: Request, mutating: bool) -> None:
        if not mutating and config.open_reads:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.token}":
            raise ApiError(401, "UNAUTHORIZED", "missing or invalid bearer token")

    async def parse_body(request: Request) -> Any:
        raw = await request.body()
        try:
            return parse_canonical(raw)
        except CanonicalError as exc:
            raise ApiError(422, exc.code, str(exc)) from exc

    def body_map(value: Any, *required: str) -> dict:
        if not isinstance(value, dict):
            raise ApiError(422, "SCHEMA_VIOLATION", "request body must be a map")
        for key in required:
            if key not in value:
                raise ApiError(422, "SCHEMA_VIOLATION", f"missing field {key!r}", offending_field=key)
        return value

    # -- catalog ------------------------------------------------------------

    @app.get("/v1/catalog")
    async def get_catalog(request: Request) -> Response:
        check_auth(request, mutating=False)
        return canonical_response(BUILTIN_CATALOG.to_value())

    # -- bundles ------------------------------------------------------------

    @app.post("/v1/bundles")
    async def post_bundle(request: Request) -> Response:
        check_auth(request, mutating=True)
        value = await parse_body(request)
        bundle, report = validate_bundle_value(value, workspace.templates, workspace.registry)
        if bundle is None or not report.ok:
            first = report.violations[0]
            raise ApiError(422, first.code, first.detail, offending_field=first.key or first.node_id)
        digest = workspace.bundles.put(bundle)
        return canonical_response({"bundle_hash": digest}, status_code=201)

    def load_stored_bundle(digest: str) -> ExperimentBundle:
        bundle = workspace.bundles.get(digest)
        if bundle is None:
            raise ApiError(404, "NOT_FOUND", f"no bundle {digest}")
        return bundle

    @app.get("/v1/bundles/{digest}")
    async def get_bundle(digest: str, request: Request) -> Response:
        check_auth(request, mutating=False)
        return canonical_response(load_stored_bundle(digest).to_value())

    @app.get("/v1/bundles/{digest}/export")
    async def get_bundle_export(digest: str, request: Request) -> Response:
        check_auth(request, mutating=False)
        bundle = load_stored_bundle(digest)
        from .bundle import BundleError

        with tempfile.TemporaryDirectory() as tmp:
            export_dir = Path(tmp) / "export"
            try:
                export_bundle(bundle, export_dir)
            except BundleError as exc:
                raise ApiError(422, exc.code, str(exc)) from exc
            buffer = io.BytesIO()
            with tarfile.open(fileobj=buffer, mode="w") as tar:
                for path in sorted(p for p in export_dir.rglob("*") if p.is_file()):
                    tar.add(path, arcname=path.relative_to(export_dir).as_posix())
        return Response(content=buffer.getvalue(), media_type="application/x-tar")

    # -- runs ---------------------------------------------------------------

    @app.post("/v1/runs")
    async def post_run(request: Request) -> Response:
        check_auth(request, mutating=True)
        value = body_map(await parse_body(request), "bundle_hash")
        bundle = load_stored_bundle(value["bundle_hash"])
        run_id = run_queue.submit(bundle)
        return canonical_response({"run_id": run_id}, status_code=202)

    @app.post("/v1/runs/batch")
    async def post_run_batch(request: Request) -> Response:
        check_auth(request, mutating=True)
        value = body_map(await parse_body(request), "bundle_hashes")
        hashes = value["bundle_hashes"]
        if not isinstance(hashes, list):
            raise ApiError(422, "SCHEMA_VIOLATION", "bundle_hashes must be a list", offending_field="bundle_hashes")
        parallelism = value.get("parallelism", 1)
        if not isinstance(parallelism, int) or parallelism < 1:
            raise ApiError(422, "SCHEMA_VIOLATION", "parallelism must be a positive int", offending_field="parallelism")
        jobs: list[tuple[str, ExperimentBundle]] = []
        for digest in hashes:
            bundle = load_stored_bundle(digest)
            run_id = new_run_id()
            workspace.runs.save(RunRecord(run_id=run_id, bundle_hash=digest, status="QUEUED"))
            jobs.append((run_id, bundle))

        def run_all() -> None:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                for run_id, bundle in jobs:
                    pool.submit(execute, bundle, workspace.stores, workspace.runs, config.limits, run_id)

        threading.Thread(target=run_all, daemon=True).start()
        return canonical_response({"run_ids": [run_id for run_id, _ in jobs]}, status_code=202)

    def load_record(run_id: str) -> RunRecord:
        record = workspace.runs.get(run_id)
        if record is None:
            raise ApiError(404, "NOT_FOUND", f"no run {run_id}")
        return record

    @app.get("/v1/runs/{run_id}")
    async def get_run(run_id: str, request: Request) -> Response:
        check_auth(request, mutating=False)
        return canonical_response(load_record(run_id).to_value())

    @app.get("/v1/runs/{run_id}/log")
    async def get_run_log(run_id: str, request: Request, from_byte: int = 0) -> Response:
        check_auth(request, mutating=False)
        record = load_record(run_id)
        path = workspace.runs.run_dir(record.run_id) / record.log
        data = path.read_bytes() if path.is_file() else b""
        return Response(content=data[max(0, from_byte):], media_type="text/plain; charset=utf-8")

    @app.get("/v1/runs/{run_id}/trace")
    async def get_run_trace(run_id: str, request: Request, user: int = 0) -> Response:
        check_auth(request, mutating=False)
        record = load_record(run_id)
        path = workspace.runs.run_dir(record.run_id) / "outputs" / f"trace.u{user}.jsonl"
        if not path.is_file():
            raise ApiError(404, "NOT_FOUND", f"run {run_id} has no trace for user {user}")
        return Response(content=path.read_bytes(), media_type="application/x-ndjson")

    @app.get("/v1/runs/{run_id}/measures")
    async def get_run_measures(run_id: str, request: Request) -> Response:
        check_auth(request, mutating=False)
        record = load_record(run_id)
        path = workspace.runs.run_dir(record.run_id) / "outputs" / "measures.canon.json"
        if not path.is_file():
            raise ApiError(404, "NOT_FOUND", f"run {run_id} has no measures")
        return Response(content=path.read_bytes(), media_type="application/json")

    @app.post("/v1/runs/{run_id}/verify")
    async def post_run_verify(run_id: str, request: Request) -> Response:
        check_auth(request, mutating=True)
        record = load_record(run_id)
        value = body_map(await parse_body(request), "trace_hashes")
        hashes = value["trace_hashes"]
        if not isinstance(hashes, list) or not all(isinstance(h, str) for h in hashes):
            raise ApiError(422, "SCHEMA_VIOLATION", "trace_hashes must be a list of hex strings", offending_field="trace_hashes")
        bundle = load_stored_bundle(record.bundle_hash)
        result = verify_reproduction(bundle, hashes, workspace.stores, workspace.runs, config.limits)
        return canonical_response(result.to_value())

    # -- templates ------------------------------------------------------------

    @app.get("/v1/templates")
    async def get_templates(request: Request) -> Response:
        check_auth(request, mutating=False)
        return canonical_response({"templates": workspace.templates.list()})

    @app.get("/v1/templates/{name}/{version}")
    async def get_template(name: str, version: str, request: Request) -> Response:
        check_auth(request, mutating=False)
        selector: int | str = version if version == "active" else _parse_version(version)
        try:
            template = workspace.templates.get(name, selector)
        except TemplateNotFound as exc:
            raise ApiError(404, "NOT_FOUND", str(exc)) from exc
        return canonical_response(template.to_value())

    @app.post("/v1/templates")
    async def post_template(request: Request) -> Response:
        check_auth(request, mutating=True)
        value = body_map(await parse_body(request), "template", "files")
        files = value["files"]
        if not isinstance(files, dict) or not all(isinstance(v, str) for v in files.values()):
            raise ApiError(422, "SCHEMA_VIOLATION", "files must map paths to text content", offending_field="files")
        try:
            content = TemplateContent.from_value(value["template"])
        except SchemaViolation as exc:
            raise ApiError(422, "SCHEMA_VIOLATION", str(exc), offending_field=exc.field_path) from exc
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            for rel, text in files.items():
                target = root / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(text, encoding="utf-8")
            try:
                name, version = workspace.templates.publish(content, root)
            except TemplateError as exc:
                raise ApiError(422, exc.code, str(exc)) from exc
        return canonical_response({"name": name, "version": version}, status_code=201)

    # -- components ------------------------------------------------------------

    @app.post("/v1/components/{namespace}/{name}")
    async def post_component(namespace: str, name: str, request: Request) -> Response:
        check_auth(request, mutating=True)
        value = body_map(await parse_body(request), "files", "author", "message")
        files = value["files"]
        if not isinstance(files, dict) or not all(isinstance(v, str) for v in files.values()):
            raise ApiError(422, "SCHEMA_VIOLATION", "files must map paths to text content", offending_field="files")
        tree = {path: text.encode("utf-8") for path, text in files.items()}
        kwargs: dict[str, Any] = {}
        if "expected_parent" in value:
            kwargs["expected_parent"] = value["expected_parent"]
        try:
            commit = workspace.registry.commit_component(
                namespace, name, tree, str(value["author"]), str(value["message"]), **kwargs
            )
        except RegistryError as exc:
            status = 409 if exc.code == CONCURRENT_HEAD else 422
            raise ApiError(status, exc.code, str(exc)) from exc
        except SchemaViolation as exc:
            raise ApiError(422, "SCHEMA_VIOLATION", str(exc), offending_field=exc.field_path) from exc
        return canonical_response(
            {"commit_id": commit.commit_id, "tree_hash": commit.tree_hash, "parent": commit.parent},
            status_code=201,
        )

    @app.get("/v1/components/{commit_id}/tree")
    async def get_component_tree(commit_id: str, request: Request) -> Response:
        check_auth(request, mutating=False)
        from .registry import CommitNotFound

        try:
            commit = workspace.registry.get_commit(commit_id)
            tree = workspace.registry.get_tree(commit_id)
        except CommitNotFound as exc:
            raise ApiError(404, "NOT_FOUND", str(exc)) from exc
        files = {path: data.decode("utf-8", errors="replace") for path, data in sorted(tree.items())}
        return canonical_response({"commit": commit.to_value(), "files": files})

    @app.get("/v1/components")
    async def get_components(request: Request) -> Response:
        check_auth(request, mutating=False)
        return canonical_response({"heads": workspace.registry.heads()})

    @app.post("/v1/components/check")
    async def post_component_check(request: Request) -> Response:
        check_auth(request, mutating=True)
        value = body_map(await parse_body(request), "files")
        files = value["files"]
        if not isinstance(files, dict) or not all(isinstance(v, str) for v in files.values()):
            raise ApiError(422, "SCHEMA_VIOLATION", "files must map paths to text content", offending_field="files")
        tree = {path: text.encode("utf-8") for path, text in files.items()}
        return canonical_response(static_check(tree).to_value())

    return app


def _parse_version(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ApiError(404, "NOT_FOUND", f"bad version selector {raw!r}") from None


def serve(config: ServiceConfig) -> None:
    import uvicorn

    host, _, port = config.listen_address.rpartition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port), log_level="warning")
