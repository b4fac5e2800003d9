"""Store layout shared by the CLI and the API service.

A workspace root holds four sibling stores:
  templates/   environment template store
  registry/    component registry
  bundles/     content-addressed bundle manifests
  runs/        run directories and records
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from .bundle import ExperimentBundle, bundle_hash, bundle_from_value
from .canonical import read_canonical_file, write_canonical_file
from .executor import RunStore, Stores
from .registry import ComponentRegistry
from .templates import TemplateStore


class BundleStore:
    """Bundles stored by their content hash; puts are idempotent."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, digest: str) -> Path:
        return self.root / f"{digest}.canon.json"

    def put(self, bundle: ExperimentBundle) -> str:
        digest = bundle_hash(bundle)
        path = self._path(digest)
        if not path.is_file():
            write_canonical_file(path, bundle.to_value())
        return digest

    def get(self, digest: str) -> Optional[ExperimentBundle]:
        path = self._path(digest)
        if not path.is_file():
            return None
        return bundle_from_value(read_canonical_file(path))

    def list_hashes(self) -> list[str]:
        return sorted(p.name.removesuffix(".canon.json") for p in self.root.glob("*.canon.json"))


class Workspace:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.templates = TemplateStore(self.root / "templates")
        self.registry = ComponentRegistry(self.root / "registry")
        self.bundles = BundleStore(self.root / "bundles")
        self.runs = RunStore(self.root / "runs")

    @property
    def stores(self) -> Stores:
        return Stores(templates=self.templates, registry=self.registry)
