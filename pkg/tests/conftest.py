from __future__ import annotations

from pathlib import Path

import pytest

from simdesk.demo import install_demo, stop_after_first_tree
from simdesk.workspace import Workspace

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture()
def workspace(tmp_path: Path) -> Workspace:
    """Fresh workspace with the demo template published as (demo, 1)."""
    ws = Workspace(tmp_path / "store")
    install_demo(ws.templates)
    return ws


@pytest.fixture()
def workspace_with_component(workspace: Workspace):
    commit = workspace.registry.commit_component(
        "demo", "stop_after_first", stop_after_first_tree(), "demo", "initial import"
    )
    return workspace, commit


@pytest.fixture()
def fixtures_dir() -> Path:
    return FIXTURES
