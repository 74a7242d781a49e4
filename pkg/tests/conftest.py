import shutil
import tempfile
from pathlib import Path

import pytest

from workbench.control import ControlPlane, ControlPlaneConfig
from workbench.projectfs import ProjectFS
from workbench.tenancy import Role, Tenancy


@pytest.fixture
def tenancy():
    t = Tenancy()
    t.create_project("demo", "alice")
    t.add_member("demo", "bob", Role.DATA_SCIENTIST, actor="alice")
    t.create_project("lab2", "carol")
    return t


@pytest.fixture
def fs(tenancy, tmp_path):
    f = ProjectFS(tenancy, tmp_path / "fs")
    f.ensure_project_root("demo")
    f.ensure_project_root("lab2")
    return f


@pytest.fixture
def control_plane(tmp_path):
    cp = ControlPlane(
        ControlPlaneConfig(
            data_dir=tmp_path / "data",
            enforce_interval=0.05,
            tail_interval=0.02,
            gateway_startup_delay=0.0,
        )
    )
    yield cp
    cp.shutdown()


def make_control_plane(**overrides) -> ControlPlane:
    """Control plane on a throwaway data dir; caller must shutdown()."""
    data_dir = Path(tempfile.mkdtemp(prefix="workbench-test-"))
    config = ControlPlaneConfig(
        data_dir=data_dir, enforce_interval=0.05, tail_interval=0.02, **overrides
    )
    cp = ControlPlane(config)
    cp._test_data_dir = data_dir  # type: ignore[attr-defined]
    return cp


def cleanup_control_plane(cp: ControlPlane) -> None:
    cp.shutdown()
    shutil.rmtree(getattr(cp, "_test_data_dir", ""), ignore_errors=True)
