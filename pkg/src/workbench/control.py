"""Control plane: wires every subsystem together behind one facade.

The facade owns construction order and the cross-module contracts the
individual stores cannot see on their own, e.g. creating a project also
creates its filesystem root, and creating a dataset registers the name in
tenancy and materializes the tree in projectfs.
"""

from __future__ import annotations

import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .backends import SimDriver
from .errors import InvalidName, Unauthorized
from .gateway import SparkGateway
from .logagg import LogAggregator, LogEntry
from .projectfs import GcReport, MountView, ProjectFS
from .proxy import NODE_PORT_RANGE, PortPool, RouteTable
from .scheduler import CapacityPlan, Cluster, NodeState, plan_capacity
from .tenancy import (
    USER_ID_RE,
    DatasetShare,
    Membership,
    Permission,
    Project,
    Role,
    Tenancy,
)
from .workspaces import (
    DEFAULT_LIVY_URL,
    DeploymentMode,
    WorkspaceInstance,
    WorkspaceManager,
    WorkspaceRequest,
)

USER_TOKEN_PREFIX = "usr_"


class UserAuth:
    """Login stub: any (user, password) pair yields a fresh bearer token.

    Real identity providers are deliberately out of scope; the token is the
    only thing downstream code ever sees.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._tokens: dict[str, str] = {}

    def login(self, user: str, password: str) -> str:
        if not USER_ID_RE.match(user or ""):
            raise InvalidName(f"invalid user id {user!r}")
        if not password:
            raise Unauthorized("password required")
        token = USER_TOKEN_PREFIX + secrets.token_hex(24)
        with self._lock:
            self._tokens[token] = user
        return token

    def resolve(self, token: str | None) -> str | None:
        if not token:
            return None
        with self._lock:
            return self._tokens.get(token)


@dataclass
class ControlPlaneConfig:
    data_dir: Path
    mode: DeploymentMode = DeploymentMode.KUBERNETES
    backend_host: str = "127.0.0.1"
    nodeport_range: tuple[int, int] = NODE_PORT_RANGE
    enforce_interval: float = 0.1
    livy_url: str = DEFAULT_LIVY_URL
    gateway_budget_mem_mib: int = 65536
    gateway_budget_cores: int = 64
    gateway_startup_delay: float = 0.0
    log_retention_max_age: float | None = None
    tail_interval: float = 0.05
    default_nodes: list[dict] = field(default_factory=list)


class ControlPlane:
    def __init__(self, config: ControlPlaneConfig):
        self.config = config
        data_dir = Path(config.data_dir)
        data_dir.mkdir(parents=True, exist_ok=True)
        self.tenancy = Tenancy()
        self.fs = ProjectFS(self.tenancy, data_dir / "fs")
        self.cluster = Cluster()
        self.routes = RouteTable()
        self.ports = PortPool(*config.nodeport_range)
        self.driver = SimDriver(
            data_dir / "logvolumes",
            enforce_interval=config.enforce_interval,
            host=config.backend_host,
        )
        self.logs = LogAggregator(
            self.tenancy,
            store_dir=data_dir / "logstore",
            retention_max_age=config.log_retention_max_age,
        )
        self.workspaces = WorkspaceManager(
            tenancy=self.tenancy,
            fs=self.fs,
            cluster=self.cluster,
            routes=self.routes,
            ports=self.ports,
            driver=self.driver,
            log_aggregator=self.logs,
            mode=config.mode,
            backend_host=config.backend_host,
            livy_url=config.livy_url,
            tail_interval=config.tail_interval,
        )
        self.gateway = SparkGateway(
            token_resolver=self.workspaces.resolve_token,
            tenancy=self.tenancy,
            budget_mem_mib=config.gateway_budget_mem_mib,
            budget_cores=config.gateway_budget_cores,
            startup_delay=config.gateway_startup_delay,
        )
        self.auth = UserAuth()
        for node in config.default_nodes:
            self.cluster.register_node(**node)

    # -- tenancy plus filesystem wiring -----------------------------------

    def create_project(self, name: str, owner: str) -> Project:
        project = self.tenancy.create_project(name, owner)
        self.fs.ensure_project_root(name)
        return project

    def add_member(self, project: str, user: str, role: Role, actor: str) -> Membership:
        return self.tenancy.add_member(project, user, role, actor)

    def create_dataset(self, project: str, dataset: str, actor: str) -> str:
        name = self.tenancy.create_dataset(project, dataset, actor)
        self.fs.ensure_dataset(project, name)
        return name

    def delete_dataset(self, project: str, dataset: str, actor: str) -> None:
        self.tenancy.delete_dataset(project, dataset, actor)
        self.fs.drop_dataset(project, dataset)

    def share_dataset(
        self, source: str, dataset: str, target: str, permission: Permission, actor: str
    ) -> DatasetShare:
        return self.tenancy.share_dataset(source, dataset, target, permission, actor)

    def revoke_share(self, source: str, dataset: str, target: str, actor: str) -> None:
        self.tenancy.revoke_share(source, dataset, target, actor)

    # -- workspaces ------------------------------------------------------

    def start_workspace(self, req: WorkspaceRequest, actor: str) -> WorkspaceInstance:
        return self.workspaces.start_workspace(req, actor)

    def stop_workspace(self, project: str, user: str, actor: str) -> WorkspaceInstance:
        return self.workspaces.stop_workspace(project, user, actor)

    def workspace_status(self, project: str, user: str) -> WorkspaceInstance:
        return self.workspaces.workspace_status(project, user)

    # -- filesystem access on behalf of a user -----------------------------

    def mount_view(self, project: str, user: str) -> MountView:
        return self.fs.mount_view(project, user)

    def fs_read(self, project: str, actor: str, path: str) -> bytes:
        return self.fs.read(self.fs.mount_view(project, actor), path)

    def fs_write(self, project: str, actor: str, path: str, data: bytes) -> None:
        self.fs.write(self.fs.mount_view(project, actor), path, data)

    def gc_check(self) -> GcReport:
        return self.fs.gc_check()

    # -- cluster -----------------------------------------------------------

    def register_node(self, **kwargs) -> NodeState:
        return self.cluster.register_node(**kwargs)

    def nodes(self) -> list[NodeState]:
        return self.cluster.nodes_snapshot()

    def capacity_plan(self, servers: int) -> CapacityPlan:
        return plan_capacity(servers)

    # -- logs ---------------------------------------------------------------

    def query_logs(
        self,
        project: str,
        actor: str,
        user: str | None = None,
        from_ts: float | None = None,
        to_ts: float | None = None,
        limit: int | None = None,
    ) -> list[LogEntry]:
        return self.logs.query(project, actor, user=user, from_ts=from_ts, to_ts=to_ts, limit=limit)

    # -- teardown -------------------------------------------------------------

    def shutdown(self) -> None:
        for instance in self.workspaces.instances_snapshot():
            if instance.state.value in ("Running", "Starting"):
                try:
                    self.workspaces.stop_workspace(instance.project, instance.user, instance.user)
                except Exception:  # noqa: BLE001 - best effort teardown
                    pass
        self.driver.shutdown()
