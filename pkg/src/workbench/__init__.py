"""Multi-tenant workspace orchestration control plane.

Projects group users and datasets; each member can run one on-demand,
resource-limited workspace server instance reached through an
authenticating reverse proxy. A reservation scheduler admits instances
onto worker nodes, a shared project filesystem persists data across
instance lifetimes and shares datasets without copying them, a gateway
brokers compute sessions, and a log aggregator serves tenant-scoped
queries. Backends are pluggable; the bundled driver simulates container
runtimes with real local HTTP servers.
"""

from .backends import BackendDriver, BackendHandle, BackendSpec, BackendStatus, SimDriver
from .control import ControlPlane, ControlPlaneConfig, UserAuth
from .deployment import (
    DeploymentSpec,
    container_name,
    deployment_name,
    render_deployment_spec,
)
from .errors import WorkbenchError
from .gateway import Session, SessionState, SparkGateway, Statement, StatementState, evaluate
from .logagg import FileTailer, LogAggregator, LogEntry
from .projectfs import MountView, ProjectFS, StoredObject
from .proxy import PortPool, ReverseProxy, RouteEntry, RouteTable
from .scheduler import (
    CapacityPlan,
    Cluster,
    FillReport,
    NodeState,
    Reservation,
    plan_capacity,
    replay_audit,
    simulate_fill,
    uniform_nodes,
)
from .sparkconfig import SparkSessionConfig, parse_config_yml, render_config_yml
from .tenancy import (
    Action,
    DatasetShare,
    Decision,
    Membership,
    Permission,
    Project,
    Role,
    Tenancy,
)
from .webapi import ApiServer
from .workspaces import (
    DeploymentMode,
    WorkspaceInstance,
    WorkspaceManager,
    WorkspaceRequest,
    WorkspaceState,
)

__all__ = [
    "Action",
    "ApiServer",
    "BackendDriver",
    "BackendHandle",
    "BackendSpec",
    "BackendStatus",
    "CapacityPlan",
    "Cluster",
    "ControlPlane",
    "ControlPlaneConfig",
    "DatasetShare",
    "Decision",
    "DeploymentMode",
    "DeploymentSpec",
    "FileTailer",
    "FillReport",
    "LogAggregator",
    "LogEntry",
    "Membership",
    "MountView",
    "NodeState",
    "Permission",
    "PortPool",
    "Project",
    "ProjectFS",
    "Reservation",
    "ReverseProxy",
    "Role",
    "RouteEntry",
    "RouteTable",
    "Session",
    "SessionState",
    "SimDriver",
    "SparkGateway",
    "SparkSessionConfig",
    "Statement",
    "StatementState",
    "StoredObject",
    "Tenancy",
    "UserAuth",
    "WorkbenchError",
    "WorkspaceInstance",
    "WorkspaceManager",
    "WorkspaceRequest",
    "WorkspaceState",
    "container_name",
    "deployment_name",
    "evaluate",
    "parse_config_yml",
    "plan_capacity",
    "render_config_yml",
    "render_deployment_spec",
    "replay_audit",
    "simulate_fill",
    "uniform_nodes",
]

__version__ = "0.1.0"
