"""Per-user workspace lifecycle orchestration.

Starting a workspace is a multi-step saga: admit (uniqueness check plus
node reservation, atomically), allocate an external port, mint the
instance token, mount the project filesystem view, render the deployment
document, create the backend, attach the log collector, and register the
proxy route. Any step failure unwinds every completed step in reverse and
leaves the instance in Failed(reason) holding no resources.

At most one instance per (project, user) is live at a time; Stopped and
Failed are terminal. All state transitions are recorded so a replay can
verify that only legal edges ever occur.
"""

from __future__ import annotations

import copy
import logging
import secrets
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum

from .backends import BackendDriver, BackendMounts, BackendSpec
from .deployment import (
    INTERNAL_PORT,
    DeploymentSpec,
    container_name,
    deployment_name,
    render_deployment_spec,
)
from .errors import (
    AlreadyRunning,
    Forbidden,
    InsufficientResources,
    InvalidRequest,
    NoSuchInstance,
    NotAMember,
    PortInUse,
    WorkbenchError,
)
from .logagg import FileTailer, LogAggregator
from .projectfs import ProjectFS
from .proxy import PortPool, RouteTable, make_route
from .scheduler import Cluster, Reservation
from .sparkconfig import SparkSessionConfig, default_config
from .tenancy import Action, Decision, Role, Tenancy

log = logging.getLogger(__name__)

DEFAULT_MEMORY_LIMIT_MIB = 2048
DEFAULT_CPU_LIMIT_MILLICORES = 1000
DEFAULT_LIVY_URL = "http://127.0.0.1:8998"

TOKEN_PREFIX = "wst_"

# Bind retries when an allocated external port is held by another process.
PORT_BIND_ATTEMPTS = 25


class WorkspaceState(Enum):
    REQUESTED = "Requested"
    SCHEDULED = "Scheduled"
    STARTING = "Starting"
    RUNNING = "Running"
    STOPPING = "Stopping"
    STOPPED = "Stopped"
    FAILED = "Failed"


TERMINAL_STATES = frozenset({WorkspaceState.STOPPED, WorkspaceState.FAILED})

LEGAL_WORKSPACE_TRANSITIONS = frozenset(
    {
        (WorkspaceState.REQUESTED, WorkspaceState.SCHEDULED),
        (WorkspaceState.SCHEDULED, WorkspaceState.STARTING),
        (WorkspaceState.STARTING, WorkspaceState.RUNNING),
        (WorkspaceState.RUNNING, WorkspaceState.STOPPING),
        (WorkspaceState.STOPPING, WorkspaceState.STOPPED),
    }
    | {(s, WorkspaceState.FAILED) for s in WorkspaceState if s not in TERMINAL_STATES}
)


class DeploymentMode(Enum):
    DOCKER = "docker"
    KUBERNETES = "kubernetes"


@dataclass
class WorkspaceRequest:
    project: str
    user: str
    memory_limit_mib: int = DEFAULT_MEMORY_LIMIT_MIB
    cpu_limit_millicores: int = DEFAULT_CPU_LIMIT_MILLICORES
    spark: SparkSessionConfig | None = None

    def validate(self) -> None:
        if self.memory_limit_mib <= 0 or self.cpu_limit_millicores <= 0:
            raise InvalidRequest("memory and cpu limits must be positive")
        if self.spark is not None:
            self.spark.validate()


@dataclass
class WorkspaceInstance:
    id: str
    project: str
    user: str
    state: WorkspaceState
    node: str | None = None
    internal_port: int = INTERNAL_PORT
    node_port: int | None = None
    token: str | None = None
    spec: DeploymentSpec | None = None
    backend_id: str | None = None
    backend_name: str | None = None
    failure_reason: str | None = None
    created_at: float = field(default_factory=time.time)
    started_at: float | None = None
    stopped_at: float | None = None

    def snapshot(self) -> "WorkspaceInstance":
        return copy.copy(self)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "project": self.project,
            "user": self.user,
            "state": self.state.value,
            "node": self.node,
            "internal_port": self.internal_port,
            "node_port": self.node_port,
            "backend_name": self.backend_name,
            "failure_reason": self.failure_reason,
            "created_at": self.created_at,
            "started_at": self.started_at,
            "stopped_at": self.stopped_at,
        }


@dataclass(frozen=True)
class TransitionEvent:
    seq: int
    instance_id: str
    from_state: WorkspaceState | None  # None marks instance creation
    to_state: WorkspaceState
    reason: str | None = None


class WorkspaceManager:
    def __init__(
        self,
        tenancy: Tenancy,
        fs: ProjectFS,
        cluster: Cluster,
        routes: RouteTable,
        ports: PortPool,
        driver: BackendDriver,
        log_aggregator: LogAggregator | None = None,
        mode: DeploymentMode = DeploymentMode.KUBERNETES,
        backend_host: str = "127.0.0.1",
        livy_url: str = DEFAULT_LIVY_URL,
        tail_interval: float = 0.05,
    ):
        self.tenancy = tenancy
        self.fs = fs
        self.cluster = cluster
        self.routes = routes
        self.ports = ports
        self.driver = driver
        self.logs = log_aggregator
        self.mode = mode
        self.backend_host = backend_host
        self.livy_url = livy_url
        self.tail_interval = tail_interval
        self._lock = threading.RLock()
        self._pair_locks: dict[tuple[str, str], threading.Lock] = {}
        self._instances: dict[tuple[str, str], WorkspaceInstance] = {}
        self._by_id: dict[str, WorkspaceInstance] = {}
        self._tokens: dict[str, tuple[str, str, str]] = {}
        self._tailers: dict[str, FileTailer] = {}
        self._transitions: list[TransitionEvent] = []
        self._seq = 0

    # -- bookkeeping ---------------------------------------------------------

    def _pair_lock(self, pair: tuple[str, str]) -> threading.Lock:
        with self._lock:
            return self._pair_locks.setdefault(pair, threading.Lock())

    def _record(self, instance: WorkspaceInstance, to: WorkspaceState, reason: str | None = None) -> None:
        with self._lock:
            from_state = instance.state
            if (from_state, to) not in LEGAL_WORKSPACE_TRANSITIONS:
                raise AssertionError(f"illegal transition {from_state} -> {to}")
            self._seq += 1
            self._transitions.append(TransitionEvent(self._seq, instance.id, from_state, to, reason))
            instance.state = to

    def _record_creation(self, instance: WorkspaceInstance) -> None:
        self._seq += 1
        self._transitions.append(
            TransitionEvent(self._seq, instance.id, None, instance.state)
        )

    def transitions_snapshot(self) -> list[TransitionEvent]:
        with self._lock:
            return list(self._transitions)

    def instances_snapshot(self) -> list[WorkspaceInstance]:
        with self._lock:
            return [i.snapshot() for i in self._by_id.values()]

    # -- tokens ---------------------------------------------------------------

    def issue_token(self, project: str, user: str) -> str:
        """Mint a fresh opaque bearer token for a member's instance."""
        if not self.tenancy.is_member(project, user):
            raise NotAMember(f"{user!r} is not a member of {project!r}")
        return TOKEN_PREFIX + secrets.token_hex(32)

    def resolve_token(self, token: str) -> tuple[str, str] | None:
        """(project, user) if the token belongs to a live instance."""
        with self._lock:
            binding = self._tokens.get(token)
            if binding is None:
                return None
            project, user, instance_id = binding
            instance = self._by_id.get(instance_id)
            if instance is None or instance.state in TERMINAL_STATES:
                return None
            return (project, user)

    # -- lifecycle --------------------------------------------------------------

    def start_workspace(self, req: WorkspaceRequest, actor: str) -> WorkspaceInstance:
        req.validate()
        if self.tenancy.authorize(actor, req.project, Action.START_WORKSPACE) is not Decision.ALLOW:
            raise Forbidden(f"{actor!r} may not start workspaces in {req.project!r}")
        if not self.tenancy.is_member(req.project, req.user):
            raise NotAMember(f"{req.user!r} is not a member of {req.project!r}")
        pair = (req.project, req.user)
        with self._pair_lock(pair):
            instance = self._admit(req, pair)
            undo: list = [lambda: self.cluster.release(instance.id)]
            try:
                self._provision(req, instance, undo)
            except Exception as exc:
                self._unwind(undo)
                reason = f"{type(exc).__name__}: {exc}"
                self._record(instance, WorkspaceState.FAILED, reason=reason)
                instance.failure_reason = reason
                instance.stopped_at = time.time()
                raise
            self._record(instance, WorkspaceState.RUNNING)
            instance.started_at = time.time()
            return instance.snapshot()

    def _admit(self, req: WorkspaceRequest, pair: tuple[str, str]) -> WorkspaceInstance:
        """Uniqueness check plus reservation as one atomic admission step."""
        with self._lock:
            existing = self._instances.get(pair)
            if existing is not None and existing.state not in TERMINAL_STATES:
                raise AlreadyRunning(
                    f"instance for {pair} is {existing.state.value}"
                )
            instance = WorkspaceInstance(
                id=f"ws-{uuid.uuid4().hex[:12]}",
                project=req.project,
                user=req.user,
                state=WorkspaceState.REQUESTED,
            )
            self._instances[pair] = instance
            self._by_id[instance.id] = instance
            self._record_creation(instance)
            try:
                node = self.cluster.place(
                    Reservation(instance.id, req.memory_limit_mib, req.cpu_limit_millicores)
                )
            except InsufficientResources as exc:
                reason = f"InsufficientResources: {exc}"
                self._record(instance, WorkspaceState.FAILED, reason=reason)
                instance.failure_reason = reason
                instance.stopped_at = time.time()
                raise
            instance.node = node
            self._record(instance, WorkspaceState.SCHEDULED)
            return instance

    def _provision(self, req: WorkspaceRequest, instance: WorkspaceInstance, undo: list) -> None:
        project, user = req.project, req.user

        token = self.issue_token(project, user)
        with self._lock:
            self._tokens[token] = (project, user, instance.id)
        instance.token = token
        undo.append(lambda: self._drop_token(token))

        view = self.fs.mount_view(project, user)
        lib_path = self.fs.package_lib_path(view)

        spark_cfg = req.spark if req.spark is not None else default_config(self.livy_url)
        backend_name = (
            deployment_name(project, user)
            if self.mode is DeploymentMode.KUBERNETES
            else container_name(project, user)
        )
        instance.backend_name = backend_name

        self._record(instance, WorkspaceState.STARTING)
        # A pool port can be transiently held by an unrelated socket (the
        # OS ephemeral range may overlap the pool), so creation retries on
        # fresh ports; burnt ones go back to the pool once a bind succeeds.
        handle = None
        node_port: int | None = None
        burnt: list[int] = []
        try:
            for _ in range(PORT_BIND_ATTEMPTS):
                node_port = self.ports.allocate()
                spec = render_deployment_spec(req, instance.node, node_port, token, spark_cfg)
                backend_spec = BackendSpec(
                    name=backend_name,
                    listen_port=node_port,
                    memory_limit_mib=req.memory_limit_mib,
                    cpu_limit_millicores=req.cpu_limit_millicores,
                    env={
                        "R_LIBS_USER": lib_path,
                        "WORKBENCH_PROJECT": project,
                        "WORKBENCH_USER": user,
                    },
                    mounts=BackendMounts(
                        view=view,
                        config_map=spec.config_map.entries,
                        secret=spec.secret.entries,
                    ),
                )
                try:
                    handle = self.driver.create_instance(backend_spec)
                    break
                except PortInUse:
                    burnt.append(node_port)
                    node_port = None
            else:
                raise PortInUse(f"no bindable port after {PORT_BIND_ATTEMPTS} attempts")
        except BaseException:
            if node_port is not None:
                self.ports.release(node_port)
            raise
        finally:
            for port in burnt:
                self.ports.release(port)
        instance.node_port = node_port
        instance.spec = spec
        undo.append(lambda: self.ports.release(node_port))
        instance.backend_id = handle.id
        undo.append(lambda: self.driver.destroy_instance(handle.id))

        if self.logs is not None:
            self.logs.register_instance(instance.id, project, user)
            volume = self.driver.log_volume(handle.id)
            if volume is not None:
                tailer = FileTailer(volume, instance.id, self.logs, interval=self.tail_interval)
                tailer.start()
                with self._lock:
                    self._tailers[instance.id] = tailer
                undo.append(lambda: self._drop_tailer(instance.id))

        route = make_route(project, user, f"{self.backend_host}:{node_port}", token)
        self.routes.register(route)
        undo.append(lambda: self.routes.unregister(project, user))

    def _unwind(self, undo: list) -> None:
        for step in reversed(undo):
            try:
                step()
            except WorkbenchError:
                pass
            except Exception:  # noqa: BLE001 - rollback must not mask the cause
                log.exception("rollback step failed")

    def _drop_token(self, token: str) -> None:
        with self._lock:
            self._tokens.pop(token, None)

    def _drop_tailer(self, instance_id: str) -> None:
        with self._lock:
            tailer = self._tailers.pop(instance_id, None)
        if tailer is not None:
            tailer.stop()

    def stop_workspace(self, project: str, user: str, actor: str) -> WorkspaceInstance:
        pair = (project, user)
        with self._pair_lock(pair):
            with self._lock:
                instance = self._instances.get(pair)
            if instance is None:
                raise NoSuchInstance(f"no workspace instance for {pair}")
            if actor != user and self.tenancy.role_of(project, actor) is not Role.DATA_OWNER:
                raise Forbidden(f"{actor!r} may not stop {pair}")
            if instance.state is WorkspaceState.STOPPED:
                raise NoSuchInstance(f"instance for {pair} is already stopped")
            if instance.state is WorkspaceState.FAILED:
                # Rollback already released everything; just acknowledge.
                self._release_resources(instance)
                instance.stopped_at = time.time()
                return instance.snapshot()
            self._record(instance, WorkspaceState.STOPPING)
            self._release_resources(instance)
            self._record(instance, WorkspaceState.STOPPED)
            instance.stopped_at = time.time()
            return instance.snapshot()

    def _release_resources(self, instance: WorkspaceInstance) -> None:
        """Teardown shared across stop and failed-instance cleanup.

        The backend is destroyed before the log tailer stops so the final
        shutdown lines still reach the aggregator.
        """
        try:
            self.routes.unregister(instance.project, instance.user)
        except WorkbenchError:
            pass
        if instance.backend_id is not None:
            try:
                self.driver.destroy_instance(instance.backend_id)
            except WorkbenchError:
                pass
        self._drop_tailer(instance.id)
        if instance.node_port is not None:
            self.ports.release(instance.node_port)
        try:
            self.cluster.release(instance.id)
        except WorkbenchError:
            pass
        if instance.token is not None:
            self._drop_token(instance.token)

    def workspace_status(self, project: str, user: str) -> WorkspaceInstance:
        with self._lock:
            instance = self._instances.get((project, user))
            if instance is None:
                raise NoSuchInstance(f"no workspace instance for ({project}, {user})")
            return instance.snapshot()
