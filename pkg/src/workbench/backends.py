"""Backend driver contract plus the simulated container runtime.

The workspace manager only ever talks to a ``BackendDriver``; a real
container runtime would implement the same four calls. Driver semantics:

    create_instance(spec)   spec.name unused among live instances and
                            spec.listen_port bindable, else NameInUse /
                            PortInUse. On return the instance is Running
                            and serving HTTP on listen_port.
    destroy_instance(id)    stops the instance; Running becomes Exited(0),
                            an already-terminal status is preserved. A
                            second destroy of the same id is NoSuchInstance.
                            Never touches mounted project data.
    enforce_limits(id)      immediate limit check; returns the (possibly
                            updated) status.
    list_instances()        snapshot of every handle since process start,
                            terminal ones included.

The sim driver backs each instance with a real HTTP stub on localhost:
``GET /health`` and ``GET /whoami`` identify the instance, and
``POST /allocate {"bytes": n}`` grows its simulated memory footprint.
Memory limits are enforced by a periodic sweep: any instance whose
footprint exceeds its limit (strictly; the limit itself is allowed) is
killed with status OOMKilled within one enforcement interval, leaving all
other instances untouched. CPU limits are recorded and admission-checked
upstream but not throttled here; a stub serving canned responses has no
meaningful CPU load to shape.
"""

from __future__ import annotations

import datetime as _dt
import errno
import json
import logging
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping

from .errors import BackendError, NameInUse, NoSuchInstance, PortInUse
from .httpkit import HttpService, QuietHandler
from .projectfs import MountView

log = logging.getLogger(__name__)

DEFAULT_ENFORCE_INTERVAL = 0.1


class BackendStatus(Enum):
    RUNNING = "Running"
    EXITED = "Exited"
    OOM_KILLED = "OOMKilled"


@dataclass(frozen=True)
class BackendMounts:
    view: MountView | None
    config_map: Mapping[str, str]
    secret: Mapping[str, bytes]


@dataclass(frozen=True)
class BackendSpec:
    name: str
    listen_port: int
    memory_limit_mib: int
    cpu_limit_millicores: int
    env: Mapping[str, str]
    mounts: BackendMounts

    @property
    def project(self) -> str:
        return self.env.get("WORKBENCH_PROJECT", "")

    @property
    def user(self) -> str:
        return self.env.get("WORKBENCH_USER", "")


@dataclass
class BackendHandle:
    id: str
    spec: BackendSpec
    status: BackendStatus
    exit_code: int | None = None

    def status_string(self) -> str:
        if self.status is BackendStatus.EXITED:
            return f"Exited({self.exit_code})"
        return self.status.value


class BackendDriver(ABC):
    """Contract between the workspace manager and a container runtime."""

    @abstractmethod
    def create_instance(self, spec: BackendSpec) -> BackendHandle: ...

    @abstractmethod
    def destroy_instance(self, instance_id: str) -> BackendHandle: ...

    @abstractmethod
    def enforce_limits(self, instance_id: str) -> BackendStatus: ...

    @abstractmethod
    def list_instances(self) -> list[BackendHandle]: ...

    def log_volume(self, instance_id: str) -> Path | None:
        """Path of the instance's log volume, if the runtime exposes one."""
        return None


def _iso_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class _StubHandler(QuietHandler):
    def _stub(self) -> "_StubInstance":
        return self.server.stub  # type: ignore[attr-defined]

    def do_GET(self):
        stub = self._stub()
        stub.record(self.command, self.path)
        if self.path == "/health":
            self.send_json(
                200,
                {"name": stub.spec.name, "project": stub.spec.project, "user": stub.spec.user},
            )
        elif self.path == "/whoami":
            self.send_bytes(200, stub.spec.name.encode(), "text/plain; charset=utf-8")
        elif self.path == "/mounts":
            self.send_json(
                200,
                {
                    "view_root": stub.spec.mounts.view.root if stub.spec.mounts.view else None,
                    "config_map": sorted(stub.spec.mounts.config_map),
                    "secret": sorted(stub.spec.mounts.secret),
                    "env": dict(stub.spec.env),
                },
            )
        elif self.path == "/config/config.yml":
            content = stub.spec.mounts.config_map.get("config.yml")
            if content is None:
                self.send_json(404, {"error": "NotFound"})
            else:
                self.send_bytes(200, content.encode(), "text/plain; charset=utf-8")
        else:
            self.send_json(404, {"error": "NotFound", "message": self.path})

    def do_POST(self):
        stub = self._stub()
        stub.record(self.command, self.path)
        if self.path == "/allocate":
            try:
                payload = self.read_json()
                amount = int(payload["bytes"])
            except (ValueError, KeyError, json.JSONDecodeError):
                self.send_json(400, {"error": "InvalidRequest", "message": "expected {bytes: n}"})
                return
            total = stub.allocate(amount)
            self.send_json(200, {"allocated_bytes": total})
        else:
            self.send_json(404, {"error": "NotFound", "message": self.path})


@dataclass
class _StubInstance:
    spec: BackendSpec
    service: HttpService
    log_path: Path
    allocated_bytes: int = 0
    requests: list[tuple[str, str]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def record(self, method: str, path: str) -> None:
        with self._lock:
            self.requests.append((method, path))

    def allocate(self, amount: int) -> int:
        with self._lock:
            self.allocated_bytes += amount
            total = self.allocated_bytes
        self.emit_log("INFO", f"allocated {amount} bytes (total {total})")
        return total

    def emit_log(self, level: str, message: str) -> None:
        with self._lock:
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(f"{_iso_now()} {level} {message}\n")


class SimDriver(BackendDriver):
    def __init__(
        self,
        log_dir: str | Path,
        enforce_interval: float = DEFAULT_ENFORCE_INTERVAL,
        host: str = "127.0.0.1",
    ):
        self._host = host
        self._log_dir = Path(log_dir)
        self._log_dir.mkdir(parents=True, exist_ok=True)
        self.enforce_interval = enforce_interval
        self._lock = threading.RLock()
        self._handles: dict[str, BackendHandle] = {}
        self._stubs: dict[str, _StubInstance] = {}
        self._request_archive: dict[str, list[tuple[str, str]]] = {}
        self._destroyed: set[str] = set()
        self._next_id = 0
        self._closed = False
        self._sweeper = threading.Thread(target=self._sweep_loop, daemon=True)
        self._sweeper.start()

    # -- driver contract ----------------------------------------------------

    def create_instance(self, spec: BackendSpec) -> BackendHandle:
        with self._lock:
            if self._closed:
                raise BackendError("driver is shut down")
            for handle in self._handles.values():
                if handle.status is BackendStatus.RUNNING and handle.spec.name == spec.name:
                    raise NameInUse(f"backend name {spec.name!r} is live")
            try:
                service = HttpService(_StubHandler, self._host, spec.listen_port)
            except OSError as exc:
                if exc.errno in (errno.EADDRINUSE, errno.EACCES):
                    raise PortInUse(f"port {spec.listen_port} unavailable: {exc}") from exc
                raise BackendError(str(exc)) from exc
            if spec.listen_port == 0:
                spec = replace(spec, listen_port=service.port)
            self._next_id += 1
            instance_id = f"backend-{self._next_id:04d}"
            stub = _StubInstance(
                spec=spec,
                service=service,
                log_path=self._log_dir / f"{spec.name}.log",
            )
            service.server.stub = stub  # type: ignore[attr-defined]
            service.start()
            handle = BackendHandle(id=instance_id, spec=spec, status=BackendStatus.RUNNING)
            self._handles[instance_id] = handle
            self._stubs[instance_id] = stub
        stub.emit_log("INFO", f"workspace server {spec.name} listening on port {spec.listen_port}")
        return handle

    def destroy_instance(self, instance_id: str) -> BackendHandle:
        with self._lock:
            handle = self._handles.get(instance_id)
            if handle is None or instance_id in self._destroyed:
                raise NoSuchInstance(f"no backend instance {instance_id!r}")
            self._destroyed.add(instance_id)
            stub = self._stubs.pop(instance_id, None)
            if stub is not None:
                self._request_archive[instance_id] = list(stub.requests)
            if handle.status is BackendStatus.RUNNING:
                handle.status = BackendStatus.EXITED
                handle.exit_code = 0
        if stub is not None:
            stub.emit_log("INFO", f"workspace server {handle.spec.name} stopped")
            stub.service.stop()
        return handle

    def enforce_limits(self, instance_id: str) -> BackendStatus:
        with self._lock:
            handle = self._handles.get(instance_id)
            if handle is None:
                raise NoSuchInstance(f"no backend instance {instance_id!r}")
            stub = self._stubs.get(instance_id)
        if handle.status is BackendStatus.RUNNING and stub is not None:
            limit_bytes = handle.spec.memory_limit_mib * 1024 * 1024
            if stub.allocated_bytes > limit_bytes:
                self._oom_kill(instance_id, handle, stub, limit_bytes)
        return handle.status

    def list_instances(self) -> list[BackendHandle]:
        with self._lock:
            return sorted(self._handles.values(), key=lambda h: h.id)

    # -- helpers ------------------------------------------------------------

    def get(self, instance_id: str) -> BackendHandle:
        with self._lock:
            handle = self._handles.get(instance_id)
            if handle is None:
                raise NoSuchInstance(f"no backend instance {instance_id!r}")
            return handle

    def stub_requests(self, instance_id: str) -> list[tuple[str, str]]:
        """Requests observed by the instance; usable after teardown."""
        with self._lock:
            stub = self._stubs.get(instance_id)
            if stub is None:
                return list(self._request_archive.get(instance_id, []))
            return list(stub.requests)

    def log_volume(self, instance_id: str) -> Path | None:
        with self._lock:
            handle = self._handles.get(instance_id)
        if handle is None:
            return None
        return self._log_dir / f"{handle.spec.name}.log"

    def _oom_kill(self, instance_id: str, handle: BackendHandle, stub: _StubInstance, limit: int) -> None:
        with self._lock:
            if handle.status is not BackendStatus.RUNNING:
                return
            handle.status = BackendStatus.OOM_KILLED
            self._stubs.pop(instance_id, None)
            self._request_archive[instance_id] = list(stub.requests)
        stub.emit_log(
            "ERROR",
            f"workspace server {handle.spec.name} killed: memory "
            f"{stub.allocated_bytes} bytes over limit {limit} bytes",
        )
        stub.service.stop()
        log.info("oom-killed %s (%s)", instance_id, handle.spec.name)

    def _sweep_loop(self) -> None:
        while True:
            with self._lock:
                if self._closed:
                    return
                running = list(self._handles)
            for instance_id in running:
                try:
                    self.enforce_limits(instance_id)
                except NoSuchInstance:
                    pass
            time.sleep(self.enforce_interval)

    def shutdown(self) -> None:
        """Stop the sweep and every live stub (test/teardown helper)."""
        with self._lock:
            self._closed = True
            stubs = list(self._stubs.values())
            self._stubs.clear()
        for stub in stubs:
            stub.service.stop()
