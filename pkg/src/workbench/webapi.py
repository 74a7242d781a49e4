"""REST surface over the control plane.

Every ``/api/...`` endpoint (except login) requires a user bearer token
and answers 401 for a missing or unknown token, 403 for denied actions,
404 for missing resources, and 409 for duplicates or capacity conflicts.
``/gateway/...`` endpoints authenticate with a workspace instance token
instead, mirroring how compute sessions belong to instances rather than
console users. The optional ``/console/`` tree serves the static web
console build.
"""

from __future__ import annotations

import json
import mimetypes
import re
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlsplit

from .control import ControlPlane
from .errors import Forbidden, InvalidRequest, Unauthorized, WorkbenchError
from .httpkit import HttpService, QuietHandler
from .logagg import parse_iso8601
from .scheduler import Reservation, simulate_fill, uniform_nodes
from .sparkconfig import SparkSessionConfig
from .tenancy import Permission, Role
from .workspaces import WorkspaceRequest


def _node_to_dict(node) -> dict:
    return {
        "id": node.id,
        "capacity_mem_mib": node.capacity_mem,
        "capacity_cpu_millicores": node.capacity_cpu,
        "allocatable_mem_mib": node.allocatable_mem,
        "allocatable_cpu_millicores": node.allocatable_cpu,
        "reserved_mem_mib": node.reserved_mem,
        "reserved_cpu_millicores": node.reserved_cpu,
        "free_mem_mib": node.free_mem,
        "free_cpu_millicores": node.free_cpu,
        "reservations": len(node.reservations),
    }


def _parse_ts(value: str | None) -> float | None:
    if value is None or value == "":
        return None
    ts = parse_iso8601(value)
    if ts is None:
        try:
            return float(value)
        except ValueError:
            raise InvalidRequest(f"bad timestamp {value!r}") from None
    return ts


class _ApiHandler(QuietHandler):
    # (method, compiled path regex, needs_user_auth, handler name)
    ROUTES: list[tuple[str, re.Pattern, bool, str]] = [
        ("POST", re.compile(r"^/api/login$"), False, "login"),
        ("POST", re.compile(r"^/api/projects$"), True, "create_project"),
        ("POST", re.compile(r"^/api/projects/([^/]+)/members$"), True, "add_member"),
        ("POST", re.compile(r"^/api/projects/([^/]+)/datasets$"), True, "create_dataset"),
        (
            "POST",
            re.compile(r"^/api/projects/([^/]+)/datasets/([^/]+)/shares$"),
            True,
            "share_dataset",
        ),
        (
            "DELETE",
            re.compile(r"^/api/projects/([^/]+)/datasets/([^/]+)/shares/([^/]+)$"),
            True,
            "revoke_share",
        ),
        ("POST", re.compile(r"^/api/projects/([^/]+)/workspaces$"), True, "start_workspace"),
        (
            "DELETE",
            re.compile(r"^/api/projects/([^/]+)/workspaces/([^/]+)$"),
            True,
            "stop_workspace",
        ),
        (
            "GET",
            re.compile(r"^/api/projects/([^/]+)/workspaces/([^/]+)$"),
            True,
            "workspace_status",
        ),
        ("GET", re.compile(r"^/api/projects/([^/]+)/fs/(.+)$"), True, "fs_read"),
        ("PUT", re.compile(r"^/api/projects/([^/]+)/fs/(.+)$"), True, "fs_write"),
        ("GET", re.compile(r"^/api/projects/([^/]+)/logs$"), True, "query_logs"),
        ("POST", re.compile(r"^/api/cluster/nodes$"), True, "register_node"),
        ("GET", re.compile(r"^/api/cluster/nodes$"), True, "list_nodes"),
        ("GET", re.compile(r"^/api/cluster/capacity-plan$"), True, "capacity_plan"),
        ("POST", re.compile(r"^/api/cluster/simulate-fill$"), True, "simulate_fill"),
        ("POST", re.compile(r"^/gateway/sessions$"), False, "gw_create_session"),
        ("GET", re.compile(r"^/gateway/sessions/(\d+)$"), False, "gw_get_session"),
        (
            "POST",
            re.compile(r"^/gateway/sessions/(\d+)/statements$"),
            False,
            "gw_submit_statement",
        ),
        (
            "GET",
            re.compile(r"^/gateway/sessions/(\d+)/statements/(\d+)$"),
            False,
            "gw_get_statement",
        ),
        ("DELETE", re.compile(r"^/gateway/sessions/(\d+)$"), False, "gw_close_session"),
    ]

    @property
    def cp(self) -> ControlPlane:
        return self.server.control_plane  # type: ignore[attr-defined]

    @property
    def console_dir(self) -> Path | None:
        return self.server.console_dir  # type: ignore[attr-defined]

    def _dispatch(self, method: str) -> None:
        parts = urlsplit(self.path)
        path = unquote(parts.path)
        self.query = parse_qs(parts.query)
        if method == "GET" and (path == "/" or path.startswith("/console")):
            self._serve_console(path)
            return
        for route_method, pattern, needs_auth, name in self.ROUTES:
            if route_method != method:
                continue
            match = pattern.match(path)
            if not match:
                continue
            try:
                actor = None
                if needs_auth:
                    actor = self.cp.auth.resolve(self.bearer_token())
                    if actor is None:
                        raise Unauthorized("missing or invalid bearer token")
                handler = getattr(self, f"h_{name}")
                handler(actor, *match.groups())
            except WorkbenchError as exc:
                self.send_json(exc.http_status, {"error": exc.code, "message": str(exc)})
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                self.send_json(400, {"error": "InvalidRequest", "message": str(exc)})
            return
        self.send_json(404, {"error": "NotFound", "message": path})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    def do_DELETE(self):
        self._dispatch("DELETE")

    # -- auth -------------------------------------------------------------

    def h_login(self, _actor, *_groups):
        body = self.read_json()
        token = self.cp.auth.login(body.get("user", ""), body.get("password", ""))
        self.send_json(200, {"token": token, "user": body["user"]})

    # -- tenancy ------------------------------------------------------------

    def h_create_project(self, actor, *_groups):
        body = self.read_json()
        owner = body.get("owner", actor)
        if owner != actor:
            raise Forbidden("projects are created on behalf of the caller")
        project = self.cp.create_project(body["name"], owner)
        self.send_json(
            201,
            {
                "name": project.name,
                "owner": project.owner,
                "created_at": project.created_at,
                "dataset_names": sorted(project.dataset_names),
            },
        )

    def h_add_member(self, actor, project):
        body = self.read_json()
        membership = self.cp.add_member(project, body["user"], Role(body["role"]), actor)
        self.send_json(
            201,
            {"project": membership.project, "user": membership.user, "role": membership.role.value},
        )

    def h_create_dataset(self, actor, project):
        body = self.read_json()
        name = self.cp.create_dataset(project, body["name"], actor)
        self.send_json(201, {"project": project, "dataset": name})

    def h_share_dataset(self, actor, project, dataset):
        body = self.read_json()
        share = self.cp.share_dataset(
            project, dataset, body["target"], Permission(body.get("permission", "ReadOnly")), actor
        )
        self.send_json(
            201,
            {
                "source_project": share.source_project,
                "dataset": share.dataset,
                "target_project": share.target_project,
                "permission": share.permission.value,
            },
        )

    def h_revoke_share(self, actor, project, dataset, target):
        self.cp.revoke_share(project, dataset, target, actor)
        self.send_json(200, {"revoked": True})

    # -- workspaces -----------------------------------------------------------

    def h_start_workspace(self, actor, project):
        body = self.read_json()
        spark = None
        if body.get("spark"):
            spark = SparkSessionConfig.from_dict(body["spark"], livy_url=self.cp.config.livy_url)
        req = WorkspaceRequest(
            project=project,
            user=body.get("user", actor),
            memory_limit_mib=int(body.get("memory_limit_mib", 2048)),
            cpu_limit_millicores=int(body.get("cpu_millicores", 1000)),
            spark=spark,
        )
        instance = self.cp.start_workspace(req, actor)
        payload = instance.to_dict()
        payload["token"] = instance.token  # owner needs it to reach the proxy
        self.send_json(201, payload)

    def h_stop_workspace(self, actor, project, user):
        instance = self.cp.stop_workspace(project, user, actor)
        self.send_json(200, instance.to_dict())

    def h_workspace_status(self, actor, project, user):
        del actor
        instance = self.cp.workspace_status(project, user)
        self.send_json(200, instance.to_dict())

    # -- filesystem -------------------------------------------------------------

    def h_fs_read(self, actor, project, path):
        data = self.cp.fs_read(project, actor, path)
        self.send_bytes(200, data)

    def h_fs_write(self, actor, project, path):
        self.cp.fs_write(project, actor, path, self.read_body())
        self.send_json(200, {"written": path})

    # -- logs ----------------------------------------------------------------------

    def h_query_logs(self, actor, project):
        user = self.query.get("user", [None])[0]
        entries = self.cp.query_logs(
            project,
            actor,
            user=user or None,
            from_ts=_parse_ts(self.query.get("from", [None])[0]),
            to_ts=_parse_ts(self.query.get("to", [None])[0]),
            limit=int(self.query["limit"][0]) if self.query.get("limit") else None,
        )
        body = "".join(json.dumps(e.to_dict()) + "\n" for e in entries).encode()
        self.send_bytes(200, body, "application/x-ndjson")

    # -- cluster -------------------------------------------------------------------

    def h_register_node(self, actor, *_groups):
        del actor
        body = self.read_json()
        node = self.cp.register_node(
            capacity_mem=int(body["capacity_mem_mib"]),
            capacity_cpu=int(body["capacity_cpu_millicores"]),
            allocatable_mem=(
                int(body["allocatable_mem_mib"]) if "allocatable_mem_mib" in body else None
            ),
            allocatable_cpu=(
                int(body["allocatable_cpu_millicores"])
                if "allocatable_cpu_millicores" in body
                else None
            ),
            node_id=body.get("id"),
        )
        self.send_json(201, _node_to_dict(node))

    def h_list_nodes(self, actor, *_groups):
        del actor
        self.send_json(200, {"nodes": [_node_to_dict(n) for n in self.cp.nodes()]})

    def h_capacity_plan(self, actor, *_groups):
        del actor
        servers = int(self.query.get("servers", ["0"])[0])
        plan = self.cp.capacity_plan(servers)
        self.send_json(
            200,
            {
                "servers": plan.servers,
                "required_ram_gb": plan.required_ram_gb,
                "min_cpus": plan.min_cpus,
            },
        )

    def h_simulate_fill(self, actor, *_groups):
        del actor
        body = self.read_json()
        nodes = uniform_nodes(
            count=int(body["nodes"]),
            capacity_mem=int(body["node_mem_mib"]),
            capacity_cpu=int(body.get("node_cpu_millicores", 8000)),
            allocatable_mem=(
                int(body["allocatable_mem_mib"]) if "allocatable_mem_mib" in body else None
            ),
            allocatable_cpu=(
                int(body["allocatable_cpu_millicores"])
                if "allocatable_cpu_millicores" in body
                else None
            ),
        )
        report = simulate_fill(
            nodes,
            Reservation("probe", int(body["reserve_mib"]), int(body.get("reserve_millicores", 1))),
            int(body["attempts"]),
        )
        self.send_json(200, report.to_dict())

    # -- compute gateway --------------------------------------------------------

    def _gw_token(self) -> str:
        token = self.bearer_token()
        if token is None:
            raise Unauthorized("missing workspace token")
        return token

    def h_gw_create_session(self, _actor):
        body = self.read_json()
        cfg = SparkSessionConfig.from_dict(body, livy_url=self.cp.config.livy_url)
        session = self.cp.gateway.connect(cfg, self._gw_token())
        self.send_json(201, session.to_dict())

    def h_gw_get_session(self, _actor, session_id):
        session = self.cp.gateway.get_session(int(session_id), self._gw_token())
        self.send_json(200, session.to_dict())

    def h_gw_submit_statement(self, _actor, session_id):
        body = self.read_json()
        statement = self.cp.gateway.submit_statement(int(session_id), body["code"], self._gw_token())
        self.send_json(201, statement.to_dict())

    def h_gw_get_statement(self, _actor, session_id, statement_id):
        statement = self.cp.gateway.get_statement(
            int(session_id), int(statement_id), self._gw_token()
        )
        self.send_json(200, statement.to_dict())

    def h_gw_close_session(self, _actor, session_id):
        self.cp.gateway.close_session(int(session_id), self._gw_token())
        self.send_json(200, {"closed": True})

    # -- static console ------------------------------------------------------------

    def _serve_console(self, path: str) -> None:
        root = self.console_dir
        if root is None:
            self.send_json(404, {"error": "NotFound", "message": "console not deployed"})
            return
        rel = path[len("/console"):].lstrip("/") if path.startswith("/console") else ""
        candidate = (root / rel) if rel else (root / "index.html")
        if candidate.is_dir():
            candidate = candidate / "index.html"
        try:
            resolved = candidate.resolve()
            resolved.relative_to(root.resolve())
        except (OSError, ValueError):
            self.send_json(404, {"error": "NotFound", "message": path})
            return
        if not resolved.is_file():
            self.send_json(404, {"error": "NotFound", "message": path})
            return
        content_type = mimetypes.guess_type(str(resolved))[0] or "application/octet-stream"
        self.send_bytes(200, resolved.read_bytes(), content_type)


class ApiServer:
    """Control-plane REST listener."""

    def __init__(
        self,
        control_plane: ControlPlane,
        host: str = "127.0.0.1",
        port: int = 0,
        console_dir: str | Path | None = None,
        tls_cert: str | None = None,
        tls_key: str | None = None,
    ):
        self._service = HttpService(_ApiHandler, host, port, tls_cert, tls_key)
        self._service.server.control_plane = control_plane  # type: ignore[attr-defined]
        self._service.server.console_dir = (  # type: ignore[attr-defined]
            Path(console_dir) if console_dir else None
        )
        self.tls_enabled = bool(tls_cert and tls_key)

    @property
    def host(self) -> str:
        return self._service.host

    @property
    def port(self) -> int:
        return self._service.port

    @property
    def base_url(self) -> str:
        scheme = "https" if self.tls_enabled else "http"
        return f"{scheme}://{self.host}:{self.port}"

    def start(self) -> None:
        self._service.start()

    def stop(self) -> None:
        self._service.stop()
