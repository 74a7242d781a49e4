"""Authenticating reverse proxy and the externally-exposed port pool.

One listener fronts every workspace. Requests arrive as
``/workspace/{project}/{user}/...``; the proxy resolves the pair in its
route table, compares the presented bearer token against the route's token
(constant-time), strips the prefix, and forwards to the backend. A request
that fails authentication is rejected before any backend connection is
opened, which is what keeps tenants unable to even probe each other's
servers.

Route mutations are atomic with respect to the data plane: a forward uses
the route entry it resolved at admission, so an unregister mid-flight lets
the request finish against its original backend but never misroutes it.
"""

from __future__ import annotations

import hmac
import http.client
import re
import threading
import time
from dataclasses import dataclass

from .errors import DuplicateRoute, PoolExhausted, Unauthorized, UnknownRoute
from .httpkit import HOP_BY_HOP, HttpService, QuietHandler

NODE_PORT_RANGE = (30000, 32767)

_WORKSPACE_PATH = re.compile(r"^/workspace/([^/]+)/([^/]+)(/.*)?$")


@dataclass(frozen=True)
class RouteEntry:
    project: str
    user: str
    backend: str  # "host:port"
    token: str
    registered_at: float

    @property
    def backend_host(self) -> str:
        return self.backend.rsplit(":", 1)[0]

    @property
    def backend_port(self) -> int:
        return int(self.backend.rsplit(":", 1)[1])


class PortPool:
    """Deterministic lowest-free allocator over an inclusive port range."""

    def __init__(self, range_start: int = NODE_PORT_RANGE[0], range_end: int = NODE_PORT_RANGE[1]):
        if range_start > range_end:
            raise ValueError("empty port range")
        self.range_start = range_start
        self.range_end = range_end
        self._allocated: set[int] = set()
        self._lock = threading.Lock()

    def allocate(self) -> int:
        with self._lock:
            for port in range(self.range_start, self.range_end + 1):
                if port not in self._allocated:
                    self._allocated.add(port)
                    return port
            raise PoolExhausted(
                f"all {self.range_end - self.range_start + 1} ports are allocated"
            )

    def release(self, port: int) -> None:
        with self._lock:
            self._allocated.discard(port)

    def allocated_count(self) -> int:
        with self._lock:
            return len(self._allocated)

    def is_allocated(self, port: int) -> bool:
        with self._lock:
            return port in self._allocated


class RouteTable:
    """Mapping from (project, user) to backend address plus expected token."""

    def __init__(self):
        self._routes: dict[tuple[str, str], RouteEntry] = {}
        self._lock = threading.Lock()

    def register(self, entry: RouteEntry) -> None:
        with self._lock:
            key = (entry.project, entry.user)
            if key in self._routes:
                raise DuplicateRoute(f"route for {key} already registered")
            self._routes[key] = entry

    def unregister(self, project: str, user: str) -> RouteEntry:
        with self._lock:
            entry = self._routes.pop((project, user), None)
            if entry is None:
                raise UnknownRoute(f"no route for ({project}, {user})")
            return entry

    def resolve(self, project: str, user: str) -> RouteEntry:
        with self._lock:
            entry = self._routes.get((project, user))
            if entry is None:
                raise UnknownRoute(f"no route for ({project}, {user})")
            return entry

    def entries(self) -> list[RouteEntry]:
        with self._lock:
            return sorted(self._routes.values(), key=lambda e: (e.project, e.user))


def make_route(project: str, user: str, backend: str, token: str) -> RouteEntry:
    return RouteEntry(project, user, backend, token, registered_at=time.time())


def check_route_access(entry: RouteEntry, token: str | None) -> None:
    if token is None or not hmac.compare_digest(entry.token, token):
        raise Unauthorized("missing or invalid workspace token")


class _ProxyHandler(QuietHandler):
    def _respond_error(self, status: int, code: str, message: str) -> None:
        self.send_json(status, {"error": code, "message": message})

    def _handle(self) -> None:
        proxy: ReverseProxy = self.server.proxy  # type: ignore[attr-defined]
        match = _WORKSPACE_PATH.match(self.path.split("?", 1)[0])
        if not match:
            self._respond_error(404, "UnknownRoute", "expected /workspace/{project}/{user}/...")
            return
        project, user, rest = match.group(1), match.group(2), match.group(3) or "/"
        if "?" in self.path:
            rest = rest + "?" + self.path.split("?", 1)[1]
        try:
            entry = proxy.routes.resolve(project, user)
        except UnknownRoute as exc:
            self._respond_error(404, "UnknownRoute", str(exc))
            return
        try:
            check_route_access(entry, self.bearer_token())
        except Unauthorized as exc:
            self._respond_error(401, "Unauthorized", str(exc))
            return
        body = self.read_body()
        headers = {
            name: value
            for name, value in self.headers.items()
            if name.lower() not in HOP_BY_HOP and name.lower() != "host"
        }
        headers["Host"] = entry.backend
        try:
            conn = http.client.HTTPConnection(
                entry.backend_host, entry.backend_port, timeout=proxy.backend_timeout
            )
            conn.request(self.command, rest, body=body or None, headers=headers)
            upstream = conn.getresponse()
            payload = upstream.read()
        except OSError as exc:
            self._respond_error(502, "BackendUnreachable", f"{entry.backend}: {exc}")
            return
        self.send_response(upstream.status)
        seen_length = False
        for name, value in upstream.getheaders():
            if name.lower() in HOP_BY_HOP:
                continue
            if name.lower() == "content-length":
                seen_length = True
            self.send_header(name, value)
        if not seen_length:
            self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)
        conn.close()

    do_GET = _handle
    do_POST = _handle
    do_PUT = _handle
    do_DELETE = _handle
    do_PATCH = _handle
    do_HEAD = _handle


class ReverseProxy:
    """HTTP data plane over a RouteTable; optionally TLS-terminating."""

    def __init__(
        self,
        routes: RouteTable | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        tls_cert: str | None = None,
        tls_key: str | None = None,
        backend_timeout: float = 10.0,
    ):
        self.routes = routes if routes is not None else RouteTable()
        self.backend_timeout = backend_timeout
        self._service = HttpService(_ProxyHandler, host, port, tls_cert, tls_key)
        self._service.server.proxy = self  # type: ignore[attr-defined]
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
