"""workbenchctl: serve the control plane and drive it from a terminal.

Capacity subcommands compute locally (they are pure); workspace and log
subcommands talk to a running control plane over its REST API using a
bearer token from ``--token`` or ``WORKBENCH_TOKEN``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import requests
import yaml

from .control import ControlPlane, ControlPlaneConfig
from .proxy import NODE_PORT_RANGE, ReverseProxy
from .scheduler import Reservation, plan_capacity, simulate_fill, uniform_nodes
from .webapi import ApiServer
from .workspaces import DeploymentMode

DEFAULT_API_URL = "http://127.0.0.1:8700"


def _api_url(args) -> str:
    return args.api_url or os.environ.get("WORKBENCH_API_URL") or DEFAULT_API_URL


def _token(args) -> str:
    token = args.token or os.environ.get("WORKBENCH_TOKEN")
    if not token:
        sys.exit("error: no bearer token (use --token or WORKBENCH_TOKEN; see 'workbenchctl login')")
    return token


def _headers(args) -> dict:
    return {"Authorization": f"Bearer {_token(args)}"}


def _fail_on_error(resp: requests.Response) -> dict:
    try:
        payload = resp.json()
    except ValueError:
        payload = {"error": "BadResponse", "message": resp.text}
    if resp.status_code >= 400:
        sys.exit(f"error {resp.status_code}: {payload.get('error')}: {payload.get('message')}")
    return payload


def _split_hostport(value: str, default_port: int) -> tuple[str, int]:
    if ":" in value:
        host, port = value.rsplit(":", 1)
        return host, int(port)
    return value, default_port


# -- serve ------------------------------------------------------------------


def cmd_serve(args) -> int:
    file_cfg: dict = {}
    if args.config:
        file_cfg = yaml.safe_load(Path(args.config).read_text()) or {}

    def setting(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, default)

    data_dir = Path(setting(args.data_dir, "data_dir", "./workbench-data"))
    listen = setting(args.listen, "listen", "127.0.0.1:8700")
    proxy_listen = setting(args.proxy_listen, "proxy_listen", "127.0.0.1:8800")
    tls_cert = setting(args.tls_cert, "tls_cert", None)
    tls_key = setting(args.tls_key, "tls_key", None)
    nodeport_range = setting(args.nodeport_range, "nodeport_range", None)
    if isinstance(nodeport_range, str):
        start, end = nodeport_range.split("-")
        nodeport_range = (int(start), int(end))
    elif isinstance(nodeport_range, list):
        nodeport_range = (int(nodeport_range[0]), int(nodeport_range[1]))
    mode = DeploymentMode(setting(args.mode, "mode", "kubernetes"))
    console_dir = setting(args.console_dir, "console_dir", None)

    config = ControlPlaneConfig(
        data_dir=data_dir,
        mode=mode,
        nodeport_range=nodeport_range or NODE_PORT_RANGE,
        enforce_interval=float(file_cfg.get("enforce_interval", 0.1)),
        livy_url=file_cfg.get("livy_url", "http://127.0.0.1:8998"),
    )
    cp = ControlPlane(config)

    for node in args.register_node or file_cfg.get("nodes", []):
        if isinstance(node, str):
            mem, cpu = node.split(":")
            cp.register_node(capacity_mem=int(mem), capacity_cpu=int(cpu))
        else:
            cp.register_node(
                capacity_mem=int(node["capacity_mem_mib"]),
                capacity_cpu=int(node["capacity_cpu_millicores"]),
                allocatable_mem=node.get("allocatable_mem_mib"),
                allocatable_cpu=node.get("allocatable_cpu_millicores"),
                node_id=node.get("id"),
            )

    api_host, api_port = _split_hostport(listen, 8700)
    proxy_host, proxy_port = _split_hostport(proxy_listen, 8800)
    api = ApiServer(cp, api_host, api_port, console_dir=console_dir)
    proxy = ReverseProxy(cp.routes, proxy_host, proxy_port, tls_cert=tls_cert, tls_key=tls_key)
    api.start()
    proxy.start()
    print(f"api listening on {api.base_url}")
    print(f"proxy listening on {proxy.base_url}")
    if console_dir:
        print(f"console at {api.base_url}/console/")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        proxy.stop()
        api.stop()
        cp.shutdown()
    return 0


# -- login ----------------------------------------------------------------------


def cmd_login(args) -> int:
    resp = requests.post(
        f"{_api_url(args)}/api/login",
        json={"user": args.user, "password": args.password},
        timeout=10,
    )
    payload = _fail_on_error(resp)
    print(payload["token"])
    return 0


# -- workspace ----------------------------------------------------------------


def cmd_workspace(args) -> int:
    base = _api_url(args)
    if args.action == "start":
        body: dict = {
            "user": args.user,
            "memory_limit_mib": args.memory_mib,
            "cpu_millicores": args.cpu_millicores,
        }
        resp = requests.post(
            f"{base}/api/projects/{args.project}/workspaces",
            json=body,
            headers=_headers(args),
            timeout=30,
        )
    elif args.action == "stop":
        resp = requests.delete(
            f"{base}/api/projects/{args.project}/workspaces/{args.user}",
            headers=_headers(args),
            timeout=30,
        )
    else:
        resp = requests.get(
            f"{base}/api/projects/{args.project}/workspaces/{args.user}",
            headers=_headers(args),
            timeout=30,
        )
    payload = _fail_on_error(resp)
    print(json.dumps(payload, indent=2))
    return 0


# -- capacity ----------------------------------------------------------------------


def cmd_capacity(args) -> int:
    if args.capacity_action == "plan":
        plan = plan_capacity(args.servers)
        if args.as_json:
            print(json.dumps({"servers": plan.servers, "required_ram_gb": plan.required_ram_gb, "min_cpus": plan.min_cpus}))
        else:
            print(f"{'servers':>10} {'ram_gb':>8} {'min_cpus':>9}")
            print(f"{plan.servers:>10} {plan.required_ram_gb:>8} {plan.min_cpus:>9}")
        return 0

    nodes = uniform_nodes(
        count=args.nodes,
        capacity_mem=args.node_mem_mib,
        capacity_cpu=args.node_cpu_millicores,
        allocatable_mem=args.allocatable_mem_mib,
        allocatable_cpu=args.allocatable_cpu_millicores,
    )
    report = simulate_fill(
        nodes, Reservation("probe", args.reserve_mib, args.reserve_millicores), args.attempts
    )
    print(f"{'node':<12} {'admitted':>9}")
    for node_id, count in sorted(report.per_node.items()):
        print(f"{node_id:<12} {count:>9}")
    print(f"admitted {report.admitted} / rejected {report.rejected} of {args.attempts} attempts")
    print(json.dumps(report.to_dict()))
    return 0


# -- logs ---------------------------------------------------------------------------


def _print_entries(entries: list[dict]) -> None:
    for e in entries:
        print(f"{e['timestamp']} {e['level']:<5} [{e['project']}/{e['user']}] {e['message']}")


def cmd_logs(args) -> int:
    base = _api_url(args)
    params: dict = {}
    if args.user:
        params["user"] = args.user
    cursor: str | None = args.since
    seen: set[tuple[str, str, str]] = set()
    while True:
        if cursor:
            params["from"] = cursor
        resp = requests.get(
            f"{base}/api/projects/{args.project}/logs",
            params=params,
            headers=_headers(args),
            timeout=30,
        )
        if resp.status_code >= 400:
            _fail_on_error(resp)
        entries = [json.loads(line) for line in resp.text.splitlines() if line.strip()]
        fresh = []
        for e in entries:
            key = (e["timestamp"], e["instance"], e["message"])
            if key not in seen:
                seen.add(key)
                fresh.append(e)
        _print_entries(fresh)
        if entries:
            cursor = entries[-1]["timestamp"]
        if not args.follow:
            return 0
        time.sleep(args.poll_interval)


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="workbenchctl")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the control plane, API, and proxy")
    serve.add_argument("--config", help="YAML config file")
    serve.add_argument("--data-dir")
    serve.add_argument("--listen", help="api host:port (default 127.0.0.1:8700)")
    serve.add_argument("--proxy-listen", help="proxy host:port (default 127.0.0.1:8800)")
    serve.add_argument("--tls-cert", help="proxy TLS certificate file")
    serve.add_argument("--tls-key", help="proxy TLS key file")
    serve.add_argument("--nodeport-range", help="external port pool, e.g. 30000-32767")
    serve.add_argument("--mode", choices=["kubernetes", "docker"])
    serve.add_argument("--console-dir", help="static web console build to serve at /console/")
    serve.add_argument(
        "--register-node",
        action="append",
        metavar="MEM_MIB:CPU_MC",
        help="register a worker node at startup (repeatable)",
    )
    serve.set_defaults(func=cmd_serve)

    login = sub.add_parser("login", help="obtain a user bearer token")
    login.add_argument("--user", required=True)
    login.add_argument("--password", default="-")
    login.add_argument("--api-url")
    login.set_defaults(func=cmd_login, token=None)

    workspace = sub.add_parser("workspace", help="start/stop/status a workspace")
    workspace.add_argument("action", choices=["start", "stop", "status"])
    workspace.add_argument("--project", required=True)
    workspace.add_argument("--user", required=True)
    workspace.add_argument("--memory-mib", type=int, default=2048)
    workspace.add_argument("--cpu-millicores", type=int, default=1000)
    workspace.add_argument("--api-url")
    workspace.add_argument("--token")
    workspace.set_defaults(func=cmd_workspace)

    capacity = sub.add_parser("capacity", help="capacity planning and fill simulation")
    capacity_sub = capacity.add_subparsers(dest="capacity_action", required=True)
    plan = capacity_sub.add_parser("plan")
    plan.add_argument("servers", type=int)
    plan.add_argument("--json", dest="as_json", action="store_true")
    plan.set_defaults(func=cmd_capacity)
    simulate = capacity_sub.add_parser("simulate")
    simulate.add_argument("--nodes", type=int, required=True)
    simulate.add_argument("--node-mem-mib", type=int, required=True)
    simulate.add_argument("--node-cpu-millicores", type=int, default=8000)
    simulate.add_argument("--allocatable-mem-mib", type=int)
    simulate.add_argument("--allocatable-cpu-millicores", type=int)
    simulate.add_argument("--reserve-mib", type=int, required=True)
    simulate.add_argument("--reserve-millicores", type=int, default=1)
    simulate.add_argument("--attempts", type=int, required=True)
    simulate.set_defaults(func=cmd_capacity)

    logs = sub.add_parser("logs", help="query tenant logs")
    logs.add_argument("--project", required=True)
    logs.add_argument("--user")
    logs.add_argument("--follow", action="store_true")
    logs.add_argument("--since", help="ISO8601 lower bound")
    logs.add_argument("--poll-interval", type=float, default=1.0)
    logs.add_argument("--api-url")
    logs.add_argument("--token")
    logs.set_defaults(func=cmd_logs)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
