"""Whole-system tour on one machine, no external services.

Boots the control plane in-process (REST API, authenticating reverse
proxy, simulated container runtime), then walks the full tenant story:
projects and roles, dataset sharing without copying, workspace start,
proxied access with bearer tokens, a compute session, tenant-scoped logs,
and teardown with data retention.

Run: python3 demos/end_to_end_tour.py
"""

import tempfile
from pathlib import Path

import requests

from workbench import (
    ApiServer,
    ControlPlane,
    ControlPlaneConfig,
    Permission,
    ReverseProxy,
    Role,
    WorkspaceRequest,
)


def main() -> None:
    data_dir = Path(tempfile.mkdtemp(prefix="workbench-tour-"))
    cp = ControlPlane(ControlPlaneConfig(data_dir=data_dir, nodeport_range=(31500, 31599)))
    api = ApiServer(cp, port=0)
    proxy = ReverseProxy(cp.routes, port=0)
    api.start()
    proxy.start()
    print(f"api:   {api.base_url}")
    print(f"proxy: {proxy.base_url}")

    try:
        print("\n-- 1. a worker node joins the cluster")
        node = cp.register_node(capacity_mem=30720, capacity_cpu=8000, node_id="worker-1")
        print(f"   {node.id}: {node.allocatable_mem} MiB / {node.allocatable_cpu} mc allocatable")

        print("\n-- 2. projects, members, datasets")
        cp.create_project("genomics", "ana")
        cp.add_member("genomics", "ben", Role.DATA_SCIENTIST, actor="ana")
        cp.create_project("stats_course", "dora")
        cp.create_dataset("genomics", "sequences", actor="ana")
        view = cp.mount_view("genomics", "ana")
        cp.fs.write(view, "sequences/chr1.fa", b">chr1\nACGTACGT\n")
        print("   genomics: ana (DataOwner), ben (DataScientist), dataset 'sequences'")

        print("\n-- 3. sharing without copying")
        cp.share_dataset("genomics", "sequences", "stats_course", Permission.READ_ONLY, "ana")
        dora_view = cp.mount_view("stats_course", "dora")
        shared = cp.fs.read(dora_view, "sequences/chr1.fa")
        print(f"   stats_course reads shared file: {shared!r}")
        print(f"   stored objects in the whole system: {cp.fs.object_count()} (no copy made)")

        print("\n-- 4. ben starts his workspace")
        instance = cp.start_workspace(WorkspaceRequest("genomics", "ben"), actor="ben")
        print(f"   state={instance.state.value} node={instance.node} port={instance.node_port}")
        print(f"   backend={instance.backend_name}")
        print("   deployment document (first lines):")
        for line in instance.spec.to_yaml().splitlines()[:6]:
            print(f"     {line}")

        print("\n-- 5. reaching it through the proxy")
        own = requests.get(
            f"{proxy.base_url}/workspace/genomics/ben/whoami",
            headers={"Authorization": f"Bearer {instance.token}"},
            timeout=5,
        )
        print(f"   with ben's token:    {own.status_code} {own.text}")
        stranger = requests.get(
            f"{proxy.base_url}/workspace/genomics/ben/whoami",
            headers={"Authorization": "Bearer wst_not_bens_token"},
            timeout=5,
        )
        print(f"   with a wrong token:  {stranger.status_code} (backend never contacted)")

        print("\n-- 6. a compute session against the gateway")
        session = requests.post(
            f"{api.base_url}/gateway/sessions",
            json={
                "driverMemory": "2g",
                "driverCores": 1,
                "executorMemory": "4g",
                "executorCores": 2,
                "numExecutors": 2,
            },
            headers={"Authorization": f"Bearer {instance.token}"},
            timeout=5,
        ).json()
        result = requests.post(
            f"{api.base_url}/gateway/sessions/{session['id']}/statements",
            json={"code": "(2+3)*8-4"},
            headers={"Authorization": f"Bearer {instance.token}"},
            timeout=5,
        ).json()
        print(f"   session {session['id']} evaluated '(2+3)*8-4' -> {result['output']}")

        print("\n-- 7. tenant-scoped logs")
        for entry in cp.query_logs("genomics", actor="ana")[:3]:
            print(f"   {entry.level:<5} {entry.message}")

        print("\n-- 8. stop: resources come back, data stays")
        cp.stop_workspace("genomics", "ben", actor="ben")
        node = cp.nodes()[0]
        print(f"   reservations on {node.id}: {len(node.reservations)}")
        still_there = cp.fs.read(cp.mount_view("genomics", "ben"), "sequences/chr1.fa")
        print(f"   file still readable after teardown: {still_there!r}")
        print(f"   log entries retained: {len(cp.query_logs('genomics', actor='ana'))}")
    finally:
        proxy.stop()
        api.stop()
        cp.shutdown()


if __name__ == "__main__":
    main()
