import json

import pytest
import requests

from workbench.webapi import ApiServer

from conftest import cleanup_control_plane, make_control_plane


@pytest.fixture(scope="module")
def api():
    cp = make_control_plane()
    cp.register_node(capacity_mem=30720, capacity_cpu=8000, node_id="n1")
    server = ApiServer(cp, port=0)
    server.start()
    yield cp, server
    server.stop()
    cleanup_control_plane(cp)


@pytest.fixture(scope="module")
def tokens(api):
    _, server = api
    out = {}
    for user in ("alice", "bob", "mallory"):
        resp = requests.post(
            f"{server.base_url}/api/login", json={"user": user, "password": "pw"}, timeout=5
        )
        out[user] = resp.json()["token"]
    return out


def auth(tokens, user):
    return {"Authorization": f"Bearer {tokens[user]}"}


@pytest.fixture(scope="module")
def seeded(api, tokens):
    """One project with alice as owner and bob as scientist."""
    _, server = api
    base = server.base_url
    requests.post(
        f"{base}/api/projects", json={"name": "demo"}, headers=auth(tokens, "alice"), timeout=5
    )
    requests.post(
        f"{base}/api/projects/demo/members",
        json={"user": "bob", "role": "DataScientist"},
        headers=auth(tokens, "alice"),
        timeout=5,
    )
    requests.post(
        f"{base}/api/projects/demo/datasets",
        json={"name": "training_data"},
        headers=auth(tokens, "alice"),
        timeout=5,
    )
    requests.post(
        f"{base}/api/projects", json={"name": "lab2"}, headers=auth(tokens, "bob"), timeout=5
    )
    return base


class TestAuth:
    def test_missing_token_401(self, api):
        _, server = api
        resp = requests.post(f"{server.base_url}/api/projects", json={"name": "x"}, timeout=5)
        assert resp.status_code == 401

    def test_garbage_token_401(self, api):
        _, server = api
        resp = requests.get(
            f"{server.base_url}/api/cluster/nodes",
            headers={"Authorization": "Bearer nonsense"},
            timeout=5,
        )
        assert resp.status_code == 401

    def test_login_rejects_bad_user_id(self, api):
        _, server = api
        resp = requests.post(
            f"{server.base_url}/api/login", json={"user": "Not Valid", "password": "x"}, timeout=5
        )
        assert resp.status_code == 400


class TestTenancyEndpoints:
    def test_duplicate_project_409(self, seeded, tokens):
        resp = requests.post(
            f"{seeded}/api/projects", json={"name": "demo"}, headers=auth(tokens, "alice"), timeout=5
        )
        assert resp.status_code == 409
        assert resp.json()["error"] == "DuplicateName"

    def test_member_add_forbidden_for_scientist(self, seeded, tokens):
        resp = requests.post(
            f"{seeded}/api/projects/demo/members",
            json={"user": "carol", "role": "DataScientist"},
            headers=auth(tokens, "bob"),
            timeout=5,
        )
        assert resp.status_code == 403

    def test_member_add_unknown_project_404(self, seeded, tokens):
        resp = requests.post(
            f"{seeded}/api/projects/ghost/members",
            json={"user": "carol", "role": "DataScientist"},
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert resp.status_code == 404

    def test_share_and_revoke_lifecycle(self, seeded, tokens):
        share = requests.post(
            f"{seeded}/api/projects/demo/datasets/training_data/shares",
            json={"target": "lab2", "permission": "ReadOnly"},
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert share.status_code == 201
        assert share.json()["permission"] == "ReadOnly"
        revoke = requests.delete(
            f"{seeded}/api/projects/demo/datasets/training_data/shares/lab2",
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert revoke.status_code == 200
        second = requests.delete(
            f"{seeded}/api/projects/demo/datasets/training_data/shares/lab2",
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert second.status_code == 404

    def test_self_share_400(self, seeded, tokens):
        resp = requests.post(
            f"{seeded}/api/projects/demo/datasets/training_data/shares",
            json={"target": "demo", "permission": "ReadOnly"},
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert resp.status_code == 400


class TestClusterEndpoints:
    def test_capacity_plan(self, api, tokens):
        _, server = api
        resp = requests.get(
            f"{server.base_url}/api/cluster/capacity-plan",
            params={"servers": 10},
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert resp.json() == {"servers": 10, "required_ram_gb": 30, "min_cpus": 8}

    def test_nodes_listing(self, api, tokens):
        _, server = api
        resp = requests.get(
            f"{server.base_url}/api/cluster/nodes", headers=auth(tokens, "alice"), timeout=5
        )
        nodes = resp.json()["nodes"]
        assert any(n["id"] == "n1" and n["allocatable_mem_mib"] == 22528 for n in nodes)

    def test_register_node_endpoint(self, api, tokens):
        _, server = api
        resp = requests.post(
            f"{server.base_url}/api/cluster/nodes",
            json={"capacity_mem_mib": 30720, "capacity_cpu_millicores": 8000, "id": "n2"},
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert resp.status_code == 201
        assert resp.json()["allocatable_mem_mib"] == 22528

    def test_simulate_fill_endpoint(self, api, tokens):
        _, server = api
        resp = requests.post(
            f"{server.base_url}/api/cluster/simulate-fill",
            json={"nodes": 4, "node_mem_mib": 30720, "reserve_mib": 2048, "attempts": 46},
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        body = resp.json()
        assert (body["admitted"], body["rejected"]) == (44, 2)


class TestWorkspaceAndFsEndpoints:
    def test_workspace_lifecycle_over_rest(self, seeded, tokens, api):
        cp, _ = api
        start = requests.post(
            f"{seeded}/api/projects/demo/workspaces",
            json={"memory_limit_mib": 2048, "cpu_millicores": 1000},
            headers=auth(tokens, "alice"),
            timeout=30,
        )
        assert start.status_code == 201, start.text
        body = start.json()
        assert body["state"] == "Running"
        assert body["token"].startswith("wst_")

        status = requests.get(
            f"{seeded}/api/projects/demo/workspaces/alice",
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert status.json()["state"] == "Running"

        again = requests.post(
            f"{seeded}/api/projects/demo/workspaces",
            json={},
            headers=auth(tokens, "alice"),
            timeout=30,
        )
        assert again.status_code == 409
        assert again.json()["error"] == "AlreadyRunning"

        stop = requests.delete(
            f"{seeded}/api/projects/demo/workspaces/alice",
            headers=auth(tokens, "alice"),
            timeout=30,
        )
        assert stop.status_code == 200
        assert stop.json()["state"] == "Stopped"

    def test_invalid_spark_config_400(self, seeded, tokens):
        resp = requests.post(
            f"{seeded}/api/projects/demo/workspaces",
            json={
                "spark": {
                    "driverMemory": "2g",
                    "driverCores": 1,
                    "executorMemory": "4g",
                    "executorCores": 2,
                    "numExecutors": 0,
                }
            },
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert resp.status_code == 400
        assert "numExecutors" in resp.json()["message"]

    def test_fs_put_get_roundtrip(self, seeded, tokens):
        put = requests.put(
            f"{seeded}/api/projects/demo/fs/training_data/report.txt",
            data=b"latin hypercube",
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert put.status_code == 200
        get = requests.get(
            f"{seeded}/api/projects/demo/fs/training_data/report.txt",
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert get.content == b"latin hypercube"

    def test_fs_forbidden_for_non_member(self, seeded, tokens):
        resp = requests.get(
            f"{seeded}/api/projects/demo/fs/training_data/report.txt",
            headers=auth(tokens, "mallory"),
            timeout=5,
        )
        assert resp.status_code == 403

    def test_fs_missing_file_404(self, seeded, tokens):
        resp = requests.get(
            f"{seeded}/api/projects/demo/fs/training_data/nope.bin",
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert resp.status_code == 404


class TestLogsEndpoint:
    def test_ndjson_after_workspace_run(self, seeded, tokens, api):
        cp, _ = api
        requests.post(
            f"{seeded}/api/projects/demo/workspaces",
            json={},
            headers=auth(tokens, "alice"),
            timeout=30,
        )
        requests.delete(
            f"{seeded}/api/projects/demo/workspaces/alice",
            headers=auth(tokens, "alice"),
            timeout=30,
        )
        resp = requests.get(
            f"{seeded}/api/projects/demo/logs",
            params={"user": "alice"},
            headers=auth(tokens, "alice"),
            timeout=5,
        )
        assert resp.headers["Content-Type"] == "application/x-ndjson"
        entries = [json.loads(line) for line in resp.text.splitlines()]
        assert entries, "workspace lifecycle should have produced log entries"
        assert all(e["project"] == "demo" and e["user"] == "alice" for e in entries)
        assert any("listening" in e["message"] for e in entries)

    def test_scientist_cross_user_forbidden(self, seeded, tokens):
        resp = requests.get(
            f"{seeded}/api/projects/demo/logs",
            params={"user": "alice"},
            headers=auth(tokens, "bob"),
            timeout=5,
        )
        assert resp.status_code == 403


class TestGatewayEndpoints:
    def test_session_lifecycle_over_rest(self, seeded, tokens, api):
        cp, _ = api
        start = requests.post(
            f"{seeded}/api/projects/demo/workspaces",
            json={},
            headers=auth(tokens, "alice"),
            timeout=30,
        )
        ws_token = start.json()["token"]
        headers = {"Authorization": f"Bearer {ws_token}"}
        created = requests.post(
            f"{seeded}/gateway/sessions",
            json={
                "driverMemory": "1g",
                "driverCores": 1,
                "executorMemory": "1g",
                "executorCores": 1,
                "numExecutors": 1,
            },
            headers=headers,
            timeout=5,
        )
        assert created.status_code == 201, created.text
        sid = created.json()["id"]
        assert created.json()["state"] in ("starting", "idle")

        stmt = requests.post(
            f"{seeded}/gateway/sessions/{sid}/statements",
            json={"code": "1+2*3"},
            headers=headers,
            timeout=5,
        )
        assert stmt.json()["output"] == "7"

        fetched = requests.get(
            f"{seeded}/gateway/sessions/{sid}/statements/1", headers=headers, timeout=5
        )
        assert fetched.json()["state"] == "available"

        wrong = requests.get(
            f"{seeded}/gateway/sessions/{sid}",
            headers={"Authorization": "Bearer wst_bogus"},
            timeout=5,
        )
        assert wrong.status_code == 401

        closed = requests.delete(f"{seeded}/gateway/sessions/{sid}", headers=headers, timeout=5)
        assert closed.status_code == 200
        requests.delete(
            f"{seeded}/api/projects/demo/workspaces/alice",
            headers=auth(tokens, "alice"),
            timeout=30,
        )

    def test_session_requires_live_workspace_token(self, seeded, tokens):
        resp = requests.post(
            f"{seeded}/gateway/sessions",
            json={
                "driverMemory": "1g",
                "driverCores": 1,
                "executorMemory": "1g",
                "executorCores": 1,
                "numExecutors": 1,
            },
            headers={"Authorization": "Bearer wst_deadbeef"},
            timeout=5,
        )
        assert resp.status_code == 401


class TestConsoleStatic:
    def test_404_when_not_deployed(self, api, tokens):
        _, server = api
        resp = requests.get(f"{server.base_url}/console/", timeout=5)
        assert resp.status_code == 404
