import datetime as dt
import random
import threading

import pytest
import requests

from workbench.backends import BackendMounts, BackendSpec, SimDriver
from workbench.errors import DuplicateRoute, PoolExhausted, UnknownRoute
from workbench.httpkit import TOKEN_COOKIE
from workbench.proxy import (
    PortPool,
    ReverseProxy,
    RouteTable,
    make_route,
)


class TestPortPool:
    def test_fresh_pool_lowest_port(self):
        assert PortPool(30000, 32767).allocate() == 30000

    def test_release_then_reuse(self):
        pool = PortPool(30000, 32767)
        port = pool.allocate()
        pool.release(port)
        assert pool.allocate() == 30000

    def test_exhaustion_count(self):
        # Oracle: the inclusive range 30000..32767 enumerates to 2768 ports.
        assert len(range(30000, 32767 + 1)) == 2768
        pool = PortPool(30000, 32767)
        seen = {pool.allocate() for _ in range(2768)}
        assert len(seen) == 2768
        with pytest.raises(PoolExhausted):
            pool.allocate()

    def test_no_double_allocation_while_held(self):
        pool = PortPool(30000, 30010)
        grabbed = [pool.allocate() for _ in range(11)]
        assert len(set(grabbed)) == len(grabbed)

    def test_concurrent_allocation_unique(self):
        pool = PortPool(30000, 30999)
        got: list[int] = []
        lock = threading.Lock()

        def grab():
            for _ in range(100):
                p = pool.allocate()
                with lock:
                    got.append(p)

        threads = [threading.Thread(target=grab) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(got) == len(set(got)) == 800


class TestRouteTable:
    def test_register_resolve(self):
        table = RouteTable()
        table.register(make_route("demo", "alice", "10.0.0.2:30101", "t1"))
        assert table.resolve("demo", "alice").backend == "10.0.0.2:30101"

    def test_duplicate(self):
        table = RouteTable()
        table.register(make_route("demo", "alice", "10.0.0.2:30101", "t1"))
        with pytest.raises(DuplicateRoute):
            table.register(make_route("demo", "alice", "10.0.0.3:30102", "t2"))

    def test_unregister_then_resolve(self):
        table = RouteTable()
        table.register(make_route("demo", "alice", "10.0.0.2:30101", "t1"))
        table.unregister("demo", "alice")
        with pytest.raises(UnknownRoute):
            table.resolve("demo", "alice")

    def test_unregister_unknown(self):
        with pytest.raises(UnknownRoute):
            RouteTable().unregister("demo", "ghost")


def _backend_spec(name: str, port: int, project="demo", user="alice") -> BackendSpec:
    return BackendSpec(
        name=name,
        listen_port=port,
        memory_limit_mib=2048,
        cpu_limit_millicores=1000,
        env={"WORKBENCH_PROJECT": project, "WORKBENCH_USER": user},
        mounts=BackendMounts(view=None, config_map={}, secret={}),
    )


@pytest.fixture
def proxy_rig(tmp_path):
    driver = SimDriver(tmp_path / "logs", enforce_interval=0.05)
    table = RouteTable()
    proxy = ReverseProxy(table, port=0)
    proxy.start()
    yield driver, table, proxy
    proxy.stop()
    driver.shutdown()


class TestForwarding:
    def test_happy_path_and_prefix_strip(self, proxy_rig):
        driver, table, proxy = proxy_rig
        handle = driver.create_instance(_backend_spec("demo__alice_rstudio", 0))
        table.register(
            make_route("demo", "alice", f"127.0.0.1:{handle.spec.listen_port}", "tok-a")
        )
        resp = requests.get(
            f"{proxy.base_url}/workspace/demo/alice/health",
            headers={"Authorization": "Bearer tok-a"},
            timeout=5,
        )
        assert resp.status_code == 200
        assert resp.json()["name"] == "demo__alice_rstudio"

    def test_wrong_token_rejected_backend_untouched(self, proxy_rig):
        driver, table, proxy = proxy_rig
        alice = driver.create_instance(_backend_spec("demo__alice_rstudio", 0))
        bob = driver.create_instance(_backend_spec("demo__bob_rstudio", 0, user="bob"))
        table.register(
            make_route("demo", "alice", f"127.0.0.1:{alice.spec.listen_port}", "tok-a")
        )
        table.register(make_route("demo", "bob", f"127.0.0.1:{bob.spec.listen_port}", "tok-b"))
        resp = requests.get(
            f"{proxy.base_url}/workspace/demo/bob/whoami",
            headers={"Authorization": "Bearer tok-a"},
            timeout=5,
        )
        assert resp.status_code == 401
        assert driver.stub_requests(bob.id) == []

    def test_missing_token_rejected(self, proxy_rig):
        driver, table, proxy = proxy_rig
        handle = driver.create_instance(_backend_spec("demo__alice_rstudio", 0))
        table.register(
            make_route("demo", "alice", f"127.0.0.1:{handle.spec.listen_port}", "tok-a")
        )
        resp = requests.get(f"{proxy.base_url}/workspace/demo/alice/health", timeout=5)
        assert resp.status_code == 401
        assert driver.stub_requests(handle.id) == []

    def test_cookie_fallback(self, proxy_rig):
        driver, table, proxy = proxy_rig
        handle = driver.create_instance(_backend_spec("demo__alice_rstudio", 0))
        table.register(
            make_route("demo", "alice", f"127.0.0.1:{handle.spec.listen_port}", "tok-a")
        )
        resp = requests.get(
            f"{proxy.base_url}/workspace/demo/alice/whoami",
            cookies={TOKEN_COOKIE: "tok-a"},
            timeout=5,
        )
        assert resp.status_code == 200
        assert resp.text == "demo__alice_rstudio"

    def test_unknown_route_404(self, proxy_rig):
        _, _, proxy = proxy_rig
        resp = requests.get(
            f"{proxy.base_url}/workspace/demo/ghost/health",
            headers={"Authorization": "Bearer x"},
            timeout=5,
        )
        assert resp.status_code == 404

    def test_dead_backend_502(self, proxy_rig):
        driver, table, proxy = proxy_rig
        handle = driver.create_instance(_backend_spec("demo__alice_rstudio", 0))
        port = handle.spec.listen_port
        driver.destroy_instance(handle.id)
        table.register(make_route("demo", "alice", f"127.0.0.1:{port}", "tok-a"))
        resp = requests.get(
            f"{proxy.base_url}/workspace/demo/alice/health",
            headers={"Authorization": "Bearer tok-a"},
            timeout=5,
        )
        assert resp.status_code == 502

    def test_post_body_passthrough(self, proxy_rig):
        driver, table, proxy = proxy_rig
        handle = driver.create_instance(_backend_spec("demo__alice_rstudio", 0))
        table.register(
            make_route("demo", "alice", f"127.0.0.1:{handle.spec.listen_port}", "tok-a")
        )
        resp = requests.post(
            f"{proxy.base_url}/workspace/demo/alice/allocate",
            json={"bytes": 1234},
            headers={"Authorization": "Bearer tok-a"},
            timeout=5,
        )
        assert resp.status_code == 200
        assert resp.json()["allocated_bytes"] == 1234


class TestRoutingCorrectnessUnderChurn:
    def test_randomized_churn_never_misroutes(self, proxy_rig):
        driver, table, proxy = proxy_rig
        rng = random.Random(99)
        users = [f"user{i}" for i in range(6)]
        handles = {}
        tokens = {}
        for user in users:
            handle = driver.create_instance(_backend_spec(f"demo__{user}_rstudio", 0, user=user))
            handles[user] = handle
            tokens[user] = f"tok-{user}"

        registered: set[str] = set()
        lock = threading.Lock()
        mismatches: list[tuple[str, str]] = []

        def churn():
            for _ in range(60):
                user = rng.choice(users)
                with lock:
                    try:
                        if user in registered:
                            table.unregister("demo", user)
                            registered.discard(user)
                        else:
                            table.register(
                                make_route(
                                    "demo",
                                    user,
                                    f"127.0.0.1:{handles[user].spec.listen_port}",
                                    tokens[user],
                                )
                            )
                            registered.add(user)
                    except (DuplicateRoute, UnknownRoute):
                        pass

        def fire(session: requests.Session):
            for _ in range(80):
                user = rng.choice(users)
                try:
                    resp = session.get(
                        f"{proxy.base_url}/workspace/demo/{user}/whoami",
                        headers={"Authorization": f"Bearer {tokens[user]}"},
                        timeout=5,
                    )
                except requests.RequestException:
                    continue
                if resp.status_code == 200 and resp.text != f"demo__{user}_rstudio":
                    mismatches.append((user, resp.text))

        churner = threading.Thread(target=churn)
        clients = [threading.Thread(target=fire, args=(requests.Session(),)) for _ in range(4)]
        churner.start()
        for t in clients:
            t.start()
        churner.join()
        for t in clients:
            t.join()
        assert mismatches == []


class TestTls:
    @pytest.mark.filterwarnings("ignore::urllib3.exceptions.InsecureRequestWarning")
    def test_invariants_hold_with_tls_termination(self, tmp_path):
        cryptography = pytest.importorskip("cryptography")
        del cryptography
        from cryptography import x509
        from cryptography.hazmat.primitives import hashes, serialization
        from cryptography.hazmat.primitives.asymmetric import rsa
        from cryptography.x509.oid import NameOID

        key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
        name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, "127.0.0.1")])
        now = dt.datetime.now(dt.timezone.utc)
        cert = (
            x509.CertificateBuilder()
            .subject_name(name)
            .issuer_name(name)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now)
            .not_valid_after(now + dt.timedelta(days=1))
            .sign(key, hashes.SHA256())
        )
        cert_path = tmp_path / "cert.pem"
        key_path = tmp_path / "key.pem"
        cert_path.write_bytes(cert.public_bytes(serialization.Encoding.PEM))
        key_path.write_bytes(
            key.private_bytes(
                serialization.Encoding.PEM,
                serialization.PrivateFormat.TraditionalOpenSSL,
                serialization.NoEncryption(),
            )
        )

        driver = SimDriver(tmp_path / "logs", enforce_interval=0.05)
        table = RouteTable()
        proxy = ReverseProxy(table, port=0, tls_cert=str(cert_path), tls_key=str(key_path))
        proxy.start()
        try:
            handle = driver.create_instance(_backend_spec("demo__alice_rstudio", 0))
            table.register(
                make_route("demo", "alice", f"127.0.0.1:{handle.spec.listen_port}", "tok-a")
            )
            assert proxy.base_url.startswith("https://")
            ok = requests.get(
                f"{proxy.base_url}/workspace/demo/alice/whoami",
                headers={"Authorization": "Bearer tok-a"},
                verify=False,
                timeout=5,
            )
            assert ok.status_code == 200 and ok.text == "demo__alice_rstudio"
            bad = requests.get(
                f"{proxy.base_url}/workspace/demo/alice/whoami",
                headers={"Authorization": "Bearer wrong"},
                verify=False,
                timeout=5,
            )
            assert bad.status_code == 401
        finally:
            proxy.stop()
            driver.shutdown()
