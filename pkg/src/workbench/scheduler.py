"""Node registry, reservation admission, and capacity planning.

Admission is reservation-based: a workspace reserves memory and CPU on one
node at placement time and gives both back on release. Placement policy is
most-free-memory first with lexicographic node-id tie-break, which makes
every placement decision reproducible.

Nodes distinguish raw capacity from allocatable resources. By default a
node keeps 8 GiB of memory and 1 core aside for system services, so a
30720 MiB worker exposes 22528 MiB to tenants; with 2048 MiB reservations
that is 11 workspaces per node. Both overheads are configuration, not a
claim about any particular cluster product.

Planning figures are linear per concurrent workspace: 3 GB of RAM and 0.8
CPUs each (the reservation plus amortized system overhead).
"""

from __future__ import annotations

import copy
import math
import threading
from dataclasses import dataclass, field

from .errors import (
    DuplicateName,
    InsufficientResources,
    InvalidAllocatable,
    InvalidRequest,
    NoSuchReservation,
)

DEFAULT_MEM_OVERHEAD_MIB = 8192
DEFAULT_CPU_OVERHEAD_MILLICORES = 1000

PLAN_RAM_GB_PER_SERVER = 3
PLAN_CPUS_PER_SERVER = 0.8


@dataclass(frozen=True)
class Reservation:
    instance: str
    mem: int  # MiB
    cpu: int  # millicores

    def __post_init__(self):
        if self.mem <= 0 or self.cpu <= 0:
            raise InvalidRequest(
                f"reservation must be positive on both axes, got mem={self.mem} cpu={self.cpu}"
            )


@dataclass
class NodeState:
    id: str
    capacity_mem: int
    capacity_cpu: int
    allocatable_mem: int
    allocatable_cpu: int
    reservations: list[Reservation] = field(default_factory=list)

    @property
    def reserved_mem(self) -> int:
        return sum(r.mem for r in self.reservations)

    @property
    def reserved_cpu(self) -> int:
        return sum(r.cpu for r in self.reservations)

    @property
    def free_mem(self) -> int:
        return self.allocatable_mem - self.reserved_mem

    @property
    def free_cpu(self) -> int:
        return self.allocatable_cpu - self.reserved_cpu

    def fits(self, r: Reservation) -> bool:
        return self.free_mem >= r.mem and self.free_cpu >= r.cpu


@dataclass(frozen=True)
class CapacityPlan:
    servers: int
    required_ram_gb: int
    min_cpus: int


@dataclass(frozen=True)
class ClusterEvent:
    seq: int
    op: str  # "register" | "place" | "release"
    node: str
    instance: str | None = None
    mem: int = 0
    cpu: int = 0
    allocatable_mem: int = 0
    allocatable_cpu: int = 0


@dataclass
class FillReport:
    admitted: int
    rejected: int
    per_node: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "admitted": self.admitted,
            "rejected": self.rejected,
            "per_node": dict(sorted(self.per_node.items())),
        }


def plan_capacity(servers: int) -> CapacityPlan:
    if servers < 0:
        raise InvalidRequest("server count must be >= 0")
    return CapacityPlan(
        servers=servers,
        required_ram_gb=PLAN_RAM_GB_PER_SERVER * servers,
        min_cpus=math.ceil(PLAN_CPUS_PER_SERVER * servers),
    )


class Cluster:
    """Linearizable reservation ledger over a set of worker nodes.

    Every mutation appends to an event log; ``replay_audit`` over that log
    independently re-derives per-node sums and reports any instant at which
    a node would have been oversubscribed.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._nodes: dict[str, NodeState] = {}
        self._instance_node: dict[str, str] = {}
        self._events: list[ClusterEvent] = []
        self._seq = 0
        self._auto_id = 0

    def _emit(self, **kwargs) -> None:
        self._seq += 1
        self._events.append(ClusterEvent(seq=self._seq, **kwargs))

    def register_node(
        self,
        capacity_mem: int,
        capacity_cpu: int,
        allocatable_mem: int | None = None,
        allocatable_cpu: int | None = None,
        node_id: str | None = None,
    ) -> NodeState:
        if allocatable_mem is None:
            allocatable_mem = max(capacity_mem - DEFAULT_MEM_OVERHEAD_MIB, 0)
        if allocatable_cpu is None:
            allocatable_cpu = max(capacity_cpu - DEFAULT_CPU_OVERHEAD_MILLICORES, 0)
        if allocatable_mem > capacity_mem or allocatable_cpu > capacity_cpu:
            raise InvalidAllocatable(
                f"allocatable ({allocatable_mem} MiB, {allocatable_cpu} mc) exceeds "
                f"capacity ({capacity_mem} MiB, {capacity_cpu} mc)"
            )
        if allocatable_mem < 0 or allocatable_cpu < 0:
            raise InvalidAllocatable("allocatable resources must be >= 0")
        with self._lock:
            if node_id is None:
                self._auto_id += 1
                node_id = f"node-{self._auto_id:03d}"
            existing = self._nodes.get(node_id)
            if existing is not None:
                same = (
                    existing.capacity_mem == capacity_mem
                    and existing.capacity_cpu == capacity_cpu
                    and existing.allocatable_mem == allocatable_mem
                    and existing.allocatable_cpu == allocatable_cpu
                )
                if same:
                    return copy.deepcopy(existing)
                raise DuplicateName(f"node {node_id!r} already registered with different shape")
            node = NodeState(node_id, capacity_mem, capacity_cpu, allocatable_mem, allocatable_cpu)
            self._nodes[node_id] = node
            self._emit(
                op="register",
                node=node_id,
                allocatable_mem=allocatable_mem,
                allocatable_cpu=allocatable_cpu,
            )
            return copy.deepcopy(node)

    def place(self, r: Reservation) -> str:
        """Admit a reservation; returns the chosen node id.

        The chosen node has enough free memory and CPU at decision time and
        the reservation is appended in the same atomic step. On rejection
        the cluster is left untouched.
        """
        with self._lock:
            if r.instance in self._instance_node:
                raise DuplicateName(f"instance {r.instance!r} already holds a reservation")
            candidates = [n for n in self._nodes.values() if n.fits(r)]
            if not candidates:
                raise InsufficientResources(
                    f"no node can fit {r.mem} MiB / {r.cpu} mc "
                    f"(nodes={len(self._nodes)})"
                )
            candidates.sort(key=lambda n: (-n.free_mem, n.id))
            node = candidates[0]
            node.reservations.append(r)
            self._instance_node[r.instance] = node.id
            self._emit(op="place", node=node.id, instance=r.instance, mem=r.mem, cpu=r.cpu)
            return node.id

    def release(self, instance: str) -> Reservation:
        with self._lock:
            node_id = self._instance_node.pop(instance, None)
            if node_id is None:
                raise NoSuchReservation(f"no reservation for instance {instance!r}")
            node = self._nodes[node_id]
            for i, r in enumerate(node.reservations):
                if r.instance == instance:
                    node.reservations.pop(i)
                    self._emit(op="release", node=node_id, instance=instance, mem=r.mem, cpu=r.cpu)
                    return r
            raise NoSuchReservation(f"no reservation for instance {instance!r}")  # pragma: no cover

    def node_of(self, instance: str) -> str | None:
        with self._lock:
            return self._instance_node.get(instance)

    def nodes_snapshot(self) -> list[NodeState]:
        with self._lock:
            return [copy.deepcopy(n) for n in sorted(self._nodes.values(), key=lambda n: n.id)]

    def events_snapshot(self) -> list[ClusterEvent]:
        with self._lock:
            return list(self._events)

    @property
    def total_allocatable_mem(self) -> int:
        with self._lock:
            return sum(n.allocatable_mem for n in self._nodes.values())

    @property
    def total_allocatable_cpu(self) -> int:
        with self._lock:
            return sum(n.allocatable_cpu for n in self._nodes.values())


def replay_audit(events: list[ClusterEvent]) -> list[str]:
    """Re-derive node accounting from the event log.

    Returns one message per violation: an oversubscribed instant, a release
    without a matching place, or a placement on an unregistered node. An
    empty list means the log is consistent.
    """
    violations: list[str] = []
    alloc: dict[str, tuple[int, int]] = {}
    used: dict[str, tuple[int, int]] = {}
    held: dict[str, tuple[str, int, int]] = {}
    for ev in events:
        if ev.op == "register":
            alloc[ev.node] = (ev.allocatable_mem, ev.allocatable_cpu)
            used.setdefault(ev.node, (0, 0))
        elif ev.op == "place":
            if ev.node not in alloc:
                violations.append(f"seq {ev.seq}: place on unregistered node {ev.node}")
                continue
            if ev.instance in held:
                violations.append(f"seq {ev.seq}: instance {ev.instance} placed twice")
            mem, cpu = used[ev.node]
            mem, cpu = mem + ev.mem, cpu + ev.cpu
            used[ev.node] = (mem, cpu)
            held[ev.instance] = (ev.node, ev.mem, ev.cpu)
            amax, cmax = alloc[ev.node]
            if mem > amax or cpu > cmax:
                violations.append(
                    f"seq {ev.seq}: node {ev.node} oversubscribed "
                    f"({mem}/{amax} MiB, {cpu}/{cmax} mc)"
                )
        elif ev.op == "release":
            entry = held.pop(ev.instance, None)
            if entry is None:
                violations.append(f"seq {ev.seq}: release without reservation ({ev.instance})")
                continue
            node, mem, cpu = entry
            umem, ucpu = used[node]
            used[node] = (umem - mem, ucpu - cpu)
            if used[node][0] < 0 or used[node][1] < 0:
                violations.append(f"seq {ev.seq}: node {node} accounting went negative")
    return violations


def uniform_nodes(
    count: int,
    capacity_mem: int,
    capacity_cpu: int,
    allocatable_mem: int | None = None,
    allocatable_cpu: int | None = None,
) -> list[NodeState]:
    """Build ``count`` identical unreserved nodes (ids node-001, node-002, ...)."""
    if allocatable_mem is None:
        allocatable_mem = max(capacity_mem - DEFAULT_MEM_OVERHEAD_MIB, 0)
    if allocatable_cpu is None:
        allocatable_cpu = max(capacity_cpu - DEFAULT_CPU_OVERHEAD_MILLICORES, 0)
    return [
        NodeState(f"node-{i + 1:03d}", capacity_mem, capacity_cpu, allocatable_mem, allocatable_cpu)
        for i in range(count)
    ]


def simulate_fill(nodes: list[NodeState], per_server: Reservation, attempts: int) -> FillReport:
    """Fill a private copy of the given nodes with identical reservations.

    Deterministic: same nodes and reservation shape always produce the same
    per-node distribution. The caller's nodes are never mutated.
    """
    if attempts < 0:
        raise InvalidRequest("attempts must be >= 0")
    cluster = Cluster()
    for node in nodes:
        cluster.register_node(
            node.capacity_mem,
            node.capacity_cpu,
            node.allocatable_mem,
            node.allocatable_cpu,
            node_id=node.id,
        )
        for r in node.reservations:
            # Preserve existing bindings in the private copy.
            cluster._nodes[node.id].reservations.append(r)
            cluster._instance_node[r.instance] = node.id
    admitted = 0
    rejected = 0
    per_node: dict[str, int] = {node.id: 0 for node in nodes}
    for i in range(attempts):
        candidate = Reservation(f"fill-{i + 1}", per_server.mem, per_server.cpu)
        try:
            node_id = cluster.place(candidate)
        except InsufficientResources:
            rejected += 1
        else:
            admitted += 1
            per_node[node_id] += 1
    return FillReport(admitted=admitted, rejected=rejected, per_node=per_node)
