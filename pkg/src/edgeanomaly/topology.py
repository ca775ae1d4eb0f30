"""Layered edge-cloud infrastructure and QoS-aware greedy microservice placement."""

from __future__ import annotations

from dataclasses import dataclass, field

from .appmodel import AppSpec, Compute, Latency, MicroserviceSpec

LAYERS = ("IoT", "Fog1", "Fog2", "Fog3")

# (vcpus, memory GiB) requested per compute-intensity class
DEMAND = {Compute.HCI: (2.0, 2.0), Compute.MCI: (1.0, 1.0), Compute.NONE: (0.5, 0.5)}


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    layer: str
    vcpus: float
    memory: float
    deployable: bool = True

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise ValueError(f"node {self.id}: unknown layer {self.layer!r}")
        if self.vcpus <= 0 or self.memory <= 0:
            raise ValueError(f"node {self.id}: vcpus and memory must be > 0")


@dataclass(frozen=True)
class Link:
    from_layer: str
    to_layer: str
    latency: float
    bandwidth: float

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("link latency must be >= 0")
        if self.bandwidth <= 0:
            raise ValueError("link bandwidth must be > 0")


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    same_layer_latency: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def layer_latency(self, a: str, b: str) -> float:
        """One-way latency between two distinct nodes in layers `a` and `b`."""
        if a == b:
            return self.same_layer_latency
        i, j = sorted((LAYERS.index(a), LAYERS.index(b)))
        total = 0.0
        for k in range(i, j):
            total += self._hop(LAYERS[k], LAYERS[k + 1]).latency
        return total

    def _hop(self, lo: str, hi: str) -> Link:
        for link in self.links:
            if {link.from_layer, link.to_layer} == {lo, hi}:
                return link
        raise KeyError(f"no link between {lo} and {hi}")

    def ordered_nodes(self) -> list[Node]:
        return sorted(self.nodes, key=lambda n: (LAYERS.index(n.layer), n.id))


def default_topology() -> Topology:
    nodes = []
    for layer, count, vcpus, mem in (("IoT", 2, 2, 8), ("Fog1", 4, 2, 8), ("Fog2", 3, 4, 16), ("Fog3", 1, 8, 32)):
        for i in range(1, count + 1):
            nodes.append(Node(f"{layer.lower()}-{i}", layer, vcpus, mem))
    links = (
        Link("IoT", "Fog1", 5.0, 100.0),
        Link("Fog1", "Fog2", 20.0, 10.0),
        Link("Fog2", "Fog3", 50.0, 0.15),
    )
    return Topology(tuple(nodes), links, same_layer_latency=2.0)


def demand(ms: MicroserviceSpec) -> tuple[float, float]:
    return DEMAND[ms.qos.compute]


_COMPUTE_RANK = {Compute.HCI: 0, Compute.MCI: 1, Compute.NONE: 2}


@dataclass
class Placement:
    assignments: dict[str, str] = field(default_factory=dict)
    residual: dict[str, tuple[float, float]] = field(default_factory=dict)
    allocated: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "assignments": dict(self.assignments),
            "allocated": {k: list(v) for k, v in self.allocated.items()},
            "residual": {k: list(v) for k, v in self.residual.items()},
        }


def place(app: AppSpec, topo: Topology) -> Placement:
    """Greedy QoS-aware placement.

    Latency-critical microservices go first, then by descending compute intensity; each
    lands on the lowest-layer deployable node that still fits it (node id breaks ties).
    """
    residual = {n.id: (float(n.vcpus), float(n.memory)) for n in topo.nodes if n.deployable}
    need_cpu = sum(demand(m)[0] for m in app.microservices)
    need_mem = sum(demand(m)[1] for m in app.microservices)
    if need_cpu > sum(c for c, _ in residual.values()) or need_mem > sum(m for _, m in residual.values()):
        raise PlacementError(
            f"{app.id}: demand {need_cpu:g} vCPU / {need_mem:g} GiB exceeds topology capacity"
        )

    order = sorted(
        enumerate(app.microservices),
        key=lambda im: (im[1].qos.latency is not Latency.LC, _COMPUTE_RANK[im[1].qos.compute], im[0]),
    )
    candidates = [n for n in topo.ordered_nodes() if n.deployable]
    placement = Placement(residual=residual)
    for _, ms in order:
        cpu, mem = demand(ms)
        for n in candidates:
            free_cpu, free_mem = residual[n.id]
            if free_cpu >= cpu and free_mem >= mem:
                residual[n.id] = (free_cpu - cpu, free_mem - mem)
                placement.assignments[ms.id] = n.id
                placement.allocated[ms.id] = (cpu, mem)
                break
        else:
            raise PlacementError(f"{app.id}: no node can host {ms.id} ({cpu:g} vCPU, {mem:g} GiB)")
    return placement


def path_latency(p: Placement, topo: Topology, a: str, b: str) -> float:
    try:
        na, nb = p.assignments[a], p.assignments[b]
    except KeyError as exc:
        raise PlacementError(f"microservice {exc.args[0]!r} is not placed") from None
    if na == nb:
        return 0.0
    return topo.layer_latency(topo.node(na).layer, topo.node(nb).layer)


def client_latency(p: Placement, topo: Topology, ms: str, client_layer: str = "IoT") -> float:
    """Latency from an external client device in `client_layer` to the node hosting `ms`."""
    if ms not in p.assignments:
        raise PlacementError(f"microservice {ms!r} is not placed")
    return topo.layer_latency(client_layer, topo.node(p.assignments[ms]).layer)
