"""Physical multi-fog/cloud infrastructure graph.

The infrastructure is a three-tier graph: fog nodes (FNs, finite capacity pools)
attach to exactly one fog-cloud interface (FCI); FCIs interconnect and bridge to
a single aggregate cloud node. Links carry bandwidth capacity (Mbps) and latency
(ms). Hop distance between hosting locations counts the FCIs traversed.
"""

from __future__ import annotations

import math
import heapq
import random
from collections import deque
from dataclasses import dataclass, field

FOG = "fog"
FCI = "fci"
CLOUD = "cloud"


class GraphConfigError(ValueError):
    """Raised when an environment config cannot produce a valid graph."""


@dataclass(frozen=True, order=True)
class NodeId:
    tier: str
    index: int

    def __str__(self) -> str:
        return f"{self.tier}-{self.index}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        tier, _, idx = text.rpartition("-")
        if tier not in (FOG, FCI, CLOUD):
            raise ValueError(f"unknown node tier in {text!r}")
        return cls(tier, int(idx))


@dataclass
class FogNode:
    id: NodeId
    cpu_capacity: int
    mem_capacity: int
    mips: int
    attached_fci: NodeId


@dataclass
class CloudNode:
    id: NodeId
    cpu_capacity: int
    mem_capacity: int


@dataclass
class Link:
    endpoints: tuple[NodeId, NodeId]
    bandwidth_capacity: float
    latency: float

    @property
    def key(self) -> tuple[NodeId, NodeId]:
        a, b = self.endpoints
        return (a, b) if a <= b else (b, a)


def _range(value, name: str, integral: bool = False) -> tuple[float, float]:
    try:
        lo, hi = value
    except (TypeError, ValueError):
        raise GraphConfigError(f"{name} must be a [min, max] pair") from None
    if lo > hi:
        raise GraphConfigError(f"{name} range has min > max: {value}")
    if integral:
        return (int(lo), int(hi))
    return (float(lo), float(hi))


@dataclass
class EnvConfig:
    """Environment generator parameters (counts plus [min, max] ranges)."""

    fns: int = 500
    fcis: int = 200
    cpu: tuple[int, int] = (50, 100)
    mem_mb: tuple[int, int] = (200000, 400000)
    mips: tuple[int, int] = (3000, 5000)
    bw_fn_fci_mbps: tuple[float, float] = (300, 400)
    bw_fci_fci_mbps: tuple[float, float] = (400, 1000)
    bw_fci_cloud_mbps: tuple[float, float] = (400, 1000)
    bw_fn_cloud_mbps: tuple[float, float] = (400, 1000)
    lat_fn_fci_ms: tuple[float, float] = (50, 100)
    lat_fci_fci_ms: tuple[float, float] = (101, 200)
    lat_fci_cloud_ms: tuple[float, float] = (101, 200)
    lat_fn_cloud_ms: tuple[float, float] = (101, 200)
    fci_link_probability: float = 0.15
    fn_cloud_link_probability: float = 0.0
    max_hops: int = 2
    cloud_cpu: int | None = None
    cloud_mem_mb: int | None = None
    cloud_scale: float = 10.0

    def __post_init__(self) -> None:
        if self.fns < 0 or self.fcis < 0:
            raise GraphConfigError("node counts must be non-negative")
        if self.fns > 0 and self.fcis == 0:
            raise GraphConfigError("fog nodes require at least one FCI to attach to")
        self.cpu = _range(self.cpu, "cpu", integral=True)
        self.mem_mb = _range(self.mem_mb, "mem_mb", integral=True)
        self.mips = _range(self.mips, "mips", integral=True)
        for name in ("bw_fn_fci_mbps", "bw_fci_fci_mbps", "bw_fci_cloud_mbps",
                     "bw_fn_cloud_mbps", "lat_fn_fci_ms", "lat_fci_fci_ms",
                     "lat_fci_cloud_ms", "lat_fn_cloud_ms"):
            setattr(self, name, _range(getattr(self, name), name))
        if self.cpu[0] <= 0 or self.mem_mb[0] <= 0 or self.mips[0] <= 0:
            raise GraphConfigError("capacity ranges must be strictly positive")
        for name in ("bw_fn_fci_mbps", "bw_fci_fci_mbps", "bw_fci_cloud_mbps",
                     "bw_fn_cloud_mbps", "lat_fn_fci_ms", "lat_fci_fci_ms",
                     "lat_fci_cloud_ms", "lat_fn_cloud_ms"):
            if getattr(self, name)[0] <= 0:
                raise GraphConfigError(f"{name} must be strictly positive")
        for name in ("fci_link_probability", "fn_cloud_link_probability"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise GraphConfigError(f"{name} must lie in [0, 1]")
        if self.max_hops not in (1, 2):
            raise GraphConfigError("max_hops must be 1 or 2")
        # Access links must be strictly faster than the backbone: the generated
        # graph guarantees max FN-FCI latency < min FCI-FCI / FCI-cloud latency.
        backbone_min = min(self.lat_fci_fci_ms[0], self.lat_fci_cloud_ms[0])
        if self.fn_cloud_link_probability > 0:
            backbone_min = min(backbone_min, self.lat_fn_cloud_ms[0])
        if self.fns > 0 and self.lat_fn_fci_ms[1] >= backbone_min:
            raise GraphConfigError(
                "latency ordering violated: max FN-FCI latency "
                f"{self.lat_fn_fci_ms[1]} must be < min backbone latency {backbone_min}")

    @classmethod
    def from_dict(cls, doc: dict) -> "EnvConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise GraphConfigError(f"unknown environment config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class PhysicalPath:
    nodes: tuple[NodeId, ...]
    total_latency: float
    min_bandwidth: float
    hop_count: int

    @property
    def links(self) -> list[tuple[NodeId, NodeId]]:
        return [_pair_key(a, b) for a, b in zip(self.nodes, self.nodes[1:])]


@dataclass
class NoPath:
    src: NodeId
    dst: NodeId
    required_bandwidth: float


def _pair_key(a: NodeId, b: NodeId) -> tuple[NodeId, NodeId]:
    return (a, b) if a <= b else (b, a)


@dataclass
class ResourceGraph:
    fns: list[FogNode]
    fcis: list[NodeId]
    cloud: CloudNode
    links: list[Link]

    def __post_init__(self) -> None:
        self.fn_by_id: dict[NodeId, FogNode] = {fn.id: fn for fn in self.fns}
        self.adjacency: dict[NodeId, list[tuple[NodeId, Link]]] = {}
        self.link_by_key: dict[tuple[NodeId, NodeId], Link] = {}
        for link in self.links:
            a, b = link.endpoints
            key = link.key
            if key in self.link_by_key:
                raise GraphConfigError(f"duplicate link between {a} and {b}")
            self.link_by_key[key] = link
            self.adjacency.setdefault(a, []).append((b, link))
            self.adjacency.setdefault(b, []).append((a, link))
        for neighbors in self.adjacency.values():
            neighbors.sort(key=lambda pair: pair[0])
        self.fci_of: dict[NodeId, NodeId] = {fn.id: fn.attached_fci for fn in self.fns}
        self.fns_by_fci: dict[NodeId, list[NodeId]] = {f: [] for f in self.fcis}
        for fn in self.fns:
            self.fns_by_fci[fn.attached_fci].append(fn.id)
        self.fci_adjacency: dict[NodeId, set[NodeId]] = {f: set() for f in self.fcis}
        self.cloud_linked_fcis: set[NodeId] = set()
        self.fn_cloud_linked: set[NodeId] = set()
        for link in self.links:
            a, b = link.endpoints
            if a.tier == FCI and b.tier == FCI:
                self.fci_adjacency[a].add(b)
                self.fci_adjacency[b].add(a)
            elif {a.tier, b.tier} == {FCI, CLOUD}:
                fci = a if a.tier == FCI else b
                self.cloud_linked_fcis.add(fci)
            elif {a.tier, b.tier} == {FOG, CLOUD}:
                fn = a if a.tier == FOG else b
                self.fn_cloud_linked.add(fn)
        self._fci_dist_cache: dict[NodeId, dict[NodeId, int]] = {}
        self._cloud_fci_dist: dict[NodeId, int] | None = None

    def node_ids(self) -> list[NodeId]:
        return [fn.id for fn in self.fns] + list(self.fcis) + [self.cloud.id]

    def locations(self) -> list[NodeId]:
        """Hosting locations: all FNs plus the cloud, in id order."""
        return sorted(self.fn_by_id) + [self.cloud.id]

    # FCI-subgraph breadth-first distances (number of FCI-FCI links); the cloud
    # never appears as a transit element here, matching the hop definitions.
    def _fci_distances(self, source: NodeId) -> dict[NodeId, int]:
        cached = self._fci_dist_cache.get(source)
        if cached is not None:
            return cached
        dist = {source: 0}
        queue = deque([source])
        while queue:
            cur = queue.popleft()
            for nxt in self.fci_adjacency[cur]:
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    queue.append(nxt)
        self._fci_dist_cache[source] = dist
        return dist

    def _cloud_fci_distances(self) -> dict[NodeId, int]:
        """Multi-source BFS distance from any cloud-linked FCI."""
        if self._cloud_fci_dist is None:
            dist = {f: 0 for f in self.cloud_linked_fcis}
            queue = deque(sorted(dist))
            while queue:
                cur = queue.popleft()
                for nxt in self.fci_adjacency[cur]:
                    if nxt not in dist:
                        dist[nxt] = dist[cur] + 1
                        queue.append(nxt)
            self._cloud_fci_dist = dist
        return self._cloud_fci_dist


def build_graph(env: EnvConfig, seed) -> ResourceGraph:
    """Generate a deterministic infrastructure graph from (config, seed)."""
    rng = random.Random(seed)
    fcis = [NodeId(FCI, i) for i in range(env.fcis)]
    cloud_id = NodeId(CLOUD, 0)

    fns: list[FogNode] = []
    for i in range(env.fns):
        attached = fcis[rng.randrange(env.fcis)]
        fns.append(FogNode(
            id=NodeId(FOG, i),
            cpu_capacity=rng.randint(*env.cpu),
            mem_capacity=rng.randint(*env.mem_mb),
            mips=rng.randint(*env.mips),
            attached_fci=attached,
        ))

    fn_cpu_sum = sum(fn.cpu_capacity for fn in fns)
    fn_mem_sum = sum(fn.mem_capacity for fn in fns)
    cloud_cpu = env.cloud_cpu
    if cloud_cpu is None:
        cloud_cpu = max(10 ** 6, math.ceil(env.cloud_scale * fn_cpu_sum))
    cloud_mem = env.cloud_mem_mb
    if cloud_mem is None:
        cloud_mem = max(10 ** 9, math.ceil(env.cloud_scale * fn_mem_sum))
    cloud = CloudNode(id=cloud_id, cpu_capacity=cloud_cpu, mem_capacity=cloud_mem)

    links: list[Link] = []
    for fn in fns:
        links.append(Link((fn.id, fn.attached_fci),
                          rng.uniform(*env.bw_fn_fci_mbps),
                          rng.uniform(*env.lat_fn_fci_ms)))
    for i in range(env.fcis):
        for j in range(i + 1, env.fcis):
            if rng.random() < env.fci_link_probability:
                links.append(Link((fcis[i], fcis[j]),
                                  rng.uniform(*env.bw_fci_fci_mbps),
                                  rng.uniform(*env.lat_fci_fci_ms)))
    for fci in fcis:
        links.append(Link((fci, cloud_id),
                          rng.uniform(*env.bw_fci_cloud_mbps),
                          rng.uniform(*env.lat_fci_cloud_ms)))
    if env.fn_cloud_link_probability > 0:
        for fn in fns:
            if rng.random() < env.fn_cloud_link_probability:
                links.append(Link((fn.id, cloud_id),
                                  rng.uniform(*env.bw_fn_cloud_mbps),
                                  rng.uniform(*env.lat_fn_cloud_ms)))
    return ResourceGraph(fns=fns, fcis=fcis, cloud=cloud, links=links)


def hop_distance(g: ResourceGraph, a: NodeId, b: NodeId):
    """Minimum number of FCIs on a physical path between two hosting locations.

    Returns 0 iff a == b, and None when the pair is unreachable. Paths between
    two fog nodes never transit the cloud (a route through the cloud is cloud
    offloading, not a multi-hop fog path).
    """
    for node in (a, b):
        if node.tier == FCI:
            raise ValueError(f"{node} is not a hosting location")
        if node.tier == FOG and node not in g.fn_by_id:
            raise ValueError(f"unknown fog node {node}")
    if a == b:
        return 0
    if a.tier == CLOUD or b.tier == CLOUD:
        fn = b if a.tier == CLOUD else a
        best = None
        fci = g.fci_of[fn]
        reach = g._cloud_fci_distances().get(fci)
        if reach is not None:
            best = reach + 1
        if fn in g.fn_cloud_linked:
            # Direct FN-cloud link involves no FCI; floor at 1 to keep the
            # "0 iff identical" contract.
            best = 1
        return best
    fa, fb = g.fci_of[a], g.fci_of[b]
    if fa == fb:
        return 1
    dist = g._fci_distances(fa).get(fb)
    return None if dist is None else dist + 1


def nodes_within_hops(g: ResourceGraph, origins, h: int) -> set[NodeId]:
    """All FN/cloud locations within h hops of any origin, excluding origins."""
    if h not in (1, 2):
        raise ValueError("h must be 1 or 2")
    origins = set(origins)
    if not origins:
        raise ValueError("origins must be nonempty")
    result: set[NodeId] = set()
    for origin in origins:
        for candidate in g.locations():
            if candidate in origins:
                continue
            d = hop_distance(g, origin, candidate)
            if d is not None and d <= h:
                result.add(candidate)
    return result


def shortest_path(g: ResourceGraph, a: NodeId, b: NodeId,
                  required_bandwidth: float, residual_bw=None):
    """Latency-minimal path whose every link has residual bandwidth >= demand.

    `residual_bw` maps link keys to residual Mbps (defaults to capacities).
    Ties break on fewer links, then the lexicographically smallest node
    sequence. Returns a NoPath result when no feasible route exists.
    """
    if a == b:
        return PhysicalPath(nodes=(a,), total_latency=0.0,
                            min_bandwidth=math.inf, hop_count=0)
    lookup = residual_bw if residual_bw is not None else {}
    best_seen: dict[NodeId, tuple] = {}
    heap = [(0.0, 0, (a,))]
    while heap:
        latency, nlinks, path = heapq.heappop(heap)
        node = path[-1]
        seen = best_seen.get(node)
        if seen is not None and seen < (latency, nlinks, path):
            continue
        if node == b:
            min_bw = math.inf
            for u, v in zip(path, path[1:]):
                key = _pair_key(u, v)
                link = g.link_by_key[key]
                min_bw = min(min_bw, lookup.get(key, link.bandwidth_capacity))
            return PhysicalPath(
                nodes=path,
                total_latency=latency,
                min_bandwidth=min_bw,
                hop_count=sum(1 for n in path if n.tier == FCI),
            )
        for neighbor, link in g.adjacency.get(node, ()):
            if neighbor in path:
                continue
            avail = lookup.get(link.key, link.bandwidth_capacity)
            if avail < required_bandwidth:
                continue
            cand = (latency + link.latency, nlinks + 1, path + (neighbor,))
            prev = best_seen.get(neighbor)
            if prev is None or cand < prev:
                best_seen[neighbor] = cand
                heapq.heappush(heap, cand)
    return NoPath(src=a, dst=b, required_bandwidth=required_bandwidth)
