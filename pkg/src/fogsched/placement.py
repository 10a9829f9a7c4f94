"""Multi-hop location selection and task-edge path mapping.

Levels are consumed root-first (LIFO over the level queue), tasks within a
level in descending mean-critical-value order. Each task is first-fit against
the locations hosting its already-placed children (falling back to the app's
home fog node when none are placed yet), then the 1-hop fog set, the 2-hop
fog set, and finally the cloud. Task edges adjacent to the level are mapped on latency-shortest
bandwidth-feasible paths. After each level the resource matrix is reset to the
admission snapshot: consecutive levels run sequentially, never concurrently,
so they may reuse the same capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .ordering import ProcessQueue
from .topology import (CLOUD, FOG, NoPath, NodeId, PhysicalPath, ResourceGraph,
                       nodes_within_hops, shortest_path)
from .workload import Application, Task


class PlacementError(ValueError):
    pass


class _BwView:
    """Residual-bandwidth lookup for shortest_path over a ResourceMatrix."""

    __slots__ = ("_rm",)

    def __init__(self, rm: "ResourceMatrix"):
        self._rm = rm

    def get(self, key, default=None):
        eff = self._rm.effective_bw.get(key)
        if eff is None:
            return default
        return eff - self._rm.held_bw[key]


@dataclass
class ResourceMatrix:
    """Residual cpu/mem per location and residual bandwidth per link.

    Holdings and effective capacities are tracked separately so availability
    fluctuation can shrink capacity without ever revoking an existing hold.
    """

    capacity_cpu: dict[NodeId, float]
    capacity_mem: dict[NodeId, float]
    capacity_bw: dict[tuple[NodeId, NodeId], float]
    effective_cpu: dict[NodeId, float] = field(default_factory=dict)
    effective_mem: dict[NodeId, float] = field(default_factory=dict)
    effective_bw: dict[tuple[NodeId, NodeId], float] = field(default_factory=dict)
    held_cpu: dict[NodeId, float] = field(default_factory=dict)
    held_mem: dict[NodeId, float] = field(default_factory=dict)
    held_bw: dict[tuple[NodeId, NodeId], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.effective_cpu:
            self.effective_cpu = dict(self.capacity_cpu)
            self.effective_mem = dict(self.capacity_mem)
            self.effective_bw = dict(self.capacity_bw)
        if not self.held_cpu:
            self.held_cpu = {n: 0.0 for n in self.capacity_cpu}
            self.held_mem = {n: 0.0 for n in self.capacity_mem}
            self.held_bw = {k: 0.0 for k in self.capacity_bw}

    @classmethod
    def from_graph(cls, graph: ResourceGraph) -> "ResourceMatrix":
        cpu = {fn.id: float(fn.cpu_capacity) for fn in graph.fns}
        mem = {fn.id: float(fn.mem_capacity) for fn in graph.fns}
        cpu[graph.cloud.id] = float(graph.cloud.cpu_capacity)
        mem[graph.cloud.id] = float(graph.cloud.mem_capacity)
        bw = {link.key: float(link.bandwidth_capacity) for link in graph.links}
        return cls(capacity_cpu=cpu, capacity_mem=mem, capacity_bw=bw)

    def residual_cpu(self, node: NodeId) -> float:
        return self.effective_cpu[node] - self.held_cpu[node]

    def residual_mem(self, node: NodeId) -> float:
        return self.effective_mem[node] - self.held_mem[node]

    def residual_bw(self, key) -> float:
        return self.effective_bw[key] - self.held_bw[key]

    def bw_view(self) -> _BwView:
        return _BwView(self)

    def fits(self, task: Task, node: NodeId) -> bool:
        return (self.residual_cpu(node) >= task.cpu_demand
                and self.residual_mem(node) >= task.mem_demand)

    def debit_task(self, task: Task, node: NodeId) -> None:
        if not self.fits(task, node):
            raise PlacementError(
                f"debit would overdraw {node}: task {task.id} demands "
                f"({task.cpu_demand}, {task.mem_demand})")
        self.held_cpu[node] += task.cpu_demand
        self.held_mem[node] += task.mem_demand

    def debit_node(self, node: NodeId, cpu: float, mem: float) -> None:
        if (self.residual_cpu(node) < cpu - 1e-9
                or self.residual_mem(node) < mem - 1e-9):
            raise PlacementError(f"debit would overdraw {node}")
        self.held_cpu[node] += cpu
        self.held_mem[node] += mem

    def credit_node(self, node: NodeId, cpu: float, mem: float) -> None:
        self.held_cpu[node] = max(0.0, self.held_cpu[node] - cpu)
        self.held_mem[node] = max(0.0, self.held_mem[node] - mem)

    def debit_link(self, key, amount: float) -> None:
        if self.residual_bw(key) < amount - 1e-9:
            raise PlacementError(f"bandwidth debit would overdraw link {key}")
        self.held_bw[key] += amount

    def credit_link(self, key, amount: float) -> None:
        self.held_bw[key] = max(0.0, self.held_bw[key] - amount)

    def snapshot(self) -> dict:
        return {
            "effective_cpu": dict(self.effective_cpu),
            "effective_mem": dict(self.effective_mem),
            "effective_bw": dict(self.effective_bw),
            "held_cpu": dict(self.held_cpu),
            "held_mem": dict(self.held_mem),
            "held_bw": dict(self.held_bw),
        }

    def clone(self) -> "ResourceMatrix":
        return ResourceMatrix(
            capacity_cpu=self.capacity_cpu,
            capacity_mem=self.capacity_mem,
            capacity_bw=self.capacity_bw,
            effective_cpu=dict(self.effective_cpu),
            effective_mem=dict(self.effective_mem),
            effective_bw=dict(self.effective_bw),
            held_cpu=dict(self.held_cpu),
            held_mem=dict(self.held_mem),
            held_bw=dict(self.held_bw),
        )


def reset_rm(rm: ResourceMatrix, snapshot: dict) -> ResourceMatrix:
    """Restore residuals exactly to an admission-time snapshot."""
    rm.effective_cpu = dict(snapshot["effective_cpu"])
    rm.effective_mem = dict(snapshot["effective_mem"])
    rm.effective_bw = dict(snapshot["effective_bw"])
    rm.held_cpu = dict(snapshot["held_cpu"])
    rm.held_mem = dict(snapshot["held_mem"])
    rm.held_bw = dict(snapshot["held_bw"])
    return rm


@dataclass
class LevelDebit:
    cpu: dict[NodeId, float] = field(default_factory=dict)
    mem: dict[NodeId, float] = field(default_factory=dict)
    bw: dict[tuple[NodeId, NodeId], float] = field(default_factory=dict)


@dataclass
class Placement:
    app_id: str
    home_fn: NodeId
    task_locations: dict[str, NodeId] = field(default_factory=dict)
    edge_paths: dict[tuple[str, str], PhysicalPath] = field(default_factory=dict)
    unmapped: dict[tuple[str, str], str] = field(default_factory=dict)
    ignored: set = field(default_factory=set)
    rejected: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    level_order: list[list[str]] = field(default_factory=list)
    level_debits: list[LevelDebit] = field(default_factory=list)
    level_durations: list[float] = field(default_factory=list)
    pinned_task: str | None = None
    home_pin_infeasible: bool = False

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "home_fn": str(self.home_fn),
            "locations": {t: str(n) for t, n in sorted(self.task_locations.items())},
            "paths": {f"{s}->{d}": [str(n) for n in p.nodes]
                      for (s, d), p in sorted(self.edge_paths.items())},
            "unmapped": {f"{s}->{d}": reason
                         for (s, d), reason in sorted(self.unmapped.items())},
            "ignored": sorted(f"{s}->{d}" for s, d in self.ignored),
            "rejected": [[t, reason] for t, reason in self.rejected],
            "violations": [list(v) for v in self.violations],
        }


def try_deploy(task: Task, candidates, rm: ResourceMatrix):
    """First candidate (in the given order) whose cpu AND mem residual fit."""
    for node in candidates:
        if rm.fits(task, node):
            return node
    return None


def _hop_set(graph: ResourceGraph, origins: frozenset, h: int) -> list[NodeId]:
    cache = getattr(graph, "_hopset_cache", None)
    if cache is None:
        cache = {}
        graph._hopset_cache = cache
    key = (origins, h)
    hit = cache.get(key)
    if hit is None:
        hit = sorted(nodes_within_hops(graph, origins, h))
        cache[key] = hit
    return hit


def _candidate_stages(graph: ResourceGraph, origins: list[NodeId]):
    """Candidate stages: origins, 1-hop fog, 2-hop fog, then the cloud."""
    origin_set = frozenset(origins)
    fog_origins = sorted(n for n in origins if n.tier == FOG)
    cloud_origin = [n for n in origins if n.tier == CLOUD]
    stage0 = fog_origins + cloud_origin
    one_hop = [n for n in _hop_set(graph, origin_set, 1) if n.tier == FOG]
    two_hop = [n for n in _hop_set(graph, origin_set, 2)
               if n.tier == FOG and n not in one_hop]
    cloud = [] if cloud_origin else [graph.cloud.id]
    return stage0, one_hop, two_hop, cloud


def map_level_edges(level_tasks, app: Application, placement: Placement,
                    graph: ResourceGraph, rm: ResourceMatrix) -> LevelDebit:
    """Map edges adjacent to a level, descending by bandwidth demand.

    Edges whose other endpoint is not located yet are skipped here and mapped
    once that endpoint's level is processed; edges with a rejected endpoint
    are recorded as ignored.
    """
    level_set = set(level_tasks)
    rejected = {t for t, _ in placement.rejected}
    debit = LevelDebit()
    adjacent = [e for e in app.edges
                if (e.src in level_set or e.dst in level_set)
                and e.key not in placement.edge_paths
                and e.key not in placement.unmapped
                and e.key not in placement.ignored]
    adjacent.sort(key=lambda e: (-e.bandwidth_demand, e.key))
    for edge in adjacent:
        src_loc = placement.task_locations.get(edge.src)
        dst_loc = placement.task_locations.get(edge.dst)
        if src_loc is None or dst_loc is None:
            if edge.src in rejected or edge.dst in rejected:
                placement.ignored.add(edge.key)
            continue
        if src_loc == dst_loc:
            placement.edge_paths[edge.key] = PhysicalPath(
                nodes=(src_loc,), total_latency=0.0,
                min_bandwidth=math.inf, hop_count=0)
            continue
        path = shortest_path(graph, src_loc, dst_loc, edge.bandwidth_demand,
                             residual_bw=rm.bw_view())
        if isinstance(path, NoPath):
            placement.unmapped[edge.key] = (
                f"no path with residual bandwidth >= {edge.bandwidth_demand:.3f}")
            continue
        for key in path.links:
            rm.debit_link(key, edge.bandwidth_demand)
            debit.bw[key] = debit.bw.get(key, 0.0) + edge.bandwidth_demand
        placement.edge_paths[edge.key] = path
        if path.total_latency > edge.max_latency:
            placement.violations.append(
                ("edge-latency", f"{edge.src}->{edge.dst}",
                 f"path latency {path.total_latency:.3f} ms exceeds "
                 f"demand {edge.max_latency:.3f} ms"))
    return debit


def _place_once(app: Application, graph: ResourceGraph, rm: ResourceMatrix,
                queue: ProcessQueue, pinned: str | None) -> Placement:
    placement = Placement(app_id=app.id, home_fn=app.home_fn, pinned_task=pinned)
    snapshot = rm.snapshot()
    work = rm.clone()
    for level in reversed(queue.levels):
        reset_rm(work, snapshot)
        ordered = sorted(level, key=lambda t: (-queue.mcv[t], t))
        if pinned in level:
            ordered.remove(pinned)
            ordered.insert(0, pinned)
        debit = LevelDebit()
        for tid in ordered:
            task = app.task_by_id[tid]
            node = None
            if tid == pinned and work.fits(task, app.home_fn):
                node = app.home_fn
            if node is None:
                child_locs = sorted({placement.task_locations[c]
                                     for c in app.children[tid]
                                     if c in placement.task_locations})
                origins = child_locs if child_locs else [app.home_fn]
                for stage in _candidate_stages(graph, origins):
                    node = try_deploy(task, stage, work)
                    if node is not None:
                        break
            if node is None:
                placement.rejected.append(
                    (tid, "no location within 2 hops or cloud has capacity"))
                continue
            work.debit_task(task, node)
            debit.cpu[node] = debit.cpu.get(node, 0.0) + task.cpu_demand
            debit.mem[node] = debit.mem.get(node, 0.0) + task.mem_demand
            placement.task_locations[tid] = node
        edge_debit = map_level_edges(level, app, placement, graph, work)
        debit.bw = edge_debit.bw
        placement.level_order.append(list(ordered))
        placement.level_debits.append(debit)
        placement.level_durations.append(
            max((app.task_by_id[t].makespan for t in level), default=0.0))
    return placement


def herafc_place(app: Application, graph: ResourceGraph, rm: ResourceMatrix,
                 queue: ProcessQueue) -> Placement:
    """Place one application; the passed resource matrix is not mutated.

    Guarantees at least one task on the app's home fog node whenever any task
    could fit there (re-running with the highest-critical-value fitting task
    pinned); otherwise the placement is marked home_pin_infeasible.
    """
    placement = _place_once(app, graph, rm, queue, pinned=None)
    if app.home_fn in placement.task_locations.values():
        return placement
    fitting = [t for t in app.tasks if rm.fits(t, app.home_fn)]
    if not fitting:
        placement.home_pin_infeasible = True
        return placement
    pinned = max(fitting, key=lambda t: (queue.wv[t.id], t.id)).id
    second = _place_once(app, graph, rm, queue, pinned=pinned)
    if app.home_fn not in second.task_locations.values():
        second.home_pin_infeasible = True
    return second
