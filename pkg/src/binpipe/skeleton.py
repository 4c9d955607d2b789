"""Static analysis of a pipeline graph into its skeleton.

The skeleton summarises what synthesis needs: per-stage directives and bin
geometry, hop distance to the nearest drain, cyclic stage sets, the loop-back
edges inside them, and a partition of the stages into disjoint linear branches.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .graph import (
    AssignKind,
    DependencyConstraint,
    DependencyKind,
    PipelineGraph,
    ScheduleDirective,
)


class CutReason(str, enum.Enum):
    CONVERGENCE = "Convergence"
    DIVERGENCE = "Divergence"
    EXPLICIT_DEPENDENCY = "ExplicitDependency"
    TERMINAL = "Terminal"


@dataclass(frozen=True)
class StageRecord:
    name: str
    bin_size: tuple[int, int]
    grid: tuple[int, int]
    threads_per_bin: int
    schedule: ScheduleDirective
    assign_kind: AssignKind
    assign_fn: object
    fusable: bool
    dependencies: tuple[DependencyConstraint, ...]
    producers: tuple[str, ...]
    consumers: tuple[str, ...]

    @property
    def end_stage_targets(self) -> tuple[str, ...]:
        return tuple(d.target_stage for d in self.dependencies if d.kind is DependencyKind.END_STAGE)

    @property
    def end_bin(self) -> bool:
        return any(d.kind is DependencyKind.END_BIN for d in self.dependencies)


@dataclass(frozen=True)
class Branch:
    stages: tuple[str, ...]
    start_distance: int
    entry_cut: CutReason
    exit_cut: CutReason


@dataclass(frozen=True)
class PipelineSkeleton:
    graph: PipelineGraph
    records: Mapping[str, StageRecord]
    adjacency: Mapping[str, tuple[str, ...]]
    cycle_sets: tuple[frozenset[str], ...]
    back_edges: frozenset[tuple[str, str]]
    distance_from_drain: Mapping[str, int]
    branches: tuple[Branch, ...]

    def cycle_of(self, stage: str) -> frozenset[str] | None:
        for c in self.cycle_sets:
            if stage in c:
                return c
        return None

    def forward_producers(self, stage: str) -> tuple[str, ...]:
        """Producers of ``stage`` reached over non-loop-back edges."""
        return tuple(p for p in self.records[stage].producers if (p, stage) not in self.back_edges)

    def branch_of(self, stage: str) -> int:
        for i, b in enumerate(self.branches):
            if stage in b.stages:
                return i
        raise KeyError(stage)


def strongly_connected_components(nodes: Iterable[str], succ: Mapping[str, Iterable[str]]) -> list[list[str]]:
    """Tarjan's algorithm, iterative so deep pipelines cannot hit the recursion limit."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    out.append(sorted(comp))
    return out


def detect_cycles(graph: PipelineGraph) -> list[frozenset[str]]:
    succ = {n: graph.successors(n) for n in graph.stage_names}
    cycles = []
    for comp in strongly_connected_components(graph.stage_names, succ):
        if len(comp) > 1 or comp[0] in succ[comp[0]]:
            cycles.append(frozenset(comp))
    return sorted(cycles, key=lambda c: sorted(c))


def distance_from_drain(graph: PipelineGraph) -> dict[str, int]:
    """Shortest hop count from each stage to its nearest drain.

    Computed by reverse breadth-first search. Shortest paths never use a
    loop-back edge (its target is no closer to a drain than its source), so
    the result is the same whether or not those edges are removed first.
    """
    dist = {d: 0 for d in graph.drains}
    queue = deque(sorted(dist))
    while queue:
        n = queue.popleft()
        for p in graph.predecessors(n):
            if p not in dist:
                dist[p] = dist[n] + 1
                queue.append(p)
    return dist


def _back_edges(graph: PipelineGraph, dist: Mapping[str, int], cycles: list[frozenset[str]]) -> frozenset:
    back = set()
    for cyc in cycles:
        for p, _, c in graph.edges:
            if p in cyc and c in cyc and dist[c] >= dist[p]:
                back.add((p, c))
    return frozenset(back)


def build_skeleton(graph: PipelineGraph) -> PipelineSkeleton:
    dist = distance_from_drain(graph)
    missing = [n for n in graph.stage_names if n not in dist]
    if missing:
        raise ValueError(f"stages cannot reach a drain: {missing}")
    cycles = detect_cycles(graph)
    back = _back_edges(graph, dist, cycles)
    records = {}
    for s in graph.stages:
        records[s.name] = StageRecord(
            name=s.name,
            bin_size=graph.bin_size(s.name),
            grid=graph.grid(s.name),
            threads_per_bin=s.bin_config.threads_per_bin,
            schedule=s.schedule,
            assign_kind=s.assign_bin.kind,
            assign_fn=s.assign_bin.custom_fn,
            fusable=s.fusable,
            dependencies=s.dependencies,
            producers=tuple(graph.predecessors(s.name)),
            consumers=tuple(graph.successors(s.name)),
        )
    adjacency = {n: tuple(graph.successors(n)) for n in graph.stage_names}
    branches = partition_branches(graph, dist, cycles, back)
    return PipelineSkeleton(
        graph=graph,
        records=records,
        adjacency=adjacency,
        cycle_sets=tuple(cycles),
        back_edges=back,
        distance_from_drain=dist,
        branches=tuple(branches),
    )


def _stage_key(dist: Mapping[str, int]):
    return lambda n: (-dist[n], n)


def partition_branches(graph: PipelineGraph, dist: Mapping[str, int],
                       cycles: list[frozenset[str]], back: frozenset) -> list[Branch]:
    """Split the graph into disjoint linear branches.

    Cycle sets are contracted into single nodes first, so a loop always lands
    inside one branch. Cuts happen where a node has several producers
    (convergence), where its producer has several consumers (divergence), and
    in front of any stage carrying an EndStage dependency.
    """
    node_of = {n: n for n in graph.stage_names}
    members: dict[str, list[str]] = {n: [n] for n in graph.stage_names}
    for cyc in cycles:
        key = min(cyc)
        ordered = sorted(cyc, key=_stage_key(dist))
        for n in cyc:
            node_of[n] = key
            members.pop(n, None)
        members[key] = ordered

    preds: dict[str, set[str]] = {k: set() for k in members}
    succs: dict[str, set[str]] = {k: set() for k in members}
    for p, _, c in graph.edges:
        if (p, c) in back:
            continue
        a, b = node_of[p], node_of[c]
        if a != b:
            succs[a].add(b)
            preds[b].add(a)

    def explicit(node: str) -> bool:
        return any(graph.stage(m).end_stage_targets for m in members[node])

    def continues(node: str) -> bool:
        if len(preds[node]) != 1 or explicit(node):
            return False
        (p,) = preds[node]
        return len(succs[p]) == 1

    def entry_reason(node: str) -> CutReason:
        if explicit(node):
            return CutReason.EXPLICIT_DEPENDENCY
        if not preds[node]:
            return CutReason.TERMINAL
        if len(preds[node]) > 1:
            return CutReason.CONVERGENCE
        return CutReason.DIVERGENCE

    def exit_reason(node: str) -> CutReason:
        if not succs[node]:
            return CutReason.TERMINAL
        if len(succs[node]) > 1:
            return CutReason.DIVERGENCE
        (s,) = succs[node]
        if len(preds[s]) > 1:
            return CutReason.CONVERGENCE
        return CutReason.EXPLICIT_DEPENDENCY

    branches = []
    for start in members:
        if continues(start):
            continue
        nodes = [start]
        while len(succs[nodes[-1]]) == 1:
            (nxt,) = succs[nodes[-1]]
            if not continues(nxt):
                break
            nodes.append(nxt)
        stages = tuple(m for node in nodes for m in members[node])
        branches.append(Branch(
            stages=stages,
            start_distance=dist[stages[0]],
            entry_cut=entry_reason(nodes[0]),
            exit_cut=exit_reason(nodes[-1]),
        ))
    branches.sort(key=lambda b: (-b.start_distance, b.stages[0]))
    return branches


def skeleton_report(sk: PipelineSkeleton) -> str:
    lines = [f"pipeline {sk.graph.name} screen {sk.graph.screen[0]}x{sk.graph.screen[1]}"]
    lines.append("stages:")
    for name, r in sorted(sk.records.items(), key=lambda kv: (-sk.distance_from_drain[kv[0]], kv[0])):
        deps = ",".join(str(d) for d in r.dependencies) or "-"
        fn = f"({getattr(r.assign_fn, '__name__', '?')})" if r.assign_fn else ""
        lines.append(
            f"  {name:<16} dist={sk.distance_from_drain[name]:<2} bins={r.bin_size[0]}x{r.bin_size[1]} "
            f"grid={r.grid[0]}x{r.grid[1]} schedule={r.schedule} assign={r.assign_kind.value}{fn} "
            f"deps={deps}{'' if r.fusable else ' list-mode'}")
    lines.append("branches:")
    for i, b in enumerate(sk.branches):
        lines.append(f"  [{i}] {' -> '.join(b.stages)} (start dist {b.start_distance}, "
                     f"entry {b.entry_cut.value}, exit {b.exit_cut.value})")
    cyc = "; ".join("{" + ", ".join(sorted(c)) + "}" for c in sk.cycle_sets) or "none"
    lines.append(f"cycles: {cyc}")
    if sk.back_edges:
        lines.append("loop-back edges: " + ", ".join(f"{p}->{c}" for p, c in sorted(sk.back_edges)))
    return "\n".join(lines)
