"""Static stage-launch ordering.

Turns a :class:`~binpipe.skeleton.PipelineSkeleton` into a flat list of
schedule entries: single stage launches, loops that repeat until their bins
drain, and depth-first groups that walk a chain of stages bin by bin.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .graph import ScheduleKind, bin_grid, bin_rect
from .skeleton import PipelineSkeleton


class OrderingError(ValueError):
    pass


@dataclass(frozen=True)
class LaunchStage:
    stage: str

    @property
    def stages(self) -> tuple[str, ...]:
        return (self.stage,)

    def __str__(self):
        return self.stage


@dataclass(frozen=True)
class LoopUntilEmpty:
    stages: tuple[str, ...]

    def __str__(self):
        return "LoopUntilEmpty{" + ", ".join(self.stages) + "}"


@dataclass(frozen=True)
class DepthFirstGroup:
    stages: tuple[str, ...]

    def __str__(self):
        return "DepthFirstGroup[" + ", ".join(self.stages) + "]"


ScheduleEntry = Union[LaunchStage, LoopUntilEmpty, DepthFirstGroup]


@dataclass(frozen=True)
class StageSchedule:
    entries: tuple[ScheduleEntry, ...]

    @property
    def stages(self) -> tuple[str, ...]:
        return tuple(s for e in self.entries for s in e.stages)

    def entry_index(self, stage: str) -> int:
        for i, e in enumerate(self.entries):
            if stage in e.stages:
                return i
        raise KeyError(stage)

    def position(self, stage: str) -> int:
        """Global launch position of ``stage`` when entries are flattened."""
        return self.stages.index(stage)

    def __str__(self):
        return " ; ".join(str(e) for e in self.entries)


def _branch_dependencies(sk: PipelineSkeleton, stages: Sequence[str]) -> set[str]:
    inside = set(stages)
    deps = set()
    for s in stages:
        deps.update(p for p in sk.forward_producers(s) if p not in inside)
        deps.update(sk.records[s].end_stage_targets)
    return deps


def order_stages(sk: PipelineSkeleton) -> StageSchedule:
    """Order branches, deferring any whose producers or EndStage targets are pending.

    Pending branches are rescanned from the front after every success, so the
    partition order is kept wherever dependencies allow it.
    """
    pending = list(sk.branches)
    deps = [_branch_dependencies(sk, b.stages) for b in pending]
    done: set[str] = set()
    ordered: list[str] = []
    while pending:
        for i, b in enumerate(pending):
            if deps[i] <= done:
                ordered.extend(b.stages)
                done.update(b.stages)
                del pending[i], deps[i]
                break
        else:
            waits = "; ".join(
                f"{b.stages[0]} waits on {', '.join(sorted(d - done))}"
                for b, d in zip(pending, deps))
            raise OrderingError(f"unsatisfiable stage dependencies: {waits}")
    return StageSchedule(tuple(_group_entries(sk, ordered)))


def _group_entries(sk: PipelineSkeleton, ordered: list[str]) -> list[ScheduleEntry]:
    entries: list[ScheduleEntry] = []
    i = 0
    while i < len(ordered):
        s = ordered[i]
        cyc = sk.cycle_of(s)
        if cyc is not None:
            members = tuple(ordered[i:i + len(cyc)])
            assert set(members) == cyc, "cycle members must be contiguous"
            entries.append(LoopUntilEmpty(members))
            i += len(cyc)
            continue
        group = [s]
        if sk.records[s].schedule.kind is ScheduleKind.ALL:
            branch = sk.branch_of(s)
            while i + len(group) < len(ordered):
                nxt = ordered[i + len(group)]
                if not _extends_group(sk, group[-1], nxt, branch):
                    break
                group.append(nxt)
        if len(group) >= 2:
            entries.append(DepthFirstGroup(tuple(group)))
        else:
            entries.append(LaunchStage(s))
        i += len(group)
    return entries


def _extends_group(sk: PipelineSkeleton, prev: str, nxt: str, branch: int) -> bool:
    if sk.cycle_of(nxt) is not None or sk.branch_of(nxt) != branch:
        return False
    if nxt not in sk.records[prev].consumers:
        return False
    rec = sk.records[nxt]
    # a stage with its own barrier would stall the per-bin walk; leave it outside
    if rec.dependencies:
        return False
    pw, ph = sk.records[prev].bin_size
    nw, nh = rec.bin_size
    return nw <= pw and nh <= ph


def depth_first_plan(group: DepthFirstGroup | Sequence[str], bin_sizes, screen) -> list[tuple[str, int]]:
    """Per-bin launch sequence for a depth-first group.

    ``bin_sizes`` maps stage name to its (width, height). For each bin of the
    leading stage in row-major order, the leading stage runs on that bin and
    then every later stage runs on its bins whose top-left pixel falls inside
    the leading bin's rectangle.
    """
    stages = tuple(group.stages if isinstance(group, DepthFirstGroup) else group)
    lead = stages[0]
    lw, lh = bin_grid(bin_sizes[lead], screen)
    plan: list[tuple[str, int]] = []
    for b in range(lw * lh):
        x0, y0, x1, y1 = bin_rect(b, bin_sizes[lead], screen)
        plan.append((lead, b))
        for s in stages[1:]:
            plan.extend((s, c) for c in bins_with_corner_in(bin_sizes[s], screen, (x0, y0, x1, y1)))
    return plan


def bins_with_corner_in(bin_size, screen, rect) -> list[int]:
    bw, bh = bin_size
    nx, ny = bin_grid(bin_size, screen)
    x0, y0, x1, y1 = rect
    bx0, by0 = -(-x0 // bw), -(-y0 // bh)
    bx1, by1 = min(-(-x1 // bw), nx), min(-(-y1 // bh), ny)
    return [by * nx + bx for by in range(by0, by1) for bx in range(bx0, bx1)]


@dataclass(frozen=True)
class GateRule:
    stage: str
    barrier_producers: tuple[str, ...]
    loop_producers: tuple[str, ...]
    end_stage_targets: tuple[str, ...]
    governed_by_loop: bool

    def ready(self, completed: set[str]) -> bool:
        return set(self.barrier_producers) <= completed and set(self.end_stage_targets) <= completed

    def describe(self) -> str:
        parts = [f"{self.stage}: ready when"]
        need = list(self.barrier_producers) + [f"EndStage({t})" for t in self.end_stage_targets]
        parts.append(", ".join(need) + " complete" if need else "input is injected")
        if self.loop_producers:
            parts.append(f"; repeats while {', '.join(self.loop_producers)} feed it back")
        if self.governed_by_loop:
            parts.append("; governed by LoopUntilEmpty")
        return " ".join(parts)


def multi_cycle_gate(sk: PipelineSkeleton, stage: str) -> GateRule:
    """Readiness rule for a stage fed from inside and outside its own cycle."""
    cyc = sk.cycle_of(stage) or frozenset()
    producers = sk.records[stage].producers
    loop = tuple(p for p in producers if p in cyc)
    barrier = tuple(p for p in producers if p not in cyc)
    return GateRule(
        stage=stage,
        barrier_producers=barrier,
        loop_producers=loop,
        end_stage_targets=sk.records[stage].end_stage_targets,
        governed_by_loop=bool(cyc),
    )


def soundness_violations(sk: PipelineSkeleton, schedule: StageSchedule) -> list[str]:
    """Edges (and EndStage constraints) whose producer is not launched first."""
    out = []
    grouped = {s: i for i, e in enumerate(schedule.entries) for s in e.stages}
    for p, _, c in sk.graph.edges:
        if (p, c) in sk.back_edges:
            continue
        if grouped[p] == grouped[c] and not isinstance(schedule.entries[grouped[p]], LaunchStage):
            if schedule.position(p) > schedule.position(c):
                out.append(f"{p}->{c} reversed inside {schedule.entries[grouped[p]]}")
            continue
        if grouped[p] >= grouped[c]:
            out.append(f"{p}->{c}")
    for name, rec in sk.records.items():
        for t in rec.end_stage_targets:
            if grouped[t] >= grouped[name]:
                out.append(f"EndStage({t}) of {name}")
    return out
