"""Kernel synthesis: from a stage schedule to an ordered list of kernels.

Every pass takes and returns an executable :class:`KernelMapping`, so the
runtime can run the mapping at any pass boundary. ``synthesize`` chains them:
normalize, skeleton, order, baseline, preschedule, eliminate, resolve, fuse.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable

from .graph import AssignKind, PipelineGraph, ScheduleKind, normalize_bins, validate
from .ordering import DepthFirstGroup, LoopUntilEmpty, StageSchedule, order_stages
from .skeleton import PipelineSkeleton, build_skeleton


class SynthesisError(RuntimeError):
    pass


class Phase(str, enum.Enum):
    ASSIGN_BIN = "AssignBin"
    SCHEDULE = "Schedule"
    PROCESS = "Process"


class DispatchMode(str, enum.Enum):
    LOAD_BALANCE = "HardwareLoadBalance"
    PRESCHEDULED = "PreScheduledMap"
    SERIALIZE = "SerializeToOne"
    SPLIT_ALL = "SplitAll"


class Sync(str, enum.Enum):
    NONE = "None"
    GLOBAL = "GlobalBarrier"
    LOCAL = "LocalPerBinBarrier"


ROUND_ROBIN = "binID mod workers"


@dataclass(frozen=True)
class Dispatch:
    mode: DispatchMode
    fn: str | None = None
    # SplitAll chunk size; None splits each bin evenly over the workers
    split: int | None = None

    def __str__(self):
        if self.mode is DispatchMode.PRESCHEDULED:
            return f"{self.mode.value}({self.fn})"
        if self.mode is DispatchMode.SPLIT_ALL:
            return f"{self.mode.value}({self.split if self.split else 'even'})"
        return self.mode.value


PhaseRef = tuple[str, Phase]


@dataclass(frozen=True)
class Kernel:
    phases: tuple[PhaseRef, ...]
    dispatch: Dispatch
    entry_sync: Sync = Sync.NONE
    # barriers between fused stages: (stage, sync) means sync before stage's Process
    internal_sync: tuple[tuple[str, Sync], ...] = ()
    loop: int | None = None
    group: int | None = None

    @property
    def stages(self) -> tuple[str, ...]:
        return tuple(s for s, ph in self.phases if ph is Phase.PROCESS)

    @property
    def head(self) -> str:
        return self.stages[0]

    @property
    def tail(self) -> str:
        return self.stages[-1]

    def sync_before(self, stage: str) -> Sync:
        return dict(self.internal_sync).get(stage, Sync.NONE)

    def describe(self) -> str:
        body = []
        for s, ph in self.phases:
            if ph is Phase.PROCESS and self.sync_before(s) is not Sync.NONE:
                body.append(f"|{self.sync_before(s).value}|")
            body.append(f"{s}.{ph.value}")
        extra = []
        if self.loop is not None:
            extra.append(f"loop={self.loop}")
        if self.group is not None:
            extra.append(f"depth-first={self.group}")
        tail = (" " + " ".join(extra)) if extra else ""
        return f"[{self.entry_sync.value}] {str(self.dispatch)}: {' '.join(body)}{tail}"


@dataclass(frozen=True)
class Wire:
    producer: str
    channel: int
    consumer: str
    fused: bool = False

    @property
    def counter(self) -> str:
        return f"{self.producer}:{self.channel}->{self.consumer}"


@dataclass(frozen=True)
class KernelMapping:
    kernels: tuple[Kernel, ...]
    injection: tuple[PhaseRef, ...]
    wiring: tuple[Wire, ...]
    graph: PipelineGraph
    skeleton: PipelineSkeleton = field(compare=False)
    schedule: StageSchedule
    log: tuple[str, ...] = field(default=(), compare=False)

    @property
    def counters(self) -> tuple[str, ...]:
        return tuple(w.counter for w in self.wiring)

    def kernel_of(self, stage: str) -> int:
        for i, k in enumerate(self.kernels):
            if stage in k.stages:
                return i
        raise KeyError(stage)

    def fused_with(self, a: str, b: str) -> bool:
        return self.kernel_of(a) == self.kernel_of(b)


def dispatch_for(directive) -> Dispatch:
    kind = directive.kind
    if kind is ScheduleKind.DIRECT_MAP:
        return Dispatch(DispatchMode.PRESCHEDULED, fn=ROUND_ROBIN)
    if kind is ScheduleKind.SERIALIZE:
        return Dispatch(DispatchMode.SERIALIZE)
    if kind is ScheduleKind.ALL:
        return Dispatch(DispatchMode.SPLIT_ALL, split=directive.tile_split_size)
    return Dispatch(DispatchMode.LOAD_BALANCE)


def _with_log(m: KernelMapping, lines: list[str], **changes) -> KernelMapping:
    return replace(m, log=m.log + tuple(lines), **changes)


def baseline_mapping(schedule: StageSchedule, sk: PipelineSkeleton) -> KernelMapping:
    """One kernel per stage: its Schedule and Process plus its consumers' AssignBin."""
    g = sk.graph
    kernels = []
    for idx, entry in enumerate(schedule.entries):
        for s in entry.stages:
            phases: list[PhaseRef] = [(s, Phase.SCHEDULE), (s, Phase.PROCESS)]
            for _, _, c in g.out_edges(s):
                if (c, Phase.ASSIGN_BIN) not in phases:
                    phases.append((c, Phase.ASSIGN_BIN))
            kernels.append(Kernel(
                phases=tuple(phases),
                dispatch=dispatch_for(sk.records[s].schedule),
                loop=idx if isinstance(entry, LoopUntilEmpty) else None,
                group=idx if isinstance(entry, DepthFirstGroup) else None,
            ))
    injection = tuple((s, Phase.ASSIGN_BIN) for s in g.sources)
    wiring = tuple(Wire(p, ch, c) for p, ch, c in g.edges)
    return KernelMapping(tuple(kernels), injection, wiring, g, sk, schedule,
                         log=(f"baseline: {len(kernels)} kernels",))


def _hoist(phases: tuple[PhaseRef, ...], stage: str) -> tuple[PhaseRef, ...]:
    out: list[PhaseRef] = []
    for ref in phases:
        if ref == (stage, Phase.SCHEDULE):
            continue
        out.append(ref)
        if ref == (stage, Phase.ASSIGN_BIN):
            out.append((stage, Phase.SCHEDULE))
    return tuple(out)


def preschedule(m: KernelMapping, sk: PipelineSkeleton) -> KernelMapping:
    """Move static Schedule phases next to the AssignBin that feeds the stage."""
    targets = [s for s in sk.graph.stage_names
               if sk.records[s].schedule.kind is not ScheduleKind.LOAD_BALANCE]
    kernels = list(m.kernels)
    injection = m.injection
    lines = []
    for s in targets:
        before = (tuple(kernels), injection)
        kernels = [replace(k, phases=_hoist(k.phases, s)) for k in kernels]
        injection = _hoist(injection, s)
        idx = next(i for i, k in enumerate(kernels) if s in k.stages)
        kernels[idx] = replace(kernels[idx], dispatch=dispatch_for(sk.records[s].schedule))
        if (tuple(kernels), injection) != before:
            lines.append(f"preschedule: {s} -> {kernels[idx].dispatch}")
    return _with_log(m, lines, kernels=tuple(kernels), injection=injection)


def eliminate_schedule(m: KernelMapping, sk: PipelineSkeleton) -> KernelMapping:
    """Drop LoadBalance Schedule phases in favour of dynamic bin claiming."""
    lb = {s for s in sk.graph.stage_names if sk.records[s].schedule.kind is ScheduleKind.LOAD_BALANCE}
    lines = []
    kernels = []
    for k in m.kernels:
        drop = [s for s, ph in k.phases if ph is Phase.SCHEDULE and s in lb]
        if drop:
            lines.extend(f"eliminate: Schedule of {s}" for s in drop)
            k = replace(k, phases=tuple(r for r in k.phases if not (r[1] is Phase.SCHEDULE and r[0] in lb)))
        if k.head in lb:
            k = replace(k, dispatch=Dispatch(DispatchMode.LOAD_BALANCE))
        kernels.append(k)
    injection = tuple(r for r in m.injection if not (r[1] is Phase.SCHEDULE and r[0] in lb))
    return _with_log(m, lines, kernels=tuple(kernels), injection=injection)


def _is_split(d: Dispatch) -> bool:
    return d.mode is DispatchMode.SPLIT_ALL


def resolve_dependencies(m: KernelMapping, sk: PipelineSkeleton) -> KernelMapping:
    """Annotate every kernel entry with the barrier its head stage needs."""
    kernels = list(m.kernels)
    lines = []
    for i, k in enumerate(kernels):
        rec = sk.records[k.head]
        sync = Sync.NONE
        if rec.end_bin:
            producers = [m.kernel_of(p) for p in sk.forward_producers(k.head)]
            split = _is_split(k.dispatch) or any(_is_split(kernels[j].dispatch) for j in producers)
            sync = Sync.GLOBAL if split else Sync.LOCAL
        for t in rec.end_stage_targets:
            if m.kernel_of(t) >= i:
                raise SynthesisError(f"EndStage({t}) of {k.head} is not scheduled before it")
            sync = Sync.GLOBAL
        if sync is not k.entry_sync:
            lines.append(f"resolve: {k.head} entry {sync.value}")
        kernels[i] = replace(k, entry_sync=sync)
        for s, prior in k.internal_sync:
            if prior is Sync.LOCAL and _is_split(k.dispatch):
                raise SynthesisError(f"fused EndBin of {s} inside a split kernel")
    return _with_log(m, lines, kernels=tuple(kernels))


def _same_core_assignment(a: Dispatch, b: Dispatch) -> bool:
    if a.mode is DispatchMode.PRESCHEDULED and b.mode is DispatchMode.PRESCHEDULED:
        return a.fn == b.fn
    return a.mode is DispatchMode.SERIALIZE and b.mode is DispatchMode.SERIALIZE


def fusion_blockers(ka: Kernel, kb: Kernel, sk: PipelineSkeleton) -> list[str]:
    """Reasons the adjacent kernels cannot be fused; empty means fusable."""
    g = sk.graph
    a, b = ka.tail, kb.head
    ra, rb = sk.records[a], sk.records[b]
    why = []
    if ka.loop is not None or kb.loop is not None:
        why.append("loop kernel")
    if ka.group != kb.group:
        why.append("different depth-first groups")
    if not (ra.fusable and rb.fusable):
        why.append("PerBinList process")
    if len(g.out_edges(a)) != 1 or len(g.in_edges(b)) != 1 or g.successors(a) != [b]:
        why.append("not single-input/single-output")
    if ra.bin_size != rb.bin_size:
        why.append("bin sizes differ")
    same_bins = (
        rb.assign_kind is AssignKind.PREVIOUS_BINS
        or (ra.assign_kind is rb.assign_kind and ra.assign_kind is not AssignKind.CUSTOM
            and ra.grid == rb.grid)
        or (ra.grid == (1, 1) and rb.grid == (1, 1))
    )
    if not same_bins:
        why.append("bin mapping differs")
    if kb.entry_sync is Sync.GLOBAL:
        why.append("global barrier")
    if not _same_core_assignment(ka.dispatch, kb.dispatch):
        why.append("schedules differ")
    return why


def _merge(ka: Kernel, kb: Kernel) -> Kernel:
    b = kb.head
    phases = tuple(r for r in ka.phases if r not in ((b, Phase.ASSIGN_BIN), (b, Phase.SCHEDULE)))
    internal = ka.internal_sync
    if kb.entry_sync is Sync.LOCAL:
        internal = internal + ((b, Sync.LOCAL),)
    internal = internal + kb.internal_sync
    return replace(ka, phases=phases + kb.phases, internal_sync=internal)


def fuse(m: KernelMapping, sk: PipelineSkeleton) -> KernelMapping:
    """Merge adjacent kernels until no legal pair remains."""
    kernels = list(m.kernels)
    lines = []
    i = 0
    while i + 1 < len(kernels):
        ka, kb = kernels[i], kernels[i + 1]
        if fusion_blockers(ka, kb, sk):
            i += 1
            continue
        lines.append(f"fuse: {ka.tail} + {kb.head}"
                     + (" (per-bin barrier)" if kb.entry_sync is Sync.LOCAL else ""))
        kernels[i:i + 2] = [_merge(ka, kb)]
    fused = {(k.stages[j], k.stages[j + 1]) for k in kernels for j in range(len(k.stages) - 1)}
    wiring = tuple(replace(w, fused=(w.producer, w.consumer) in fused) for w in m.wiring)
    return _with_log(m, lines, kernels=tuple(kernels), wiring=wiring)


PASSES: tuple[tuple[str, Callable], ...] = (
    ("preschedule", preschedule),
    ("eliminate", eliminate_schedule),
    ("resolve", resolve_dependencies),
    ("fuse", fuse),
)


def synthesize(graph: PipelineGraph, stop_after: str | None = None) -> KernelMapping:
    """Full synthesis; ``stop_after`` names a pass boundary (``baseline`` or a pass name)."""
    diags = validate(graph)
    if diags:
        raise SynthesisError("invalid pipeline: " + "; ".join(str(d) for d in diags))
    g = normalize_bins(graph)
    sk = build_skeleton(g)
    m = baseline_mapping(order_stages(sk), sk)
    if stop_after == "baseline":
        return m
    for name, fn in PASSES:
        m = fn(m, sk)
        if stop_after == name:
            return m
    if stop_after is not None:
        raise ValueError(f"unknown pass {stop_after!r}")
    return m


def synthesis_report(m: KernelMapping) -> str:
    lines = [f"schedule: {m.schedule}", f"kernels: {len(m.kernels)}"]
    for i, k in enumerate(m.kernels):
        lines.append(f"  k{i} {k.describe()}")
    if m.injection:
        lines.append("injection: " + " ".join(f"{s}.{ph.value}" for s, ph in m.injection))
    fused = [w.counter for w in m.wiring if w.fused]
    lines.append("fused edges: " + (", ".join(fused) or "none"))
    lines.append("bin-store edges: " + (", ".join(w.counter for w in m.wiring if not w.fused) or "none"))
    lines.append("passes:")
    lines.extend(f"  {ln}" for ln in m.log)
    return "\n".join(lines)
