"""Pipeline description model: stages, phase directives, bins and channels.

A pipeline is a directed graph of :class:`StageDecl` nodes joined by typed
channels. Graphs are immutable values; :func:`add_stage` and :func:`connect`
return new graphs, and stages/edges are kept in canonical (name) order so that
insertion order never matters.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence


class ScheduleKind(str, enum.Enum):
    DIRECT_MAP = "DirectMap"
    LOAD_BALANCE = "LoadBalance"
    SERIALIZE = "Serialize"
    ALL = "All"


class AssignKind(str, enum.Enum):
    CUSTOM = "Custom"
    PREVIOUS_BINS = "AssignPreviousBins"
    BOUNDING_BOX = "AssignToBoundingBox"
    ALL = "AssignToAll"


class DependencyKind(str, enum.Enum):
    END_STAGE = "EndStage"
    END_BIN = "EndBin"


class ProcessMode(str, enum.Enum):
    PER_PRIMITIVE = "PerPrimitive"
    PER_BIN_LIST = "PerBinList"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class BinConfig:
    """Bin size in pixels. ``0x0`` means one screen-sized bin."""

    bin_width: int = 0
    bin_height: int = 0
    threads_per_bin: int = 64

    def __post_init__(self):
        w, h = self.bin_width, self.bin_height
        if w < 0 or h < 0:
            raise GraphError(f"bin size must be non-negative, got {w}x{h}")
        if (w == 0) != (h == 0):
            raise GraphError(f"bin size {w}x{h}: both sides zero or both positive")
        if self.threads_per_bin < 1:
            raise GraphError("threads_per_bin must be >= 1")

    @property
    def full_screen(self) -> bool:
        return self.bin_width == 0

    @property
    def size(self) -> tuple[int, int]:
        return (self.bin_width, self.bin_height)


@dataclass(frozen=True)
class ScheduleDirective:
    kind: ScheduleKind = ScheduleKind.LOAD_BALANCE
    tile_split_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.tile_split_size is not None:
            if self.kind is not ScheduleKind.ALL:
                raise GraphError("tile_split_size is only meaningful with the All directive")
            if self.tile_split_size < 1:
                raise GraphError("tile_split_size must be positive")

    def __str__(self):
        if self.tile_split_size is None:
            return self.kind.value
        return f"{self.kind.value}:{self.tile_split_size}"


@dataclass(frozen=True)
class BinAssignDirective:
    kind: AssignKind = AssignKind.PREVIOUS_BINS
    custom_fn: Callable | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AssignKind(self.kind))
        if (self.custom_fn is not None) != (self.kind is AssignKind.CUSTOM):
            raise GraphError("custom_fn must be given exactly when kind is Custom")

    def __str__(self):
        if self.kind is AssignKind.CUSTOM:
            return f"Custom({getattr(self.custom_fn, '__name__', '?')})"
        return self.kind.value


@dataclass(frozen=True)
class DependencyConstraint:
    kind: DependencyKind
    target_stage: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DependencyKind(self.kind))
        if self.kind is DependencyKind.END_STAGE and not self.target_stage:
            raise GraphError("EndStage needs a target stage")
        if self.kind is DependencyKind.END_BIN and self.target_stage is not None:
            raise GraphError("EndBin always refers to the previous stage")

    def __str__(self):
        if self.kind is DependencyKind.END_STAGE:
            return f"EndStage({self.target_stage})"
        return "EndBin"


def end_stage(target: str) -> DependencyConstraint:
    return DependencyConstraint(DependencyKind.END_STAGE, target)


END_BIN = DependencyConstraint(DependencyKind.END_BIN)


@dataclass(frozen=True)
class StageDecl:
    """One pipeline stage and its three phases.

    ``process(batch, ctx)`` receives primitives and calls ``ctx.emit(out, ch)``
    zero or more times. In ``PerPrimitive`` mode the function must treat its
    batch elementwise, so the runtime is free to split or merge batches.
    ``output_types[ch]`` is the primitive type tag carried by channel ``ch``.
    """

    name: str
    process: Callable
    input_type: str
    output_types: tuple[str, ...] = ()
    bin_config: BinConfig = field(default_factory=BinConfig)
    assign_bin: BinAssignDirective = field(default_factory=BinAssignDirective)
    schedule: ScheduleDirective = field(default_factory=ScheduleDirective)
    process_mode: ProcessMode = ProcessMode.PER_PRIMITIVE
    dependencies: tuple[DependencyConstraint, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise GraphError("stage name must be non-empty")
        object.__setattr__(self, "output_types", tuple(self.output_types))
        object.__setattr__(self, "dependencies", tuple(self.dependencies))
        object.__setattr__(self, "process_mode", ProcessMode(self.process_mode))

    @property
    def fusable(self) -> bool:
        return self.process_mode is ProcessMode.PER_PRIMITIVE

    def has_dependency(self, kind: DependencyKind) -> bool:
        return any(d.kind is kind for d in self.dependencies)

    @property
    def end_stage_targets(self) -> tuple[str, ...]:
        return tuple(d.target_stage for d in self.dependencies if d.kind is DependencyKind.END_STAGE)


Edge = tuple[str, int, str]


@dataclass(frozen=True)
class PipelineGraph:
    stages: tuple[StageDecl, ...] = ()
    edges: tuple[Edge, ...] = ()
    screen: tuple[int, int] = (1024, 768)
    name: str = "pipeline"
    # render-target kind understood by binpipe.pipelines.targets
    targets: str | None = None
    params: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(sorted(self.stages, key=lambda s: s.name)))
        object.__setattr__(self, "edges", tuple(sorted(set(self.edges))))

    # lookups

    @property
    def stage_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.stages)

    def stage(self, name: str) -> StageDecl:
        for s in self.stages:
            if s.name == name:
                return s
        raise GraphError(f"unknown stage {name!r}")

    def has_stage(self, name: str) -> bool:
        return any(s.name == name for s in self.stages)

    def successors(self, name: str) -> list[str]:
        return sorted({c for p, _, c in self.edges if p == name})

    def predecessors(self, name: str) -> list[str]:
        return sorted({p for p, _, c in self.edges if c == name})

    def out_edges(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e[0] == name]

    def in_edges(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e[2] == name]

    @property
    def sources(self) -> tuple[str, ...]:
        # a self-loop alone does not make a stage internal
        targets = {c for p, _, c in self.edges if p != c}
        return tuple(n for n in self.stage_names if n not in targets)

    @property
    def drains(self) -> tuple[str, ...]:
        producers = {p for p, _, c in self.edges if p != c}
        return tuple(n for n in self.stage_names if n not in producers)

    def bin_size(self, name: str) -> tuple[int, int]:
        """Bin size in pixels with ``0x0`` resolved to the screen."""
        cfg = self.stage(name).bin_config
        if cfg.full_screen:
            return tuple(self.screen)
        return cfg.size

    def grid(self, name: str) -> tuple[int, int]:
        return bin_grid(self.bin_size(name), self.screen)

    def with_stage(self, decl: StageDecl) -> "PipelineGraph":
        """Replace an existing stage declaration (edges are kept)."""
        self.stage(decl.name)
        stages = [decl if s.name == decl.name else s for s in self.stages]
        return replace(self, stages=tuple(stages))


def bin_grid(bin_size: Sequence[int], screen: Sequence[int]) -> tuple[int, int]:
    bw, bh = bin_size
    return (math.ceil(screen[0] / bw), math.ceil(screen[1] / bh))


def bin_rect(bin_id: int, bin_size: Sequence[int], screen: Sequence[int]) -> tuple[int, int, int, int]:
    """Half-open pixel rectangle ``(x0, y0, x1, y1)`` of a row-major bin id.

    Edge bins are clipped to the screen when it is not a multiple of the bin size.
    """
    bw, bh = bin_size
    nx = math.ceil(screen[0] / bw)
    by, bx = divmod(bin_id, nx)
    x0, y0 = bx * bw, by * bh
    return (x0, y0, min(x0 + bw, screen[0]), min(y0 + bh, screen[1]))


def add_stage(graph: PipelineGraph, decl: StageDecl) -> PipelineGraph:
    if graph.has_stage(decl.name):
        raise GraphError(f"duplicate stage name {decl.name!r}")
    return replace(graph, stages=graph.stages + (decl,))


def connect(graph: PipelineGraph, producer: str, channel: int, consumer: str) -> PipelineGraph:
    prod = graph.stage(producer)
    cons = graph.stage(consumer)
    if not 0 <= channel < len(prod.output_types):
        raise GraphError(f"{producer} declares no output channel {channel}")
    out_type = prod.output_types[channel]
    if out_type != cons.input_type:
        raise GraphError(
            f"type mismatch on {producer}:{channel} -> {consumer}: "
            f"{out_type!r} does not match {cons.input_type!r}"
        )
    return replace(graph, edges=graph.edges + ((producer, channel, consumer),))


def chain(graph: PipelineGraph, *names: str) -> PipelineGraph:
    """Connect ``names`` linearly on channel 0."""
    for a, b in zip(names, names[1:]):
        graph = connect(graph, a, 0, b)
    return graph


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.code}[{self.subject}]: {self.message}"


def validate(graph: PipelineGraph) -> list[Diagnostic]:
    """Structural checks; an empty list means the graph is usable."""
    diags: list[Diagnostic] = []
    names = set(graph.stage_names)
    if not graph.stages:
        diags.append(Diagnostic("EmptyGraph", graph.name, "pipeline has no stages"))
        return diags

    if not graph.sources:
        diags.append(Diagnostic("NoSource", graph.name, "no stage without incoming edges"))
    if not graph.drains:
        diags.append(Diagnostic("NoDrain", graph.name, "no stage without outgoing edges"))

    for p, ch, c in graph.edges:
        tag = f"{p}:{ch}->{c}"
        if p not in names or c not in names:
            diags.append(Diagnostic("UnknownStage", tag, "edge endpoint is not a stage"))
            continue
        prod, cons = graph.stage(p), graph.stage(c)
        if not 0 <= ch < len(prod.output_types):
            diags.append(Diagnostic("UndeclaredChannel", tag, f"{p} declares no channel {ch}"))
        elif prod.output_types[ch] != cons.input_type:
            diags.append(Diagnostic(
                "TypeMismatch", tag,
                f"{prod.output_types[ch]!r} does not match {cons.input_type!r}"))

    connected = {(p, ch) for p, ch, _ in graph.edges}
    for s in graph.stages:
        for ch in range(len(s.output_types)):
            if (s.name, ch) not in connected:
                diags.append(Diagnostic(
                    "UnconnectedChannel", f"{s.name}:{ch}", "declared output channel has no consumer"))
        for dep in s.dependencies:
            if dep.kind is DependencyKind.END_STAGE:
                if dep.target_stage not in names:
                    diags.append(Diagnostic(
                        "UnknownDependencyTarget", s.name,
                        f"EndStage names unknown stage {dep.target_stage!r}"))
                elif dep.target_stage == s.name:
                    diags.append(Diagnostic("SelfDependency", s.name, "EndStage on itself"))
            elif not graph.predecessors(s.name):
                diags.append(Diagnostic("EndBinWithoutProducer", s.name, "EndBin on a source stage"))

    if graph.drains:
        reach = _reaches_drain(graph)
        for n in graph.stage_names:
            if n not in reach:
                diags.append(Diagnostic("CannotReachDrain", n, "no path from this stage to a drain"))
    return diags


def _reaches_drain(graph: PipelineGraph) -> set[str]:
    seen = set(graph.drains)
    frontier = list(seen)
    while frontier:
        n = frontier.pop()
        for p in graph.predecessors(n):
            if p not in seen:
                seen.add(p)
                frontier.append(p)
    return seen


def normalize_bins(graph: PipelineGraph) -> PipelineGraph:
    """Resolve every ``0x0`` bin config to the screen size."""
    w, h = graph.screen
    if w <= 0 or h <= 0:
        raise GraphError(f"screen must be positive, got {w}x{h}")
    stages = []
    for s in graph.stages:
        cfg = s.bin_config
        if cfg.full_screen:
            cfg = replace(cfg, bin_width=w, bin_height=h)
            s = replace(s, bin_config=cfg)
        stages.append(s)
    return replace(graph, stages=tuple(stages))
