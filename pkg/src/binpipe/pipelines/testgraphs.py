"""Synthesis-level graphs with inert stages.

These exercise ordering and synthesis paths (branch cuts, loops, EndStage,
EndBin, bucketing) that the shipped renderers do not all cover.
"""
from __future__ import annotations

import random

from ..graph import (
    END_BIN,
    AssignKind,
    BinAssignDirective,
    BinConfig,
    PipelineGraph,
    ScheduleDirective,
    ScheduleKind,
    StageDecl,
    add_stage,
    chain,
    connect,
    end_stage,
)


def passthrough(batch, ctx):
    for ch in range(ctx.channels):
        ctx.emit(batch, ch)


def sink(batch, ctx):
    pass


def _decl(name, in_t, out_t=(), bins=(0, 0), schedule=ScheduleKind.LOAD_BALANCE,
          assign=AssignKind.PREVIOUS_BINS, deps=(), split=None, **kw):
    return StageDecl(
        name=name,
        process=passthrough if out_t else sink,
        input_type=in_t,
        output_types=tuple(out_t),
        bin_config=BinConfig(*bins),
        assign_bin=BinAssignDirective(assign),
        schedule=ScheduleDirective(schedule, split),
        dependencies=tuple(deps),
        **kw,
    )


def linear_raster(schedule=ScheduleKind.LOAD_BALANCE, bins=(0, 0), screen=(1024, 768)) -> PipelineGraph:
    g = PipelineGraph(screen=screen, name="linear-raster")
    for d in (
        _decl("VertexShader", "vertex", ["triangle"], bins, schedule, AssignKind.ALL),
        _decl("Rasterizer", "triangle", ["fragment"], bins, schedule, AssignKind.BOUNDING_BOX),
        _decl("FragmentShader", "fragment", ["fragment"], bins, schedule),
        _decl("DepthTest", "fragment", ["fragment"], bins, schedule),
        _decl("Composite", "fragment", (), bins, schedule, deps=[END_BIN]),
    ):
        g = add_stage(g, d)
    return chain(g, "VertexShader", "Rasterizer", "FragmentShader", "DepthTest", "Composite")


def shadow_map() -> PipelineGraph:
    """Shadow pass and main pass converging on FragmentShade."""
    g = PipelineGraph(name="shadow-map")
    for d in (
        _decl("ShadowVS", "vertex", ["triangle"], assign=AssignKind.ALL),
        _decl("ShadowRast", "triangle", ["fragment"], assign=AssignKind.BOUNDING_BOX),
        _decl("ShadowDepth", "fragment", ["fragment"]),
        _decl("ShadowComposite", "fragment", ["fragment"]),
        _decl("VS", "vertex", ["triangle"], assign=AssignKind.ALL),
        _decl("Rast", "triangle", ["fragment"], assign=AssignKind.BOUNDING_BOX),
        _decl("FragmentShade", "fragment", ["fragment"], deps=[end_stage("ShadowComposite")]),
        _decl("DepthTest", "fragment", ["fragment"]),
        _decl("Composite", "fragment", (), deps=[END_BIN]),
    ):
        g = add_stage(g, d)
    g = chain(g, "ShadowVS", "ShadowRast", "ShadowDepth", "ShadowComposite", "FragmentShade")
    return chain(g, "VS", "Rast", "FragmentShade", "DepthTest", "Composite")


def ray_trace_loop() -> PipelineGraph:
    g = PipelineGraph(name="ray-trace")
    for d in (
        _decl("RayGen", "pixel", ["ray"], assign=AssignKind.ALL),
        _decl("Intersect", "ray", ["hit"]),
        _decl("Shade", "hit", ["ray", "sample"]),
        _decl("Composite", "sample", ()),
    ):
        g = add_stage(g, d)
    g = chain(g, "RayGen", "Intersect", "Shade")
    g = connect(g, "Shade", 0, "Intersect")
    return connect(g, "Shade", 1, "Composite")


def diverging() -> PipelineGraph:
    g = PipelineGraph(name="diverging")
    for d in (
        _decl("Source", "item", ["item", "item"], assign=AssignKind.ALL),
        _decl("LeftA", "item", ["item"]),
        _decl("LeftB", "item", ()),
        _decl("RightA", "item", ["item"]),
        _decl("RightB", "item", ()),
    ):
        g = add_stage(g, d)
    g = connect(g, "Source", 0, "LeftA")
    g = connect(g, "Source", 1, "RightA")
    return chain(chain(g, "LeftA", "LeftB"), "RightA", "RightB")


def bucketing() -> PipelineGraph:
    """All-directive chain of 64x64 stages followed by a coarser stage."""
    g = PipelineGraph(name="bucketing", screen=(256, 128))
    for d in (
        _decl("Bucket", "item", ["item"], (64, 64), ScheduleKind.ALL, AssignKind.BOUNDING_BOX),
        _decl("Refine", "item", ["item"], (64, 64)),
        _decl("Resolve", "item", ["item"], (32, 32)),
        _decl("Gather", "item", (), (128, 128), assign=AssignKind.BOUNDING_BOX),
    ):
        g = add_stage(g, d)
    return chain(g, "Bucket", "Refine", "Resolve", "Gather")


def end_stage_chain() -> PipelineGraph:
    """DirectMap chain whose last stage waits for the whole middle stage."""
    dm = ScheduleKind.DIRECT_MAP
    g = PipelineGraph(name="end-stage")
    for d in (
        _decl("Produce", "item", ["item"], (16, 16), dm, AssignKind.BOUNDING_BOX),
        _decl("Accumulate", "item", ["item"], (16, 16), dm),
        _decl("Normalize", "item", (), (16, 16), dm, deps=[end_stage("Accumulate")]),
    ):
        g = add_stage(g, d)
    return chain(g, "Produce", "Accumulate", "Normalize")


def end_bin_blend(split: int | None = None) -> PipelineGraph:
    """Order-independent transparency style: per-bin resolve after collection.

    ``split`` turns the collection stage into an ``All:split`` stage, whose
    split bins force the EndBin back to a global barrier.
    """
    sched = ScheduleKind.ALL if split else ScheduleKind.DIRECT_MAP
    g = PipelineGraph(name="oit-end-bin")
    for d in (
        _decl("Rast", "triangle", ["fragment"], (32, 32), ScheduleKind.DIRECT_MAP, AssignKind.BOUNDING_BOX),
        _decl("Collect", "fragment", ["fragment"], (32, 32), sched, split=split),
        _decl("Blend", "fragment", (), (32, 32), sched, deps=[END_BIN], split=split),
    ):
        g = add_stage(g, d)
    return chain(g, "Rast", "Collect", "Blend")


def random_dag(rng: random.Random, max_stages: int = 12) -> PipelineGraph:
    """Random connected DAG with one source-to-drain spine and random extra edges.

    Every declared channel gets exactly one consumer. Some stages get random
    directives, bin sizes and EndStage dependencies on earlier stages that are
    not their descendants.
    """
    n = rng.randint(1, max_stages)
    names = [f"S{i:02d}" for i in range(n)]
    succ: dict[int, list[int]] = {i: [] for i in range(n)}
    for i in range(n - 1):
        succ[i].append(rng.randint(i + 1, n - 1))
    for _ in range(rng.randint(0, n)):
        a = rng.randint(0, n - 1)
        if a < n - 1:
            b = rng.randint(a + 1, n - 1)
            if b not in succ[a]:
                succ[a].append(b)
    preds: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, bs in succ.items():
        for b in bs:
            preds[b].append(a)

    def ancestors(i):
        seen, todo = set(), [i]
        while todo:
            for p in preds[todo.pop()]:
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return seen

    sizes = [(0, 0), (8, 8), (32, 32), (64, 64)]
    kinds = list(ScheduleKind)
    g = PipelineGraph(name="random", screen=(128, 96))
    for i, name in enumerate(names):
        deps = []
        anc = sorted(ancestors(i))
        if anc and rng.random() < 0.15:
            deps.append(end_stage(names[rng.choice(anc)]))
        if preds[i] and rng.random() < 0.15:
            deps.append(END_BIN)
        g = add_stage(g, _decl(
            name, "item", ["item"] * len(succ[i]), rng.choice(sizes), rng.choice(kinds),
            AssignKind.BOUNDING_BOX if rng.random() < 0.5 else AssignKind.PREVIOUS_BINS,
            deps,
        ))
    for a, bs in succ.items():
        for ch, b in enumerate(bs):
            g = connect(g, names[a], ch, names[b])
    return g
