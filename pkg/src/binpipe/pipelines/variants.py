"""The shipped pipeline definitions and per-stage overrides."""
from __future__ import annotations

from dataclasses import replace
from typing import Iterable

from ..graph import (
    END_BIN,
    AssignKind,
    BinAssignDirective,
    BinConfig,
    GraphError,
    PipelineGraph,
    ScheduleDirective,
    ScheduleKind,
    StageDecl,
    add_stage,
    chain,
    connect,
)
from . import raster, reyes

VARIANTS = ("baseline", "freepipe", "binned", "binned_fused", "deferred", "reyes")
RASTER_VARIANTS = VARIANTS[:5]

LB = ScheduleKind.LOAD_BALANCE
DM = ScheduleKind.DIRECT_MAP
FULL = (0, 0)
RASTER_BIN = (8, 8)
GEOMETRY_SPLIT = 2048
REYES_GEOMETRY_BIN = (128, 128)
SAMPLE_BIN = (32, 32)


def _stage(name, fn, in_t, out_t, bins, schedule, assign, custom=None, split=None, deps=()):
    return StageDecl(
        name=name,
        process=fn,
        input_type=in_t,
        output_types=tuple(out_t),
        bin_config=BinConfig(*bins),
        assign_bin=BinAssignDirective(assign, custom),
        schedule=ScheduleDirective(schedule, split),
        dependencies=tuple(deps),
    )


def _forward(name, screen, kinds, bins, vs_split=None, deferred=False) -> PipelineGraph:
    """Vertex shader, rasterizer, [fragment shader], depth/G-buffer, composite."""
    vs_kind = ScheduleKind.ALL if vs_split else kinds["VertexShader"]
    decls = [
        _stage("VertexShader", raster.vertex_shader, "vertex", ["triangle"], bins["VertexShader"],
               vs_kind, AssignKind.CUSTOM, raster.round_robin, split=vs_split),
        _stage("Rasterizer", raster.rasterizer, "triangle", ["fragment"], bins["Rasterizer"],
               kinds["Rasterizer"], AssignKind.BOUNDING_BOX),
    ]
    if deferred:
        names = ["VertexShader", "Rasterizer", "GBuffer", "Composite"]
        decls.append(_stage("GBuffer", raster.gbuffer, "fragment", ["fragment"], bins["GBuffer"],
                            kinds["GBuffer"], AssignKind.PREVIOUS_BINS))
    else:
        names = ["VertexShader", "Rasterizer", "FragmentShader", "DepthTest", "Composite"]
        decls.append(_stage("FragmentShader", raster.fragment_shader, "fragment", ["fragment"],
                            bins["FragmentShader"], kinds["FragmentShader"], AssignKind.PREVIOUS_BINS))
        decls.append(_stage("DepthTest", raster.depth_test, "fragment", ["fragment"], bins["DepthTest"],
                            kinds["DepthTest"], AssignKind.PREVIOUS_BINS))
    decls.append(_stage("Composite", raster.composite, "fragment", [], bins["Composite"],
                        kinds["Composite"], AssignKind.PREVIOUS_BINS, deps=[END_BIN]))
    g = PipelineGraph(screen=tuple(screen), name=name, targets="deferred" if deferred else "forward")
    for d in decls:
        g = add_stage(g, d)
    return chain(g, *names)


_FWD = ("VertexShader", "Rasterizer", "FragmentShader", "DepthTest", "Composite", "GBuffer")


def _all(value):
    return {s: value for s in _FWD}


def _reyes(screen) -> PipelineGraph:
    g = PipelineGraph(screen=tuple(screen), name="reyes", targets="resolve")
    for d in (
        _stage("Split", reyes.split, "patch", ["patch", "patch"], REYES_GEOMETRY_BIN, LB,
               AssignKind.CUSTOM, raster.round_robin),
        _stage("Dice", reyes.dice, "patch", ["micropolygon"], REYES_GEOMETRY_BIN, LB,
               AssignKind.CUSTOM, raster.round_robin),
        _stage("Sample", reyes.sample, "micropolygon", ["fragment"], SAMPLE_BIN, LB, AssignKind.BOUNDING_BOX),
        _stage("Shade", reyes.shade, "fragment", [], SAMPLE_BIN, DM, AssignKind.PREVIOUS_BINS),
    ):
        g = add_stage(g, d)
    g = connect(g, "Split", 0, "Split")
    g = connect(g, "Split", 1, "Dice")
    return chain(g, "Dice", "Sample", "Shade")


def build_variant(name: str, screen=(1024, 768), overrides: Iterable = ()) -> PipelineGraph:
    """One of :data:`VARIANTS`, with optional ``stage.key=value`` overrides applied."""
    if screen[0] <= 0 or screen[1] <= 0:
        raise GraphError(f"screen must be positive, got {screen[0]}x{screen[1]}")
    binned_bins = {**_all(RASTER_BIN), "VertexShader": FULL}
    if name == "baseline":
        g = _forward(name, screen, _all(LB), _all(FULL))
    elif name == "freepipe":
        g = _forward(name, screen, _all(DM), _all(FULL))
    elif name == "binned":
        g = _forward(name, screen, _all(LB), binned_bins, GEOMETRY_SPLIT)
    elif name == "binned_fused":
        kinds = {**_all(LB), "Rasterizer": DM, "FragmentShader": DM}
        g = _forward(name, screen, kinds, binned_bins, GEOMETRY_SPLIT)
    elif name == "deferred":
        g = _forward(name, screen, _all(LB), binned_bins, GEOMETRY_SPLIT, deferred=True)
    elif name == "reyes":
        g = _reyes(screen)
    else:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
    return apply_overrides(g, overrides)


SCHEDULE_NAMES = {k.value.lower(): k for k in ScheduleKind}


def parse_override(text: str) -> tuple[str, str, object]:
    """``Stage.bin=WxH`` or ``Stage.schedule=KIND[:split]``; stage ``*`` means all."""
    lhs, sep, value = text.partition("=")
    stage, dot, key = lhs.rpartition(".")
    if not sep or not dot or not stage:
        raise ValueError(f"override {text!r}: expected stage.key=value")
    key = key.strip().lower()
    value = value.strip()
    if key == "bin":
        w, x, h = value.lower().partition("x")
        if not x:
            raise ValueError(f"override {text!r}: bin size must be WxH")
        return stage.strip(), key, (int(w), int(h))
    if key == "schedule":
        kind, _, split = value.partition(":")
        try:
            k = SCHEDULE_NAMES[kind.strip().lower()]
        except KeyError:
            raise ValueError(f"override {text!r}: unknown schedule {kind!r}") from None
        return stage.strip(), key, ScheduleDirective(k, int(split) if split else None)
    raise ValueError(f"override {text!r}: key must be 'bin' or 'schedule'")


def apply_overrides(graph: PipelineGraph, overrides: Iterable) -> PipelineGraph:
    for ov in overrides:
        stage, key, value = parse_override(ov) if isinstance(ov, str) else ov
        targets = graph.stage_names if stage == "*" else (stage,)
        for s in targets:
            decl = graph.stage(s)
            if key == "bin":
                decl = replace(decl, bin_config=replace(decl.bin_config, bin_width=value[0], bin_height=value[1]))
            else:
                decl = replace(decl, schedule=value)
            graph = graph.with_stage(decl)
    return graph
