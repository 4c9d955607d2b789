"""One-call rendering: variant graph + scene -> image and run statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .graph import PipelineGraph
from .pipelines.geometry import Projector
from .pipelines.scenes import Scene
from .pipelines.targets import RenderTargets
from .runtime import DEFAULT_CYCLE_CAP, DEFAULT_STRIP, RunStats, execute
from .synthesis import KernelMapping, synthesize

# the primitive type a scene kind feeds into
SOURCE_TYPES = {"triangles": "vertex", "patches": "patch"}


@dataclass
class RenderResult:
    image: np.ndarray
    stats: RunStats
    mapping: KernelMapping
    targets: RenderTargets


def make_targets(graph: PipelineGraph, fault: str | None = None, workers: int = 1) -> RenderTargets:
    return RenderTargets(graph.screen, graph.targets or "forward", fault=fault, concurrent=workers > 1)


def render(graph: PipelineGraph, scene: Scene, *, workers: int = 1, mapping: KernelMapping | None = None,
           cycle_cap: int = DEFAULT_CYCLE_CAP, strip_mine: int = DEFAULT_STRIP, shader_cost: int = 0,
           fault: str | None = None, params: dict[str, Any] | None = None) -> RenderResult:
    sources = graph.sources
    if len(sources) != 1:
        raise ValueError(f"pipeline {graph.name!r} has sources {sources}; expected one")
    want = graph.stage(sources[0]).input_type
    if SOURCE_TYPES.get(scene.kind) != want:
        raise ValueError(f"scene {scene.name!r} holds {scene.kind}; pipeline {graph.name!r} takes {want!r}")
    m = mapping if mapping is not None else synthesize(graph)
    targets = make_targets(graph, fault, workers)
    p = {
        "projector": Projector.make(scene.camera, graph.screen),
        "shader_cost": shader_cost,
        "cycle_cap": cycle_cap,
    }
    p.update(params or {})
    _, stats = execute(m, scene.prims, workers=workers, targets=targets, params=p,
                       cycle_cap=cycle_cap, strip_mine=strip_mine)
    return RenderResult(targets.image(), stats, m, targets)
