"""JSON pipeline description documents.

One document describes one pipeline::

    {
      "name": "binned",
      "screen": [1024, 768],
      "targets": "forward",
      "stages": [
        {"name": "Rasterizer", "process": "rasterizer",
         "input": "triangle", "outputs": ["fragment"],
         "bin": [8, 8], "threads_per_bin": 64,
         "assign": "AssignToBoundingBox",
         "schedule": "LoadBalance", "tile_split_size": null,
         "mode": "PerPrimitive", "dependencies": ["EndBin", "EndStage:Other"]}
      ],
      "edges": [["VertexShader", 0, "Rasterizer"]]
    }

``process`` and ``assign_fn`` name functions registered in
:mod:`binpipe.pipelines.registry`. Optional stage keys default to a
full-screen bin, 64 threads per bin, AssignPreviousBins, LoadBalance,
PerPrimitive and no dependencies.
"""
from __future__ import annotations

import json
from pathlib import Path

from .graph import (
    AssignKind,
    BinAssignDirective,
    BinConfig,
    DependencyConstraint,
    DependencyKind,
    GraphError,
    PipelineGraph,
    ProcessMode,
    ScheduleDirective,
    ScheduleKind,
    StageDecl,
    add_stage,
    connect,
    validate,
)
from .pipelines import registry

STAGE_KEYS = {"name", "process", "input", "outputs", "bin", "threads_per_bin", "assign", "assign_fn",
              "schedule", "tile_split_size", "mode", "dependencies"}
DOC_KEYS = {"name", "screen", "targets", "stages", "edges"}


class DescriptionError(ValueError):
    pass


def _dep_to_text(d: DependencyConstraint) -> str:
    return d.kind.value if d.kind is DependencyKind.END_BIN else f"{d.kind.value}:{d.target_stage}"


def _dep_from_text(text: str) -> DependencyConstraint:
    kind, _, target = text.partition(":")
    return DependencyConstraint(DependencyKind(kind), target or None)


def graph_to_doc(graph: PipelineGraph) -> dict:
    stages = []
    for s in graph.stages:
        d = {
            "name": s.name,
            "process": registry.name_of(s.process, registry.PROCESS),
            "input": s.input_type,
            "outputs": list(s.output_types),
            "bin": [s.bin_config.bin_width, s.bin_config.bin_height],
            "threads_per_bin": s.bin_config.threads_per_bin,
            "assign": s.assign_bin.kind.value,
            "schedule": s.schedule.kind.value,
            "tile_split_size": s.schedule.tile_split_size,
            "mode": s.process_mode.value,
            "dependencies": [_dep_to_text(d) for d in s.dependencies],
        }
        if s.assign_bin.kind is AssignKind.CUSTOM:
            d["assign_fn"] = registry.name_of(s.assign_bin.custom_fn, registry.ASSIGN)
        stages.append(d)
    return {
        "name": graph.name,
        "screen": list(graph.screen),
        "targets": graph.targets,
        "stages": stages,
        "edges": [list(e) for e in graph.edges],
    }


def _stage_from_doc(d: dict) -> StageDecl:
    if not isinstance(d, dict):
        raise DescriptionError(f"stage entry must be an object, got {type(d).__name__}")
    extra = set(d) - STAGE_KEYS
    if extra:
        raise DescriptionError(f"stage {d.get('name')!r}: unknown keys {sorted(extra)}")
    for k in ("name", "process", "input"):
        if k not in d:
            raise DescriptionError(f"stage {d.get('name')!r}: missing {k!r}")
    name = d["name"]
    try:
        kind = AssignKind(d.get("assign", AssignKind.PREVIOUS_BINS.value))
        fn = registry.lookup(d["assign_fn"], registry.ASSIGN, "assign") if kind is AssignKind.CUSTOM else None
        bw, bh = d.get("bin", [0, 0])
        return StageDecl(
            name=name,
            process=registry.lookup(d["process"], registry.PROCESS, "process"),
            input_type=d["input"],
            output_types=tuple(d.get("outputs", ())),
            bin_config=BinConfig(int(bw), int(bh), int(d.get("threads_per_bin", 64))),
            assign_bin=BinAssignDirective(kind, fn),
            schedule=ScheduleDirective(ScheduleKind(d.get("schedule", ScheduleKind.LOAD_BALANCE.value)),
                                       d.get("tile_split_size")),
            process_mode=ProcessMode(d.get("mode", ProcessMode.PER_PRIMITIVE.value)),
            dependencies=tuple(_dep_from_text(t) for t in d.get("dependencies", ())),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise DescriptionError(f"stage {name!r}: {exc}") from exc


def doc_to_graph(doc: dict, check: bool = True) -> PipelineGraph:
    if not isinstance(doc, dict):
        raise DescriptionError("pipeline document must be a JSON object")
    extra = set(doc) - DOC_KEYS
    if extra:
        raise DescriptionError(f"unknown top-level keys {sorted(extra)}")
    screen = tuple(int(v) for v in doc.get("screen", (1024, 768)))
    if len(screen) != 2 or min(screen) <= 0:
        raise DescriptionError(f"screen must be two positive integers, got {list(screen)}")
    g = PipelineGraph(screen=screen, name=doc.get("name", "pipeline"), targets=doc.get("targets"))
    try:
        for sd in doc.get("stages", ()):
            g = add_stage(g, _stage_from_doc(sd))
        for e in doc.get("edges", ()):
            p, ch, c = e
            g = connect(g, p, int(ch), c)
    except GraphError as exc:
        raise DescriptionError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise DescriptionError(f"bad edge list: {exc}") from exc
    if check:
        diags = validate(g)
        if diags:
            raise DescriptionError("invalid pipeline: " + "; ".join(str(x) for x in diags))
    return g


def load_pipeline(path) -> PipelineGraph:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DescriptionError(f"{path}: {exc}") from exc
    return doc_to_graph(doc)


def dumps(graph: PipelineGraph) -> str:
    return json.dumps(graph_to_doc(graph), indent=2)


def dump_pipeline(graph: PipelineGraph, path) -> None:
    Path(path).write_text(dumps(graph) + "\n")
