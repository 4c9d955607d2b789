"""Command-line entry point: ``binpipe {inspect,render,verify,bench,export}``."""
from __future__ import annotations

import argparse
import json
import statistics
import sys
from dataclasses import replace
from pathlib import Path

from . import kernels
from .description import DescriptionError, dumps, load_pipeline
from .graph import GraphError, PipelineGraph
from .imageio import write_ppm
from .oracle import compare_images, reference_render, reference_reyes
from .pipelines.scenes import Scene, load_scene, procedural
from .pipelines.variants import VARIANTS, apply_overrides, build_variant, parse_override
from .render import render
from .runtime import DEFAULT_CYCLE_CAP, DEFAULT_STRIP, LoopCapExceeded, PhaseError
from .skeleton import skeleton_report
from .synthesis import SynthesisError, synthesis_report, synthesize

EXIT_MISMATCH = 1
EXIT_ERROR = 2


class CliError(Exception):
    pass


def parse_screen(text: str) -> tuple[int, int]:
    w, x, h = text.lower().partition("x")
    try:
        size = (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"screen must be WxH, got {text!r}") from None
    if not x or min(size) <= 0:
        raise argparse.ArgumentTypeError(f"screen must be two positive integers WxH, got {text!r}")
    return size


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _costs(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"shader cost must be integers, got {text!r}") from None
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError("shader cost must be non-negative")
    return vals


def _pipeline_args(p: argparse.ArgumentParser, multi: bool = False) -> None:
    src = p.add_mutually_exclusive_group()
    if multi:
        src.add_argument("--variant", action="append", metavar="NAME[@OVERRIDE;...]",
                         help="variant to run; repeatable (default: baseline and binned)")
    else:
        src.add_argument("--variant", choices=VARIANTS, help="shipped pipeline (default: binned)")
    src.add_argument("--pipeline-file", type=Path, help="JSON pipeline description")
    p.add_argument("--screen", type=parse_screen, metavar="WxH", help="default 1024x768, or the file's screen")
    p.add_argument("--override", action="append", default=[], metavar="STAGE.KEY=VALUE",
                   help="STAGE.bin=WxH or STAGE.schedule=KIND[:split]; STAGE '*' means every stage")


def _run_args(p: argparse.ArgumentParser) -> None:
    sc = p.add_mutually_exclusive_group()
    sc.add_argument("--scene", type=Path, help=".obj triangles or a patch file")
    sc.add_argument("--proc-scene", metavar="SPEC",
                    help="quad | soup:n=10000,size=mixed,seed=7 | patch-array:n=4 | teapot")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--cycle-cap", type=_positive, default=DEFAULT_CYCLE_CAP)
    p.add_argument("--strip-mine", type=_positive, default=DEFAULT_STRIP)
    p.add_argument("--backend", choices=kernels.available(), help="kernel backend (default: best available)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="binpipe", description="Binned programmable pipeline toolkit.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("inspect", help="print skeleton, stage order and kernel mapping")
    _pipeline_args(p)
    p.add_argument("--stop-after", help="stop synthesis after this pass (baseline, preschedule, ...)")

    p = sub.add_parser("render", help="run a pipeline and write the image and stats")
    _pipeline_args(p)
    _run_args(p)
    p.add_argument("--out", type=Path, help="output image (.ppm)")
    p.add_argument("--stats", type=Path, help="output statistics (JSON)")
    p.add_argument("--shader-cost", type=int, default=0, metavar="K")
    p.add_argument("--fault", choices=["skew-depth"], help=argparse.SUPPRESS)

    p = sub.add_parser("verify", help="compare a pipeline run with the reference renderer")
    _pipeline_args(p)
    _run_args(p)
    p.add_argument("--out", type=Path, help="also write the pipeline image")
    p.add_argument("--fault", choices=["skew-depth"], help="inject a known bug (negative control)")

    p = sub.add_parser("bench", help="time variants over repeats and shader costs")
    _pipeline_args(p, multi=True)
    _run_args(p)
    p.add_argument("--repeat", type=_positive, default=5)
    p.add_argument("--shader-cost", type=_costs, default=[0], metavar="K[,K...]")
    p.add_argument("--out", type=Path, help="machine-readable results (JSON)")

    p = sub.add_parser("export", help="write a pipeline description document")
    _pipeline_args(p)
    p.add_argument("--out", type=Path, help="destination (default: stdout)")
    return ap


def load_graph(args, variant: str | None = None, extra: list[str] = ()) -> PipelineGraph:
    overrides = [parse_override(o) for o in list(extra) + list(args.override)]
    if getattr(args, "pipeline_file", None):
        g = load_pipeline(args.pipeline_file)
        if args.screen:
            g = replace(g, screen=tuple(args.screen))
        return apply_overrides(g, overrides)
    return build_variant(variant or "binned", tuple(args.screen or (1024, 768)), overrides)


def load_input(args, graph: PipelineGraph) -> Scene:
    if args.scene:
        return load_scene(args.scene)
    if args.proc_scene:
        return procedural(args.proc_scene, graph.screen)
    return procedural("teapot" if graph.stage(graph.sources[0]).input_type == "patch" else "quad", graph.screen)


def _select_backend(args) -> None:
    if getattr(args, "backend", None):
        kernels.set_backend(args.backend)


def cmd_inspect(args, out) -> int:
    g = load_graph(args, args.variant)
    m = synthesize(g, args.stop_after)
    print(skeleton_report(m.skeleton), file=out)
    print(synthesis_report(m), file=out)
    return 0


def _render(args, g, scene, shader_cost=0, fault=None):
    return render(g, scene, workers=args.workers, cycle_cap=args.cycle_cap, strip_mine=args.strip_mine,
                  shader_cost=shader_cost, fault=fault)


def cmd_render(args, out) -> int:
    _select_backend(args)
    g = load_graph(args, args.variant)
    scene = load_input(args, g)
    res = _render(args, g, scene, args.shader_cost, args.fault)
    if args.out:
        write_ppm(args.out, res.image)
    if args.stats:
        args.stats.write_text(res.stats.to_json() + "\n")
    st = res.stats
    print(f"{g.name}: {len(res.mapping.kernels)} kernels, {st.total_seconds:.3f}s, "
          f"{res.targets.coverage} pixels covered, traffic {st.inter_stage_traffic}, "
          f"exactly-once {st.exactly_once}, conserved {st.conserved}", file=out)
    return 0


def reference_for(g: PipelineGraph, scene: Scene, cycle_cap: int):
    if scene.kind == "patches":
        return reference_reyes(scene.prims, g.screen, scene.camera, cap=cycle_cap - 1)
    if g.targets not in ("forward", "deferred"):
        raise CliError(f"no reference renderer for pipeline {g.name!r} with targets {g.targets!r}")
    return reference_render(scene.prims, g.screen, scene.camera)


def cmd_verify(args, out) -> int:
    _select_backend(args)
    g = load_graph(args, args.variant)
    scene = load_input(args, g)
    res = _render(args, g, scene, 0, args.fault)
    if args.out:
        write_ppm(args.out, res.image)
    diff = compare_images(res.image, reference_for(g, scene, args.cycle_cap))
    ok = diff.identical and res.stats.exactly_once and res.stats.conserved
    print(f"{g.name} on {scene.name or 'scene'} ({args.workers} workers): {diff}; "
          f"exactly-once {res.stats.exactly_once}; conserved {res.stats.conserved} -> "
          f"{'PASS' if ok else 'FAIL'}", file=out)
    return 0 if ok else EXIT_MISMATCH


def _split_variant(token: str) -> tuple[str, list[str]]:
    name, _, rest = token.partition("@")
    return name, [o for o in rest.split(";") if o]


def bench_matrix(args, out=None) -> dict:
    _select_backend(args)
    tokens = args.variant or ["baseline", "binned"]
    rows = []
    scene = None
    for token in tokens:
        name, extra = _split_variant(token)
        g = load_graph(args, name, extra)
        if scene is None:
            scene = load_input(args, g)
        m = synthesize(g)
        for cost in args.shader_cost:
            runs = [_render(args, g, scene, cost) for _ in range(args.repeat)]
            totals = [r.stats.total_seconds for r in runs]
            per_kernel = []
            for i, k in enumerate(runs[0].stats.kernels):
                per_kernel.append({"stages": k["stages"], "dispatch": k["dispatch"],
                                   "median_seconds": statistics.median(r.stats.kernels[i]["seconds"] for r in runs)})
            last = runs[-1].stats
            row = {
                "config": token,
                "variant": g.name,
                "shader_cost": cost,
                "workers": args.workers,
                "repeat": args.repeat,
                "kernels": len(m.kernels),
                "median_seconds": statistics.median(totals),
                "all_seconds": totals,
                "per_kernel": per_kernel,
                "traffic": last.traffic,
                "inter_stage_traffic": last.inter_stage_traffic,
                "occupancy": last.occupancy,
                "exactly_once": all(r.stats.exactly_once for r in runs),
                "conserved": all(r.stats.conserved for r in runs),
            }
            rows.append(row)
            if out is not None:
                print(f"{token:<40} K={cost:<4} kernels={row['kernels']} median={row['median_seconds']:.4f}s "
                      f"traffic={row['inter_stage_traffic']}", file=out)
    fastest = {}
    for cost in args.shader_cost:
        sel = [r for r in rows if r["shader_cost"] == cost]
        fastest[str(cost)] = min(sel, key=lambda r: r["median_seconds"])["config"]
    return {"scene": scene.name if scene else None, "backend": kernels.BACKEND, "rows": rows, "fastest": fastest}


def cmd_bench(args, out) -> int:
    doc = bench_matrix(args, out)
    for cost, cfg in doc["fastest"].items():
        print(f"fastest at K={cost}: {cfg}", file=out)
    if args.out:
        args.out.write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_export(args, out) -> int:
    text = dumps(load_graph(args, args.variant))
    if args.out:
        args.out.write_text(text + "\n")
    else:
        print(text, file=out)
    return 0


COMMANDS = {"inspect": cmd_inspect, "render": cmd_render, "verify": cmd_verify, "bench": cmd_bench,
            "export": cmd_export}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args, out)
    except (CliError, DescriptionError, GraphError, SynthesisError, PhaseError, LoopCapExceeded,
            ValueError, KeyError, OSError) as exc:
        print(f"binpipe: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
