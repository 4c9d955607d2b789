"""Time the compiled kernels against the numpy fallback on one workload.

    python3 benchmarks/bench_kernels.py --tris 20000 --repeat 5
"""
import argparse
import statistics
import time

import numpy as np

from binpipe import kernels
from binpipe.pipelines.geometry import Projector, vertex_shade
from binpipe.pipelines.scenes import soup
from binpipe.primitives import NO_PRIM


def median_time(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def workload(n, size, screen):
    sc = soup(n, size, seed=11, screen=screen)
    return vertex_shade(sc.prims, Projector.make(sc.camera, screen))


def bench_backend(name, tris, screen, repeat, cost):
    k = kernels.load(name)
    w, h = screen
    frags = k.rasterize(tris, 0, 0, w, h)
    shaded = k.shade(frags.copy(), cost)

    def merge():
        depth = np.full((h, w), np.inf)
        prim = np.full((h, w), NO_PRIM, dtype=np.int64)
        k.depth_merge(shaded, depth, prim, np.zeros((h, w, 3)), False, k.MergeLock(h))

    return {
        "rasterize": median_time(lambda: k.rasterize(tris, 0, 0, w, h), repeat),
        "shade": median_time(lambda: k.shade(frags.copy(), cost), repeat),
        "depth_merge": median_time(merge, repeat),
    }, len(frags)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tris", type=int, default=20000)
    ap.add_argument("--size", choices=["mixed", "small"], default="mixed")
    ap.add_argument("--screen", default="1024x768")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--shader-cost", type=int, default=0)
    args = ap.parse_args(argv)
    screen = tuple(int(v) for v in args.screen.lower().split("x"))
    tris = workload(args.tris, args.size, screen)
    results = {}
    for name in kernels.available():
        results[name], nfrag = bench_backend(name, tris, screen, args.repeat, args.shader_cost)
    print(f"{len(tris)} triangles, {nfrag} fragments, median of {args.repeat}")
    names = sorted(results)
    print(f"{'kernel':<12}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for kern in ("rasterize", "shade", "depth_merge"):
        row = f"{kern:<12}" + "".join(f"{results[n][kern]:>11.4f}s" for n in names)
        if "native" in results and "python" in results:
            row += f"{results['python'][kern] / results['native'][kern]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
