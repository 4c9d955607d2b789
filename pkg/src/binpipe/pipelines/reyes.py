"""Process phases of the split-dice-sample-shade (Reyes) pipeline."""
from __future__ import annotations

import logging

import numpy as np

from .. import kernels
from ..primitives import MICROPOLY, PATCH, SUBPIXEL, TRI
from .bezier import (
    DICE_RATE_PX,
    DICE_TOLERANCE,
    SPLIT_THRESHOLD_PX,
    bisect,
    evaluate_grid,
    initial_dice_n,
    project_control,
    refined_dice_n,
    screen_extent,
    split_decision,
)
from .geometry import project, snap, vertex_ok

log = logging.getLogger(__name__)

# micropolygon primitive ids: patch | split path | index within the diced grid
PATH_SHIFT = 12
PATCH_SHIFT = 45
REFINE_ROUNDS = 6


def split_cap(params) -> int:
    """Deepest split level; one below the loop's iteration cap."""
    return int(params.get("split_cap", int(params.get("cycle_cap", 32)) - 1))


def make_patches(cps: np.ndarray) -> np.ndarray:
    """Root patch records for an (m, 16, 3) control-point array."""
    out = np.zeros(len(cps), dtype=PATCH)
    out["cp"] = cps
    out["u1"] = 1.0
    out["v1"] = 1.0
    out["path"] = 1
    out["patch"] = np.arange(len(cps))
    return out


def split_patches(batch: np.ndarray, pr, cap: int, threshold: float = SPLIT_THRESHOLD_PX):
    """Returns (children, diceable) patch arrays."""
    split, along_u = split_decision(pr, batch["cp"], batch["depth"], cap, threshold)
    done = batch[~split]
    over = done[done["depth"] >= cap]
    if len(over):
        sx, sy, _ = project_control(pr, over["cp"])
        big = screen_extent(sx, sy) > threshold
        if big.any():
            log.debug("split cap %d reached; dicing %d oversized patches", cap, int(big.sum()))
    s = batch[split]
    if len(s) == 0:
        return s, done
    au = along_u[split]
    lo, hi = bisect(s["cp"], au)
    a = s.copy()
    b = s.copy()
    a["cp"] = lo
    b["cp"] = hi
    mu = (s["u0"] + s["u1"]) * 0.5
    mv = (s["v0"] + s["v1"]) * 0.5
    a["u1"] = np.where(au, mu, s["u1"])
    b["u0"] = np.where(au, mu, s["u0"])
    a["v1"] = np.where(au, s["v1"], mv)
    b["v0"] = np.where(au, s["v0"], mv)
    a["depth"] = s["depth"] + 1
    b["depth"] = s["depth"] + 1
    a["path"] = s["path"] * 2
    b["path"] = s["path"] * 2 + 1
    return np.concatenate([a, b]), done


def _grid_micropolys(patches: np.ndarray, n: int, pr):
    """Micropolygons of patches diced n x n, plus each patch's worst extent."""
    m = len(patches)
    x, y, z = evaluate_grid(patches["cp"], n)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sx, sy, depth, _, cw = project(pr, x, y, z)
        ok = vertex_ok(sx, sy, cw)
        X = np.where(ok, snap(np.where(ok, sx, 0.0)), 0)
        Y = np.where(ok, snap(np.where(ok, sy, 0.0)), 0)
    c = [(slice(None, -1), slice(None, -1)), (slice(None, -1), slice(1, None)),
         (slice(1, None), slice(1, None)), (slice(1, None), slice(None, -1))]
    Xc = np.stack([X[:, r, q] for r, q in c], axis=-1).reshape(m, n * n, 4)
    Yc = np.stack([Y[:, r, q] for r, q in c], axis=-1).reshape(m, n * n, 4)
    valid = np.stack([ok[:, r, q] for r, q in c], axis=-1).all(-1).reshape(m, n * n)
    d = [depth[:, r, q] for r, q in c]
    md = (((d[0] + d[1]) + (d[2] + d[3])) * 0.25).reshape(m, n * n)
    # normal from the cross product of the two diagonals
    p = [(x[:, r, q], y[:, r, q], z[:, r, q]) for r, q in c]
    ax, ay, az = p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]
    bx, by, bz = p[3][0] - p[1][0], p[3][1] - p[1][1], p[3][2] - p[1][2]
    nx = ay * bz - az * by
    ny = az * bx - ax * bz
    nz = ax * by - ay * bx
    ln = np.sqrt((nx * nx + ny * ny) + nz * nz)
    with np.errstate(divide="ignore", invalid="ignore"):
        nx, ny, nz = (np.where(ln == 0.0, 0.0, v / ln).reshape(m, n * n) for v in (nx, ny, nz))
    ext = np.maximum(Xc.max(-1) - Xc.min(-1), Yc.max(-1) - Yc.min(-1)) / float(SUBPIXEL)
    worst = np.where(valid, ext, 0.0).max(-1)
    mp = np.zeros((m, n * n), dtype=MICROPOLY)
    mp["X"] = Xc
    mp["Y"] = Yc
    mp["depth"] = md
    mp["nx"] = nx
    mp["ny"] = ny
    mp["nz"] = nz
    base = (patches["patch"] << PATCH_SHIFT) | (patches["path"] << PATH_SHIFT)
    mp["prim"] = base[:, None] | np.arange(n * n, dtype=np.int64)[None, :]
    return mp, valid, worst


def dice_rates(patches: np.ndarray, pr, rate: float = DICE_RATE_PX) -> np.ndarray:
    """Dice resolution per patch, refined until micropolygons fit the tolerance."""
    sx, sy, _ = project_control(pr, patches["cp"])
    with np.errstate(invalid="ignore"):
        ext = screen_extent(sx, sy)
    ns = np.array([initial_dice_n(float(e), rate) for e in ext], dtype=np.int64)
    limit = (1.0 + DICE_TOLERANCE) * rate
    todo = np.arange(len(patches))
    for _ in range(REFINE_ROUNDS):
        if len(todo) == 0:
            break
        again = []
        for n in np.unique(ns[todo]):
            idx = todo[ns[todo] == n]
            _, _, worst = _grid_micropolys(patches[idx], int(n), pr)
            for i, w in zip(idx, worst):
                if w > limit:
                    nn = refined_dice_n(int(n), float(w), rate)
                    if nn != n:
                        ns[i] = nn
                        again.append(i)
        todo = np.array(sorted(again), dtype=np.int64)
    return ns


def dice_patches(patches: np.ndarray, pr, rate: float = DICE_RATE_PX) -> np.ndarray:
    if len(patches) == 0:
        return np.zeros(0, dtype=MICROPOLY)
    ns = dice_rates(patches, pr, rate)
    out = []
    for n in np.unique(ns):
        idx = np.flatnonzero(ns == n)
        mp, valid, _ = _grid_micropolys(patches[idx], int(n), pr)
        out.append(mp[valid])
    return np.concatenate(out)


def micropoly_tris(mp: np.ndarray) -> np.ndarray:
    """Two flat triangles per micropolygon: (0, 1, 2) and (0, 2, 3)."""
    n = len(mp)
    t = np.zeros(2 * n, dtype=TRI)
    for half, ks in enumerate(((0, 1, 2), (0, 2, 3))):
        sl = slice(half, None, 2)
        for j, k in enumerate(ks):
            t[f"X{j}"][sl] = mp["X"][:, k]
            t[f"Y{j}"][sl] = mp["Y"][:, k]
            t[f"z{j}"][sl] = mp["depth"]
            t[f"iw{j}"][sl] = 1.0
            t[f"n{j}x"][sl] = mp["nx"]
            t[f"n{j}y"][sl] = mp["ny"]
            t[f"n{j}z"][sl] = mp["nz"]
        t["prim"][sl] = mp["prim"]
    return t


def split(batch, ctx):
    children, done = split_patches(batch, ctx.params["projector"], split_cap(ctx.params),
                                   float(ctx.params.get("split_threshold", SPLIT_THRESHOLD_PX)))
    ctx.emit(children, 0)
    ctx.emit(done, 1)


def dice(batch, ctx):
    ctx.emit(dice_patches(batch, ctx.params["projector"], float(ctx.params.get("dice_rate", DICE_RATE_PX))))


def sample(batch, ctx):
    x0, y0, x1, y1 = ctx.rect
    ctx.emit(kernels.rasterize(micropoly_tris(batch), x0, y0, x1, y1, True))


def shade(batch, ctx):
    frags = batch.copy()
    kernels.shade(frags, int(ctx.params.get("shader_cost", 0)))
    ctx.targets.merge(frags, store_normal=False)

