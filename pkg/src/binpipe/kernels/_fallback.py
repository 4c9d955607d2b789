"""Pure numpy implementation of the hot kernels.

Mirrors ``_native.pyx`` operation for operation; the two must produce the
same bits for every output field.
"""
from __future__ import annotations

import threading

import numpy as np

from ..primitives import FRAG, HALF, SUBPIXEL
from ..pipelines.shading import LIGHT, MATERIAL

# candidate pixels evaluated per vectorized pass
CHUNK = 1 << 20


def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _owns(ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    return (dy < 0) | ((dy == 0) & (dx > 0))


def _oriented(tris: np.ndarray):
    """Vertex columns with v1/v2 swapped where the winding is negative."""
    X = [tris[f"X{k}"] for k in range(3)]
    Y = [tris[f"Y{k}"] for k in range(3)]
    z = [tris[f"z{k}"] for k in range(3)]
    iw = [tris[f"iw{k}"] for k in range(3)]
    n = [[tris[f"n{k}{c}"] for c in "xyz"] for k in range(3)]
    area = _edge(X[0], Y[0], X[1], Y[1], X[2], Y[2])
    neg = area < 0

    def sw(a, b):
        return np.where(neg, b, a), np.where(neg, a, b)

    X[1], X[2] = sw(X[1], X[2])
    Y[1], Y[2] = sw(Y[1], Y[2])
    z[1], z[2] = sw(z[1], z[2])
    iw[1], iw[2] = sw(iw[1], iw[2])
    for c in range(3):
        n[1][c], n[2][c] = sw(n[1][c], n[2][c])
    return X, Y, z, iw, n, np.abs(area)


def _pixel_range(lo, hi, clip0, clip1):
    # pixel p is a candidate when lo <= SUBPIXEL*p + HALF <= hi
    p0 = -((HALF - lo) // SUBPIXEL)
    p1 = (hi - HALF) // SUBPIXEL
    return np.maximum(p0, clip0), np.minimum(p1, clip1 - 1)


def rasterize(tris: np.ndarray, x0: int, y0: int, x1: int, y1: int, flat: bool = False) -> np.ndarray:
    """Fragments of ``tris`` at pixel centres inside the half-open rect.

    Pixel centres on an edge belong to the triangle only when that edge is a
    top or left edge. Depth is interpolated linearly in screen space, normals
    perspective-correctly; ``flat`` takes both from vertex 0 instead.
    """
    if len(tris) == 0:
        return np.zeros(0, dtype=FRAG)
    X, Y, z, iw, n, area = _oriented(tris)
    xa, xb = _pixel_range(np.minimum(np.minimum(X[0], X[1]), X[2]),
                          np.maximum(np.maximum(X[0], X[1]), X[2]), x0, x1)
    ya, yb = _pixel_range(np.minimum(np.minimum(Y[0], Y[1]), Y[2]),
                          np.maximum(np.maximum(Y[0], Y[1]), Y[2]), y0, y1)
    w = np.maximum(xb - xa + 1, 0)
    h = np.maximum(yb - ya + 1, 0)
    counts = np.where(area > 0, w * h, 0)
    live = np.flatnonzero(counts)
    out = []
    start = 0
    csum = np.cumsum(counts[live])
    while start < len(live):
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + CHUNK, side="right"))
        stop = max(stop, start + 1)
        out.append(_raster_chunk(live[start:stop], counts, xa, ya, w, X, Y, z, iw, n, area,
                                 tris["prim"], flat))
        start = stop
    if not out:
        return np.zeros(0, dtype=FRAG)
    return np.concatenate(out)


def _raster_chunk(idx, counts, xa, ya, w, X, Y, z, iw, n, area, prim, flat):
    c = counts[idx]
    rep = np.repeat(idx, c)
    first = np.repeat(np.cumsum(c) - c, c)
    off = np.arange(len(rep), dtype=np.int64) - first
    wr = w[rep]
    px = xa[rep] + off % wr
    py = ya[rep] + off // wr
    PX = px * SUBPIXEL + HALF
    PY = py * SUBPIXEL + HALF
    x0, y0, x1, y1, x2, y2 = (X[0][rep], Y[0][rep], X[1][rep], Y[1][rep], X[2][rep], Y[2][rep])
    w0 = _edge(x1, y1, x2, y2, PX, PY)
    w1 = _edge(x2, y2, x0, y0, PX, PY)
    w2 = _edge(x0, y0, x1, y1, PX, PY)
    inside = (((w0 > 0) | ((w0 == 0) & _owns(x1, y1, x2, y2)))
              & ((w1 > 0) | ((w1 == 0) & _owns(x2, y2, x0, y0)))
              & ((w2 > 0) | ((w2 == 0) & _owns(x0, y0, x1, y1))))
    sel = np.flatnonzero(inside)
    rep = rep[sel]
    f0 = w0[sel].astype(np.float64)
    f1 = w1[sel].astype(np.float64)
    f2 = w2[sel].astype(np.float64)
    if flat:
        depth = z[0][rep]
        nrm = [n[0][c][rep] for c in range(3)]
    else:
        depth = ((f0 * z[0][rep] + f1 * z[1][rep]) + f2 * z[2][rep]) / area[rep].astype(np.float64)
        q0 = f0 * iw[0][rep]
        q1 = f1 * iw[1][rep]
        q2 = f2 * iw[2][rep]
        den = (q0 + q1) + q2
        nrm = [((q0 * n[0][c][rep] + q1 * n[1][c][rep]) + q2 * n[2][c][rep]) / den for c in range(3)]
    keep = np.flatnonzero((depth >= 0.0) & (depth <= 1.0))
    frags = np.zeros(len(keep), dtype=FRAG)
    frags["x"] = px[sel][keep]
    frags["y"] = py[sel][keep]
    frags["depth"] = depth[keep]
    frags["nx"] = nrm[0][keep]
    frags["ny"] = nrm[1][keep]
    frags["nz"] = nrm[2][keep]
    frags["prim"] = prim[rep][keep]
    return frags


def shade(frags: np.ndarray, cost: int = 0) -> np.ndarray:
    """Write diffuse colour into ``frags`` in place; ``cost`` adds dead work."""
    if len(frags) == 0:
        return frags
    nx, ny, nz = frags["nx"], frags["ny"], frags["nz"]
    ln = np.sqrt((nx * nx + ny * ny) + nz * nz)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = ((nx / ln) * LIGHT + (ny / ln) * LIGHT) + (nz / ln) * LIGHT
    d = np.where(ln == 0.0, 0.0, d)
    d = np.where(d > 0.0, d, 0.0)
    if cost:
        acc = np.zeros_like(d)
        for _ in range(cost):
            acc = np.sin(acc + d)
    frags["r"] = MATERIAL[0] * d
    frags["g"] = MATERIAL[1] * d
    frags["b"] = MATERIAL[2] * d
    return frags


class MergeLock:
    """Serializes whole-batch merges for the vectorized path."""

    def __init__(self, height: int):
        self.lock = threading.Lock()


def depth_merge(frags: np.ndarray, depth: np.ndarray, prim: np.ndarray, payload: np.ndarray,
                store_normal: bool, lock: MergeLock | None = None) -> np.ndarray:
    """Keep the lexicographically smallest (depth, prim) per pixel.

    Returns a mask of each pixel's best fragment in the batch where it beat
    the record. The record arrays are (H, W), (H, W) and (H, W, 3).
    """
    mask = np.zeros(len(frags), dtype=bool)
    if len(frags) == 0:
        return mask
    width = depth.shape[1]
    pix = frags["y"].astype(np.int64) * width + frags["x"]
    fd = frags["depth"]
    fp = frags["prim"]
    order = np.lexsort((fp, fd, pix))
    sp = pix[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sp[1:] != sp[:-1]
    cand = order[first]
    cp = pix[cand]
    cd = fd[cand]
    cpr = fp[cand]
    flat_d = depth.reshape(-1)
    flat_p = prim.reshape(-1)
    flat_pay = payload.reshape(-1, 3)
    if store_normal:
        vals = np.stack([frags["nx"][cand], frags["ny"][cand], frags["nz"][cand]], axis=1)
    else:
        vals = np.stack([frags["r"][cand], frags["g"][cand], frags["b"][cand]], axis=1)
    guard = lock.lock if lock is not None else _NOLOCK
    with guard:
        od = flat_d[cp]
        op = flat_p[cp]
        win = (cd < od) | ((cd == od) & (cpr < op))
        w = np.flatnonzero(win)
        flat_d[cp[w]] = cd[w]
        flat_p[cp[w]] = cpr[w]
        flat_pay[cp[w]] = vals[w]
    mask[cand[w]] = True
    return mask


class _NoLock:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


_NOLOCK = _NoLock()
