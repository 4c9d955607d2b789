"""Brute-force reference renderers and comparison helpers.

The reference path has no bins, kernels or runtime: it walks primitives one
at a time in input order, tests every pixel centre in each triangle's box and
keeps the smallest (depth, primitive id) per pixel, then shades the winners.
Only the projection, snapping, Bezier and shading formulas are shared with
the pipelines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import bin_grid
from .pipelines.bezier import (
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
from .pipelines.geometry import Camera, Projector, project, snap, vertex_ok
from .pipelines.reyes import PATCH_SHIFT, PATH_SHIFT, REFINE_ROUNDS
from .pipelines.shading import BACKGROUND, shade_color
from .primitives import HALF, NO_PRIM, SUBPIXEL

# triangles testing fewer pixel centres than this use the scalar loop
SCALAR_LIMIT = 48


class _Record:
    def __init__(self, screen):
        w, h = screen
        self.w, self.h = w, h
        self.depth = np.full((h, w), np.inf)
        self.prim = np.full((h, w), NO_PRIM, dtype=np.int64)
        self.normal = np.zeros((h, w, 3))

    def offer(self, x, y, d, p, n):
        od = self.depth[y, x]
        if d < od or (d == od and p < self.prim[y, x]):
            self.depth[y, x] = d
            self.prim[y, x] = p
            self.normal[y, x] = n

    def offer_many(self, xs, ys, d, p, nx, ny, nz):
        # one triangle covers each pixel at most once, so no intra-batch conflicts
        od = self.depth[ys, xs]
        op = self.prim[ys, xs]
        win = (d < od) | ((d == od) & (p < op))
        xs, ys = xs[win], ys[win]
        self.depth[ys, xs] = d[win]
        self.prim[ys, xs] = p
        self.normal[ys, xs, 0] = nx[win]
        self.normal[ys, xs, 1] = ny[win]
        self.normal[ys, xs, 2] = nz[win]

    def image(self) -> np.ndarray:
        img = np.empty((self.h, self.w, 3))
        img[...] = BACKGROUND
        ys, xs = np.nonzero(self.prim != NO_PRIM)
        for y, x in zip(ys.tolist(), xs.tolist()):
            img[y, x] = shade_color(*(float(c) for c in self.normal[y, x]))
        return img


def _e(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def _top_left(ax, ay, bx, by):
    return by < ay or (by == ay and bx > ax)


def _draw(rec: _Record, V, z, iw, N, prim: int, flat: bool) -> None:
    """Rasterize one fixed-point triangle into the record.

    ``V`` is [(X, Y)] * 3, ``z``/``iw`` per-vertex floats, ``N`` per-vertex normals.
    """
    (x0, y0), (x1, y1), (x2, y2) = V
    area = _e(x0, y0, x1, y1, x2, y2)
    if area == 0:
        return
    if area < 0:
        x1, y1, x2, y2 = x2, y2, x1, y1
        z = (z[0], z[2], z[1])
        iw = (iw[0], iw[2], iw[1])
        N = (N[0], N[2], N[1])
        area = -area
    own0 = _top_left(x1, y1, x2, y2)
    own1 = _top_left(x2, y2, x0, y0)
    own2 = _top_left(x0, y0, x1, y1)
    # every pixel whose centre could be inside, clipped to the screen
    pxa = max(0, min(x0, x1, x2) // SUBPIXEL - 1)
    pxb = min(rec.w - 1, max(x0, x1, x2) // SUBPIXEL + 1)
    pya = max(0, min(y0, y1, y2) // SUBPIXEL - 1)
    pyb = min(rec.h - 1, max(y0, y1, y2) // SUBPIXEL + 1)
    if pxa > pxb or pya > pyb:
        return
    fa = float(area)
    if (pxb - pxa + 1) * (pyb - pya + 1) <= SCALAR_LIMIT:
        for py in range(pya, pyb + 1):
            PY = py * SUBPIXEL + HALF
            for px in range(pxa, pxb + 1):
                PX = px * SUBPIXEL + HALF
                w0 = _e(x1, y1, x2, y2, PX, PY)
                w1 = _e(x2, y2, x0, y0, PX, PY)
                w2 = _e(x0, y0, x1, y1, PX, PY)
                if not ((w0 > 0 or (w0 == 0 and own0)) and (w1 > 0 or (w1 == 0 and own1))
                        and (w2 > 0 or (w2 == 0 and own2))):
                    continue
                f0, f1, f2 = float(w0), float(w1), float(w2)
                if flat:
                    d = z[0]
                    n = N[0]
                else:
                    d = ((f0 * z[0] + f1 * z[1]) + f2 * z[2]) / fa
                    q0, q1, q2 = f0 * iw[0], f1 * iw[1], f2 * iw[2]
                    den = (q0 + q1) + q2
                    n = tuple(((q0 * N[0][c] + q1 * N[1][c]) + q2 * N[2][c]) / den for c in range(3))
                if 0.0 <= d <= 1.0:
                    rec.offer(px, py, d, prim, n)
        return
    ys, xs = np.mgrid[pya:pyb + 1, pxa:pxb + 1]
    xs = xs.ravel().astype(np.int64)
    ys = ys.ravel().astype(np.int64)
    PX = xs * SUBPIXEL + HALF
    PY = ys * SUBPIXEL + HALF
    w0 = _e(x1, y1, x2, y2, PX, PY)
    w1 = _e(x2, y2, x0, y0, PX, PY)
    w2 = _e(x0, y0, x1, y1, PX, PY)
    inside = (((w0 > 0) | ((w0 == 0) & own0)) & ((w1 > 0) | ((w1 == 0) & own1))
              & ((w2 > 0) | ((w2 == 0) & own2)))
    xs, ys = xs[inside], ys[inside]
    f0 = w0[inside].astype(np.float64)
    f1 = w1[inside].astype(np.float64)
    f2 = w2[inside].astype(np.float64)
    if flat:
        d = np.full(len(xs), z[0])
        nx, ny, nz = (np.full(len(xs), N[0][c]) for c in range(3))
    else:
        d = ((f0 * z[0] + f1 * z[1]) + f2 * z[2]) / fa
        q0, q1, q2 = f0 * iw[0], f1 * iw[1], f2 * iw[2]
        den = (q0 + q1) + q2
        nx, ny, nz = (((q0 * N[0][c] + q1 * N[1][c]) + q2 * N[2][c]) / den for c in range(3))
    ok = (d >= 0.0) & (d <= 1.0)
    rec.offer_many(xs[ok], ys[ok], d[ok], prim, nx[ok], ny[ok], nz[ok])


def reference_render(objtris: np.ndarray, screen=(1024, 768), camera: Camera | None = None) -> np.ndarray:
    """Reference image for the triangle pipelines (forward and deferred alike)."""
    pr = Projector.make(camera or Camera(), screen)
    rec = _Record(screen)
    P = objtris["p"].tolist()
    NN = objtris["n"].tolist()
    prims = objtris["prim"].tolist()
    for t in range(len(prims)):
        V, z, iw = [], [], []
        culled = False
        for k in range(3):
            x, y, zz = P[t][k]
            try:
                sx, sy, d, w_inv, cw = project(pr, x, y, zz)
            except ZeroDivisionError:  # w exactly 0
                culled = True
                break
            if not vertex_ok(sx, sy, cw):
                culled = True
                break
            V.append((snap(sx), snap(sy)))
            z.append(d)
            iw.append(w_inv)
        if culled:
            continue
        _draw(rec, V, tuple(z), tuple(iw), tuple(tuple(n) for n in NN[t]), prims[t], flat=False)
    return rec.image()


def _ref_split(pr, cp, depth, cap, threshold):
    s, au = split_decision(pr, cp[None], np.array([depth]), cap, threshold)
    return bool(s[0]), bool(au[0])


def _ref_micropolys(cp, n, pr, patch, path):
    """Diced micropolygons of one patch as python tuples, plus the worst extent."""
    x, y, z = evaluate_grid(cp[None], n)
    x, y, z = x[0], y[0], z[0]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sx, sy, d, _, cw = project(pr, x, y, z)
    out = []
    worst = 0.0
    for j in range(n):
        for i in range(n):
            corners = ((j, i), (j, i + 1), (j + 1, i + 1), (j + 1, i))
            if not all(vertex_ok(float(sx[c]), float(sy[c]), float(cw[c])) for c in corners):
                continue
            X = [snap(float(sx[c])) for c in corners]
            Y = [snap(float(sy[c])) for c in corners]
            dd = [float(d[c]) for c in corners]
            md = ((dd[0] + dd[1]) + (dd[2] + dd[3])) * 0.25
            p = [(float(x[c]), float(y[c]), float(z[c])) for c in corners]
            a = (p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2])
            b = (p[3][0] - p[1][0], p[3][1] - p[1][1], p[3][2] - p[1][2])
            nx = a[1] * b[2] - a[2] * b[1]
            ny = a[2] * b[0] - a[0] * b[2]
            nz = a[0] * b[1] - a[1] * b[0]
            ln = math.sqrt((nx * nx + ny * ny) + nz * nz)
            nrm = (0.0, 0.0, 0.0) if ln == 0.0 else (nx / ln, ny / ln, nz / ln)
            ext = max(max(X) - min(X), max(Y) - min(Y)) / float(SUBPIXEL)
            worst = max(worst, ext)
            prim = (patch << PATCH_SHIFT) | (path << PATH_SHIFT) | (j * n + i)
            out.append((X, Y, md, nrm, prim, ext))
    return out, worst


@dataclass
class ReyesTrace:
    """Side information from the reference Reyes run."""

    max_split_depth: int = 0
    leaves: int = 0
    micropolygons: int = 0
    max_extent: float = 0.0


def reference_reyes(patches: np.ndarray, screen=(1024, 768), camera: Camera | None = None, cap: int = 31,
                    threshold: float = SPLIT_THRESHOLD_PX, rate: float = DICE_RATE_PX,
                    trace: ReyesTrace | None = None) -> np.ndarray:
    """Reference image for the Reyes pipeline: split work list, dice, sample, shade."""
    pr = Projector.make(camera or Camera(), screen)
    rec = _Record(screen)
    tr = trace if trace is not None else ReyesTrace()
    work = [(patches["cp"][i].copy(), int(patches["depth"][i]), int(patches["path"][i]), int(patches["patch"][i]))
            for i in range(len(patches))]
    limit = (1.0 + DICE_TOLERANCE) * rate
    while work:
        cp, depth, path, patch = work.pop()
        tr.max_split_depth = max(tr.max_split_depth, depth)
        split, along_u = _ref_split(pr, cp, depth, cap, threshold)
        if split:
            lo, hi = bisect(cp, along_u)
            work.append((lo, depth + 1, path * 2, patch))
            work.append((hi, depth + 1, path * 2 + 1, patch))
            continue
        tr.leaves += 1
        sx, sy, _ = project_control(pr, cp[None])
        with np.errstate(invalid="ignore"):
            n = initial_dice_n(float(screen_extent(sx, sy)[0]), rate)
        mps, worst = _ref_micropolys(cp, n, pr, patch, path)
        for _ in range(REFINE_ROUNDS):
            if worst <= limit:
                break
            nn = refined_dice_n(n, worst, rate)
            if nn == n:
                break
            n = nn
            mps, worst = _ref_micropolys(cp, n, pr, patch, path)
        for X, Y, md, nrm, prim, ext in mps:
            tr.micropolygons += 1
            tr.max_extent = max(tr.max_extent, ext)
            for ks in ((0, 1, 2), (0, 2, 3)):
                V = [(X[k], Y[k]) for k in ks]
                _draw(rec, V, (md, md, md), (1.0, 1.0, 1.0), (nrm, nrm, nrm), prim, flat=True)
    return rec.image()


def brute_bin_assign(box, bin_size, screen) -> list[int]:
    """Every bin whose closed, screen-clipped rectangle meets the closed box."""
    xmin, ymin, xmax, ymax = box
    bw, bh = bin_size
    nx, ny = bin_grid(bin_size, screen)
    out = []
    if not all(math.isfinite(v) for v in box):
        return out
    for by in range(ny):
        y0, y1 = by * bh, min((by + 1) * bh, screen[1])
        for bx in range(nx):
            x0, x1 = bx * bw, min((bx + 1) * bw, screen[0])
            if xmin <= x1 and xmax >= x0 and ymin <= y1 and ymax >= y0:
                out.append(by * nx + bx)
    return out


@dataclass(frozen=True)
class ImageDiff:
    count: int
    max_err: float
    first_coord: tuple[int, int] | None  # (x, y) of the first differing pixel, row-major

    @property
    def identical(self) -> bool:
        return self.count == 0

    def __str__(self):
        if self.count == 0:
            return "0 differing pixels"
        return f"{self.count} differing pixels, max error {self.max_err:.6g}, first at {self.first_coord}"


def compare_images(a: np.ndarray, b: np.ndarray) -> ImageDiff:
    """Bitwise pixel comparison of two (H, W, 3) float images."""
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    ab = np.ascontiguousarray(a).view(np.uint64)
    bb = np.ascontiguousarray(b).view(np.uint64)
    diff = (ab != bb).any(-1)
    count = int(diff.sum())
    if count == 0:
        return ImageDiff(0, 0.0, None)
    with np.errstate(invalid="ignore"):
        err = np.abs(a - b).max(-1)
    max_err = float(np.nanmax(np.where(diff, err, 0.0))) if np.isfinite(err[diff]).any() else math.inf
    y, x = np.argwhere(diff)[0]
    return ImageDiff(count, max_err, (int(x), int(y)))
