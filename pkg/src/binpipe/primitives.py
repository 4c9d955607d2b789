"""Primitive record layouts shared by stages, kernels and the oracle.

Screen positions are fixed point: one pixel is ``SUBPIXEL`` units, so the
rasterizer's edge functions are exact integer arithmetic.
"""
from __future__ import annotations

import numpy as np

SUBPIXEL = 256
# pixel centres sit half a pixel into the cell
HALF = SUBPIXEL // 2
# vertices beyond this many pixels from the origin are culled instead of snapped
GUARD_PX = 65536.0
NO_PRIM = np.iinfo(np.int64).max

OBJTRI = np.dtype([("p", "<f8", (3, 3)), ("n", "<f8", (3, 3)), ("prim", "<i8")])

TRI = np.dtype(
    [(f, "<i8") for f in ("X0", "Y0", "X1", "Y1", "X2", "Y2")]
    + [(f, "<f8") for f in ("z0", "z1", "z2", "iw0", "iw1", "iw2")]
    + [(f"n{i}{c}", "<f8") for i in range(3) for c in "xyz"]
    + [("prim", "<i8")]
)

FRAG = np.dtype([
    ("x", "<i4"), ("y", "<i4"), ("depth", "<f8"),
    ("nx", "<f8"), ("ny", "<f8"), ("nz", "<f8"),
    ("r", "<f8"), ("g", "<f8"), ("b", "<f8"),
    ("prim", "<i8"),
])

PATCH = np.dtype([
    ("cp", "<f8", (16, 3)),
    ("u0", "<f8"), ("u1", "<f8"), ("v0", "<f8"), ("v1", "<f8"),
    ("depth", "<i4"), ("path", "<i8"), ("patch", "<i8"),
])

MICROPOLY = np.dtype([
    ("X", "<i8", (4,)), ("Y", "<i8", (4,)),
    ("depth", "<f8"), ("nx", "<f8"), ("ny", "<f8"), ("nz", "<f8"),
    ("prim", "<i8"),
])


def _tri_bbox(t):
    xs = np.stack([t["X0"], t["X1"], t["X2"]])
    ys = np.stack([t["Y0"], t["Y1"], t["Y2"]])
    s = float(SUBPIXEL)
    return xs.min(0) / s, ys.min(0) / s, xs.max(0) / s, ys.max(0) / s


def _frag_bbox(f):
    x = f["x"] + 0.5
    y = f["y"] + 0.5
    return x, y, x, y


def _mp_bbox(m):
    s = float(SUBPIXEL)
    return m["X"].min(1) / s, m["Y"].min(1) / s, m["X"].max(1) / s, m["Y"].max(1) / s


# continuous pixel-space bounding boxes, used by AssignToBoundingBox
BBOX_FUNCS = {
    "triangle": _tri_bbox,
    "fragment": _frag_bbox,
    "micropolygon": _mp_bbox,
}


def register_bbox(type_name: str, fn) -> None:
    BBOX_FUNCS[type_name] = fn


def empty(dtype) -> np.ndarray:
    return np.zeros(0, dtype=dtype)
