"""Bicubic Bezier patch math: evaluation, de Casteljau bisection, screen extents.

Control points are stored row-major, ``cp[4 * row + col]``, with ``col``
running along u and ``row`` along v. All functions vectorize over a leading
patch axis and fix the order of every floating-point operation, so the
scalar oracle can replay them exactly.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import Projector, project

SPLIT_THRESHOLD_PX = 16.0
DICE_RATE_PX = 1.0
DICE_TOLERANCE = 0.5
MAX_DICE = 64


def bernstein(t):
    s = 1.0 - t
    return (s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t)


def evaluate(cp, u, v):
    """Surface point(s).

    ``cp`` is (16, 3) or (n, 16, 3); ``u`` and ``v`` broadcast against the
    result's leading axes. Returns x, y, z.
    """
    bu = bernstein(u)
    bv = bernstein(v)
    out = []
    for c in range(3):
        acc = None
        for row in range(4):
            for col in range(4):
                w = bv[row] * bu[col]
                term = w * cp[..., 4 * row + col, c]
                acc = term if acc is None else acc + term
        out.append(acc)
    return out[0], out[1], out[2]


def evaluate_grid(cp: np.ndarray, n: int):
    """Evaluate (m, 16, 3) patches on an (n+1) x (n+1) grid of local parameters.

    Returns x, y, z arrays of shape (m, n+1, n+1), indexed [patch, v, u].
    """
    t = np.arange(n + 1, dtype=np.float64) / float(n)
    u = t[None, None, :]
    v = t[None, :, None]
    c = cp[:, None, None, :, :]
    return evaluate(c, u, v)


def _mid(a, b):
    return (a + b) * 0.5


def _bisect_curve(p0, p1, p2, p3):
    m01 = _mid(p0, p1)
    m12 = _mid(p1, p2)
    m23 = _mid(p2, p3)
    m012 = _mid(m01, m12)
    m123 = _mid(m12, m23)
    m = _mid(m012, m123)
    return (p0, m01, m012, m), (m, m123, m23, p3)


def _bisect_dir(cp: np.ndarray, along_u: bool):
    lo = np.empty_like(cp)
    hi = np.empty_like(cp)
    for k in range(4):
        # row k for a u split, column k for a v split
        idx = [4 * k + j for j in range(4)] if along_u else [4 * j + k for j in range(4)]
        a, b = _bisect_curve(*(cp[..., i, :] for i in idx))
        for j in range(4):
            lo[..., idx[j], :] = a[j]
            hi[..., idx[j], :] = b[j]
    return lo, hi


def bisect(cp: np.ndarray, along_u):
    """Split (..., 16, 3) patches at the parametric midpoint.

    ``along_u`` is a bool array (or scalar); True halves the u range.
    Returns the (low, high) child control nets.
    """
    cp = np.asarray(cp, dtype=np.float64)
    lo_u, hi_u = _bisect_dir(cp, True)
    lo_v, hi_v = _bisect_dir(cp, False)
    m = np.asarray(along_u, dtype=bool)[..., None, None]
    return np.where(m, lo_u, lo_v), np.where(m, hi_u, hi_v)


def project_control(pr: Projector, cp: np.ndarray):
    """Screen x, y and w of the control points; shapes (m, 16)."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sx, sy, _, _, cw = project(pr, cp[..., 0], cp[..., 1], cp[..., 2])
    return sx, sy, cw


def screen_extent(sx, sy):
    """Longer side of the screen bounding box over the last axis."""
    return np.maximum(sx.max(-1) - sx.min(-1), sy.max(-1) - sy.min(-1))


def polygon_lengths(sx, sy):
    """Longest control-polygon row (u) and column (v) lengths, in pixels."""
    def seg(i, j):
        dx = sx[..., j] - sx[..., i]
        dy = sy[..., j] - sy[..., i]
        return np.sqrt(dx * dx + dy * dy)

    lu = None
    lv = None
    for k in range(4):
        ru = (seg(4 * k, 4 * k + 1) + seg(4 * k + 1, 4 * k + 2)) + seg(4 * k + 2, 4 * k + 3)
        rv = (seg(k, k + 4) + seg(k + 4, k + 8)) + seg(k + 8, k + 12)
        lu = ru if lu is None else np.maximum(lu, ru)
        lv = rv if lv is None else np.maximum(lv, rv)
    return lu, lv


def split_decision(pr: Projector, cp: np.ndarray, depth: np.ndarray, cap: int,
                   threshold: float = SPLIT_THRESHOLD_PX):
    """Which patches to bisect, and along which parametric direction.

    A patch whose control points reach behind the camera counts as
    arbitrarily large.
    """
    sx, sy, cw = project_control(pr, cp)
    visible = (cw > 1e-6).all(-1)
    with np.errstate(invalid="ignore"):
        ext = np.where(visible, screen_extent(sx, sy), np.inf)
        lu, lv = polygon_lengths(sx, sy)
    split = (ext > threshold) & (depth < cap)
    along_u = np.where(visible, lu >= lv, True)
    return split, along_u


def initial_dice_n(ext: float, rate: float = DICE_RATE_PX) -> int:
    if not math.isfinite(ext):
        return MAX_DICE
    return min(MAX_DICE, max(1, math.ceil(ext / rate)))


def refined_dice_n(n: int, worst: float, rate: float = DICE_RATE_PX) -> int:
    return min(MAX_DICE, max(n + 1, math.ceil(n * worst / rate)))
