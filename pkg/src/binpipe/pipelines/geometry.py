"""Camera, projection and snapping.

Every function here accepts Python floats or numpy arrays and evaluates the
same IEEE operations in the same order either way, so the vectorized stages
and the scalar oracle produce identical bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..primitives import GUARD_PX, SUBPIXEL, TRI

W_EPS = 1e-6


@dataclass(frozen=True)
class Camera:
    eye: tuple[float, float, float] = (0.0, 0.0, 3.0)
    target: tuple[float, float, float] = (0.0, 0.0, 0.0)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    fov_y: float = 60.0
    near: float = 0.1
    far: float = 100.0

    def basis(self):
        """Right, up and backward unit vectors of the view frame."""
        f = _normalize(tuple(self.eye[i] - self.target[i] for i in range(3)))
        r = _normalize(_cross(self.up, f))
        u = _cross(f, r)
        return r, u, f

    def pixels_per_unit(self, screen, distance: float) -> float:
        return screen[1] / (2.0 * distance * math.tan(math.radians(self.fov_y) / 2.0))


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _normalize(v):
    n = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    return (v[0] / n, v[1] / n, v[2] / n)


@dataclass(frozen=True)
class Projector:
    """Precomputed view-projection-viewport constants as plain floats."""

    r: tuple[float, float, float]
    u: tuple[float, float, float]
    f: tuple[float, float, float]
    eye: tuple[float, float, float]
    sx: float
    sy: float
    za: float
    zb: float
    width: float
    height: float

    @classmethod
    def make(cls, camera: Camera, screen) -> "Projector":
        r, u, f = camera.basis()
        t = 1.0 / math.tan(math.radians(camera.fov_y) / 2.0)
        aspect = screen[0] / screen[1]
        n, fa = camera.near, camera.far
        return cls(r, u, f, tuple(float(e) for e in camera.eye), t / aspect, t,
                   (fa + n) / (n - fa), 2.0 * fa * n / (n - fa),
                   float(screen[0]), float(screen[1]))


def project(pr: Projector, x, y, z):
    """World point to (screen x, screen y, depth in [0,1] when visible, 1/w, w).

    Screen y grows downward. Points with ``w <= W_EPS`` are behind the near
    region; callers cull them.
    """
    dx = x - pr.eye[0]
    dy = y - pr.eye[1]
    dz = z - pr.eye[2]
    vx = (pr.r[0] * dx + pr.r[1] * dy) + pr.r[2] * dz
    vy = (pr.u[0] * dx + pr.u[1] * dy) + pr.u[2] * dz
    vz = (pr.f[0] * dx + pr.f[1] * dy) + pr.f[2] * dz
    cw = -vz
    cx = pr.sx * vx
    cy = pr.sy * vy
    cz = pr.za * vz + pr.zb
    iw = 1.0 / cw
    sx = (cx * iw * 0.5 + 0.5) * pr.width
    sy = (0.5 - cy * iw * 0.5) * pr.height
    depth = cz * iw * 0.5 + 0.5
    return sx, sy, depth, iw, cw


def snap(v):
    """Continuous pixel coordinate to fixed point, rounding half to even."""
    if isinstance(v, np.ndarray):
        return np.rint(v * SUBPIXEL).astype(np.int64)
    return int(round(v * SUBPIXEL))


def vertex_ok(sx, sy, cw):
    """Near-plane and guard-band test (scalar or array)."""
    if isinstance(cw, np.ndarray):
        with np.errstate(invalid="ignore"):
            return (cw > W_EPS) & (np.abs(sx) <= GUARD_PX) & (np.abs(sy) <= GUARD_PX)
    return cw > W_EPS and abs(sx) <= GUARD_PX and abs(sy) <= GUARD_PX


def vertex_shade(objtris: np.ndarray, pr: Projector) -> np.ndarray:
    """Transform object-space triangles into snapped screen triangles.

    Triangles with any vertex failing :func:`vertex_ok` or with zero snapped
    area are dropped; there is no clipping.
    """
    n = len(objtris)
    out = np.zeros(n, dtype=TRI)
    keep = np.ones(n, dtype=bool)
    p = objtris["p"]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(3):
            sx, sy, depth, iw, cw = project(pr, p[:, k, 0], p[:, k, 1], p[:, k, 2])
            ok = vertex_ok(sx, sy, cw)
            keep &= ok
            out[f"X{k}"] = np.where(ok, snap(np.where(ok, sx, 0.0)), 0)
            out[f"Y{k}"] = np.where(ok, snap(np.where(ok, sy, 0.0)), 0)
            out[f"z{k}"] = depth
            out[f"iw{k}"] = iw
            for c, name in enumerate("xyz"):
                out[f"n{k}{name}"] = objtris["n"][:, k, c]
    out["prim"] = objtris["prim"]
    area = edge(out["X0"], out["Y0"], out["X1"], out["Y1"], out["X2"], out["Y2"])
    keep &= area != 0
    return out[keep]


def edge(ax, ay, bx, by, px, py):
    """Twice the signed area of (a, b, p) on fixed-point coordinates."""
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


def top_left(ax, ay, bx, by):
    """Whether edge a->b owns pixel centres lying exactly on it."""
    dx = bx - ax
    dy = by - ay
    return (dy < 0) | ((dy == 0) & (dx > 0))


def face_normals(p: np.ndarray) -> np.ndarray:
    """Unit normals of triangles given as an (n, 3, 3) vertex array."""
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    c = np.stack([
        e1[:, 1] * e2[:, 2] - e1[:, 2] * e2[:, 1],
        e1[:, 2] * e2[:, 0] - e1[:, 0] * e2[:, 2],
        e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0],
    ], axis=1)
    ln = np.sqrt((c[:, 0] * c[:, 0] + c[:, 1] * c[:, 1]) + c[:, 2] * c[:, 2])
    ln[ln == 0] = 1.0
    return c / ln[:, None]
