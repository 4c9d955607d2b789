"""Diffuse shading shared by the stages, the kernels and the oracle."""
from __future__ import annotations

import math

import numpy as np

MATERIAL = (0.80, 0.75, 0.65)
# each component of normalize(1, 1, 1)
LIGHT = 1.0 / math.sqrt(3.0)
BACKGROUND = (0.05, 0.05, 0.08)


def diffuse(nx, ny, nz):
    """Clamped n.l for a light along (1, 1, 1); zero for a zero normal.

    Works elementwise on arrays and on plain floats with identical rounding.
    """
    if isinstance(nx, np.ndarray):
        ln = np.sqrt((nx * nx + ny * ny) + nz * nz)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = ((nx / ln) * LIGHT + (ny / ln) * LIGHT) + (nz / ln) * LIGHT
        d = np.where(ln == 0.0, 0.0, d)
        return np.where(d > 0.0, d, 0.0)
    ln = math.sqrt((nx * nx + ny * ny) + nz * nz)
    if ln == 0.0:
        return 0.0
    d = ((nx / ln) * LIGHT + (ny / ln) * LIGHT) + (nz / ln) * LIGHT
    return d if d > 0.0 else 0.0


def shade_color(nx, ny, nz):
    d = diffuse(nx, ny, nz)
    return (MATERIAL[0] * d, MATERIAL[1] * d, MATERIAL[2] * d)
