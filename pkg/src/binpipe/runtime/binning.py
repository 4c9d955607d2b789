"""AssignBin routines: map a batch of primitives to (primitive, bin) pairs."""
from __future__ import annotations

import math

import numpy as np

from ..graph import bin_grid


def bbox_bins(xmin, ymin, xmax, ymax, bin_size, screen):
    """Bins whose closed rectangle intersects each closed bounding box.

    Returns ``(prim_idx, bins)`` sorted by primitive then bin id. Bin
    rectangles at the right and bottom screen edges are clipped to the screen.
    """
    bw, bh = bin_size
    nx, ny = bin_grid(bin_size, screen)
    xmin = np.asarray(xmin, dtype=np.float64)
    ymin = np.asarray(ymin, dtype=np.float64)
    xmax = np.asarray(xmax, dtype=np.float64)
    ymax = np.asarray(ymax, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        bx0 = np.maximum(_lowest(xmin, bw), 0)
        by0 = np.maximum(_lowest(ymin, bh), 0)
        bx1 = np.minimum(_highest(xmax, bw), nx - 1)
        by1 = np.minimum(_highest(ymax, bh), ny - 1)
    # the clipped last bin ends at the screen edge, not at a bin multiple
    bx0 = np.where(xmin > screen[0], nx, bx0)
    by0 = np.where(ymin > screen[1], ny, by0)
    with np.errstate(invalid="ignore"):
        bad = ~(np.isfinite(xmin) & np.isfinite(ymin) & np.isfinite(xmax) & np.isfinite(ymax))
    cw = np.where(bad, 0, np.maximum(bx1 - bx0 + 1, 0)).astype(np.int64)
    ch = np.where(bad, 0, np.maximum(by1 - by0 + 1, 0)).astype(np.int64)
    counts = cw * ch
    prim = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    if len(prim) == 0:
        return prim, prim.copy()
    off = np.arange(len(prim), dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    w = cw[prim]
    bx = bx0[prim].astype(np.int64) + off % w
    by = by0[prim].astype(np.int64) + off // w
    return prim, by * nx + bx


def _lowest(lo, size):
    # smallest b with (b + 1) * size >= lo; the division may round, so fix up
    b = np.ceil(lo / size) - 1
    b = np.where((b + 1) * size < lo, b + 1, b)
    return np.where(b * size >= lo, b - 1, b)


def _highest(hi, size):
    # largest b with b * size <= hi
    b = np.floor(hi / size)
    b = np.where((b + 1) * size <= hi, b + 1, b)
    return np.where(b * size > hi, b - 1, b)


def bin_at(x: int, y: int, bin_size, screen) -> int:
    nx, _ = bin_grid(bin_size, screen)
    return (y // bin_size[1]) * nx + (x // bin_size[0])


def round_robin_bins(n: int, nbins: int, offset: int) -> np.ndarray:
    return (offset + np.arange(n, dtype=np.int64)) % nbins


def group_by_bin(batch: np.ndarray, prim_idx: np.ndarray, bins: np.ndarray):
    """Split a batch into per-bin sub-batches, keeping input order inside each bin."""
    if len(bins) == 0:
        return []
    order = np.argsort(bins, kind="stable")
    sb = bins[order]
    cuts = np.flatnonzero(sb[1:] != sb[:-1]) + 1
    out = []
    for seg in np.split(order, cuts):
        out.append((int(bins[seg[0]]), batch[prim_idx[seg]]))
    return out


def grid_size(bin_size, screen) -> int:
    nx, ny = bin_grid(bin_size, screen)
    return nx * ny


def ceil_chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(s, min(s + size, n)) for s in range(0, n, size)] if n else []


def even_chunk(n: int, workers: int) -> int:
    return max(1, math.ceil(n / workers))
