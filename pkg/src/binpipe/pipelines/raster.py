"""Process phases of the triangle rasterization pipelines."""
from __future__ import annotations

import numpy as np

from .. import kernels
from .geometry import vertex_shade


def round_robin(batch: np.ndarray, actx) -> np.ndarray:
    """Custom AssignBin: consecutive primitives to consecutive bins."""
    off = actx.reserve(len(batch))
    return (off + np.arange(len(batch), dtype=np.int64)) % actx.nbins


def vertex_shader(batch, ctx):
    ctx.emit(vertex_shade(batch, ctx.params["projector"]))


def rasterizer(batch, ctx):
    x0, y0, x1, y1 = ctx.rect
    ctx.emit(kernels.rasterize(batch, x0, y0, x1, y1, False))


def fragment_shader(batch, ctx):
    # batches can be shared between bins (AssignToAll), so never shade in place
    frags = batch.copy()
    kernels.shade(frags, int(ctx.params.get("shader_cost", 0)))
    ctx.emit(frags)


def depth_test(batch, ctx):
    won = ctx.targets.merge(batch, store_normal=False)
    ctx.emit(batch[won])


def gbuffer(batch, ctx):
    won = ctx.targets.merge(batch, store_normal=True)
    ctx.emit(batch[won])


def composite(batch, ctx):
    ctx.targets.composite(batch)
