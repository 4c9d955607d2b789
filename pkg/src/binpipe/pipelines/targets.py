"""Render targets: the depth/primitive record and the framebuffer."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..primitives import NO_PRIM
from .shading import BACKGROUND, MATERIAL, diffuse

MODES = ("forward", "deferred", "resolve")


class RenderTargets:
    """Per-pixel record of the nearest fragment plus the output image.

    ``forward``: the payload holds shaded colour and Composite copies it out.
    ``deferred``: the payload holds the normal and Composite shades it.
    ``resolve``: nothing composites; :meth:`finish` copies every covered
    pixel's colour to the framebuffer after the run.
    """

    def __init__(self, screen, mode: str = "forward", fault: str | None = None, concurrent: bool = True):
        if mode not in MODES:
            raise ValueError(f"unknown target mode {mode!r}")
        w, h = screen
        self.screen = (w, h)
        self.mode = mode
        self.fault = fault
        self.depth = np.full((h, w), np.inf)
        self.prim = np.full((h, w), NO_PRIM, dtype=np.int64)
        self.payload = np.zeros((h, w, 3))
        self.fb = np.empty((h, w, 3))
        self.fb[...] = BACKGROUND
        self.lock = kernels.MergeLock(h) if concurrent else None

    def merge(self, frags: np.ndarray, store_normal: bool = False) -> np.ndarray:
        """Depth-merge a fragment batch; returns the mask of fragments that won."""
        if self.fault == "skew-depth" and len(frags):
            # deliberately wrong depth for odd primitives, for testing the verifier
            frags = frags.copy()
            odd = (frags["prim"] & 1) == 1
            frags["depth"] = np.where(odd, frags["depth"] * 0.5, frags["depth"])
        return kernels.depth_merge(frags, self.depth, self.prim, self.payload, store_normal, self.lock)

    def composite(self, frags: np.ndarray) -> None:
        """Write the current record value at each fragment's pixel."""
        if len(frags) == 0:
            return
        y = frags["y"].astype(np.int64)
        x = frags["x"].astype(np.int64)
        if self.mode == "deferred":
            p = self.payload[y, x]
            d = diffuse(p[:, 0], p[:, 1], p[:, 2])
            self.fb[y, x, 0] = MATERIAL[0] * d
            self.fb[y, x, 1] = MATERIAL[1] * d
            self.fb[y, x, 2] = MATERIAL[2] * d
        else:
            self.fb[y, x] = self.payload[y, x]

    def finish(self) -> None:
        if self.mode == "resolve":
            hit = self.prim != NO_PRIM
            self.fb[hit] = self.payload[hit]

    @property
    def coverage(self) -> int:
        return int((self.prim != NO_PRIM).sum())

    def image(self) -> np.ndarray:
        return self.fb
