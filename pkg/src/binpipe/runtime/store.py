"""Per-stage bin stores."""
from __future__ import annotations

import numpy as np


def concat(batches: list[np.ndarray]) -> np.ndarray:
    if len(batches) == 1:
        return batches[0]
    return np.concatenate(batches)


class BinStore:
    """One append-only batch list per bin.

    ``list.append`` is atomic under the interpreter lock, so producers on
    different workers may append concurrently. :meth:`take` swaps the lists
    out and is only called by the orchestrator between dispatches, which
    double-buffers self-loops: a kernel's own emits land in fresh lists.
    """

    def __init__(self, stage: str, nbins: int):
        self.stage = stage
        self.bins: list[list[np.ndarray]] = [[] for _ in range(nbins)]

    def __len__(self):
        return len(self.bins)

    def append(self, bin_id: int, batch: np.ndarray) -> None:
        self.bins[bin_id].append(batch)

    def nonempty(self) -> bool:
        return any(self.bins)

    def count(self) -> int:
        return sum(len(b) for lst in self.bins for b in lst)

    def take(self, only=None) -> list[tuple[int, np.ndarray]]:
        """Remove and return ``(bin, batch)`` for every non-empty bin, ascending."""
        ids = range(len(self.bins)) if only is None else sorted(only)
        out = []
        for b in ids:
            lst = self.bins[b]
            if not lst:
                continue
            self.bins[b] = []
            batch = concat(lst)
            if len(batch):
                out.append((b, batch))
        return out
