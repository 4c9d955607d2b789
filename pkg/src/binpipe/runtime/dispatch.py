"""Work-unit dispatch over a fixed worker pool."""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .binning import ceil_chunks, even_chunk


@dataclass(frozen=True)
class WorkUnit:
    kernel: int
    bin: int
    chunk: tuple[int, int] | None = None
    batch: np.ndarray = field(default=None, compare=False, repr=False)


class Pool:
    """``spread(fn)`` calls ``fn(worker)`` once per worker and waits for all."""

    def __init__(self, workers: int):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self._ex = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def spread(self, fn: Callable[[int], None]) -> None:
        if self._ex is None:
            fn(0)
            return
        futures = [self._ex.submit(fn, w) for w in range(self.workers)]
        first = None
        for f in futures:
            exc = f.exception()
            if exc is not None and first is None:
                first = exc
        if first is not None:
            raise first

    def close(self) -> None:
        if self._ex is not None:
            self._ex.shutdown(wait=True)
            self._ex = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


RunFn = Callable[[WorkUnit, int], None]


def dispatch_load_balance(units: list[WorkUnit], pool: Pool, run: RunFn) -> None:
    """Workers claim units from one shared queue until it is empty."""
    if not units:
        return
    lock = threading.Lock()
    it = iter(units)
    stop = threading.Event()

    def worker(w: int) -> None:
        while not stop.is_set():
            with lock:
                u = next(it, None)
            if u is None:
                return
            try:
                run(u, w)
            except BaseException:
                stop.set()
                raise

    pool.spread(worker)


def prescheduled_lists(units: list[WorkUnit], workers: int, serialize: bool = False) -> list[list[WorkUnit]]:
    """Static map: worker ``bin % workers`` (or worker 0), ascending bin order."""
    lists: list[list[WorkUnit]] = [[] for _ in range(workers)]
    for u in sorted(units, key=lambda u: (u.bin, u.chunk or (0, 0))):
        lists[0 if serialize else u.bin % workers].append(u)
    return lists


def dispatch_prescheduled(units: list[WorkUnit], pool: Pool, run: RunFn, serialize: bool = False) -> None:
    if not units:
        return
    lists = prescheduled_lists(units, pool.workers, serialize)

    def worker(w: int) -> None:
        for u in lists[w]:
            run(u, w)

    if serialize:
        worker(0)
    else:
        pool.spread(worker)


def split_units(kernel: int, bin_id: int, batch: np.ndarray, size: int | None, workers: int) -> list[WorkUnit]:
    """Chunks of at most ``size`` consecutive primitives (even split when None)."""
    step = size if size else even_chunk(len(batch), workers)
    return [WorkUnit(kernel, bin_id, (a, b), batch[a:b]) for a, b in ceil_chunks(len(batch), step)]


def dispatch_split_all(bins: list[tuple[int, list[WorkUnit]]], pool: Pool, run: RunFn) -> None:
    """One bin at a time in ascending order; its chunks run concurrently."""
    for _, chunks in sorted(bins, key=lambda t: t[0]):
        dispatch_load_balance(chunks, pool, run)
