"""Runs a kernel mapping over bin stores and a worker pool."""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .. import kernels as kernel_backend
from ..graph import AssignKind, PipelineGraph, ProcessMode, bin_rect
from ..ordering import depth_first_plan
from ..primitives import BBOX_FUNCS
from ..synthesis import DispatchMode, KernelMapping, Sync
from .binning import bbox_bins, bin_at, grid_size, group_by_bin
from .dispatch import (
    Pool,
    WorkUnit,
    dispatch_load_balance,
    dispatch_prescheduled,
    dispatch_split_all,
    split_units,
)
from .stats import RunStats, Tally, occupancy_bucket
from .store import BinStore, concat

DEFAULT_CYCLE_CAP = 32
DEFAULT_STRIP = 1 << 16


class PhaseError(RuntimeError):
    def __init__(self, stage: str, bin_id: int | None, cause: BaseException):
        where = f"stage {stage}" + (f" bin {bin_id}" if bin_id is not None else "")
        super().__init__(f"{where}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.bin_id = bin_id
        self.cause = cause


class LoopCapExceeded(RuntimeError):
    def __init__(self, stages, cap: int):
        super().__init__(f"loop over {', '.join(stages)} still has work after {cap} iterations")
        self.stages = tuple(stages)
        self.cap = cap


class StageContext:
    """What a Process phase sees: its bin, render targets, params and ``emit``."""

    __slots__ = ("stage", "bin_id", "rect", "channels", "targets", "params", "worker", "_emit")

    def __init__(self, stage, bin_id, rect, channels, targets, params, worker, emit):
        self.stage = stage
        self.bin_id = bin_id
        self.rect = rect
        self.channels = channels
        self.targets = targets
        self.params = params
        self.worker = worker
        self._emit = emit

    def emit(self, batch: np.ndarray, channel: int = 0) -> None:
        self._emit(self, batch, channel)


@dataclass
class AssignContext:
    """What a custom AssignBin routine sees."""

    stage: str
    nbins: int
    bin_size: tuple[int, int]
    screen: tuple[int, int]
    rect: tuple[int, int, int, int]
    params: Mapping[str, Any]
    _reserve: Any

    def reserve(self, n: int) -> int:
        """Claim ``n`` consecutive slots of this stage's shared round-robin counter."""
        return self._reserve(self.stage, n)


class _Unit:
    """Per-unit scratch: buffered batches waiting behind a per-bin barrier."""

    __slots__ = ("pending", "bin_id", "rect", "worker")

    def __init__(self, n, bin_id, rect, worker):
        self.pending = [[] for _ in range(n)]
        self.bin_id = bin_id
        self.rect = rect
        self.worker = worker


class Executor:
    def __init__(self, mapping: KernelMapping, *, workers: int = 1, targets: Any = None,
                 params: Mapping[str, Any] | None = None, cycle_cap: int = DEFAULT_CYCLE_CAP,
                 strip_mine: int = DEFAULT_STRIP):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        if cycle_cap < 1 or strip_mine < 1:
            raise ValueError("cycle_cap and strip_mine must be positive")
        self.m = mapping
        self.g: PipelineGraph = mapping.graph
        self.workers = workers
        self.targets = targets
        self.params = dict(self.g.params)
        self.params.update(params or {})
        self.cycle_cap = cycle_cap
        self.strip_mine = strip_mine
        self.screen = tuple(self.g.screen)
        self.stores = {s: BinStore(s, grid_size(self.g.bin_size(s), self.screen)) for s in self.g.stage_names}
        self.consumers = {s: {} for s in self.g.stage_names}
        for p, ch, c in self.g.edges:
            self.consumers[p].setdefault(ch, []).append(c)
        self.decls = {s.name: s for s in self.g.stages}
        self.tally = Tally()
        self._rr_lock = threading.Lock()
        self._rr: dict[str, int] = {}
        self._kernel_time = [0.0] * len(mapping.kernels)
        self._kernel_launches = [0] * len(mapping.kernels)
        self._loop_iters: dict[str, int] = {}
        self._units = [0, 0, 0]

    # routing

    def _reserve(self, stage: str, n: int) -> int:
        with self._rr_lock:
            off = self._rr.get(stage, 0)
            self._rr[stage] = off + n
            return off

    def route(self, consumer: str, batch: np.ndarray, rect) -> list[tuple[int, np.ndarray]]:
        """Apply ``consumer``'s AssignBin phase to a batch."""
        decl = self.decls[consumer]
        size = self.g.bin_size(consumer)
        nbins = len(self.stores[consumer])
        kind = decl.assign_bin.kind
        if kind is AssignKind.PREVIOUS_BINS:
            return [(bin_at(rect[0], rect[1], size, self.screen), batch)]
        if kind is AssignKind.ALL:
            return [(b, batch) for b in range(nbins)]
        if kind is AssignKind.BOUNDING_BOX:
            fn = BBOX_FUNCS.get(decl.input_type)
            if fn is None:
                raise PhaseError(consumer, None, TypeError(f"no bounding box for {decl.input_type!r}"))
            prim, bins = bbox_bins(*fn(batch), size, self.screen)
            return group_by_bin(batch, prim, bins)
        actx = AssignContext(consumer, nbins, size, self.screen, rect, self.params, self._reserve)
        try:
            res = decl.assign_bin.custom_fn(batch, actx)
        except Exception as exc:
            raise PhaseError(consumer, None, exc) from exc
        if isinstance(res, tuple):
            prim, bins = res
        else:
            bins = np.asarray(res, dtype=np.int64)
            prim = np.arange(len(batch), dtype=np.int64)
        prim = np.asarray(prim, dtype=np.int64)
        bins = np.asarray(bins, dtype=np.int64)
        if len(bins) and (bins.min() < 0 or bins.max() >= nbins):
            raise PhaseError(consumer, None, IndexError("custom AssignBin returned a bin outside the grid"))
        return group_by_bin(batch, prim, bins)

    def _store(self, producer: str, channel: int, consumer: str, batch, rect) -> None:
        t = self.tally
        wire = f"{producer}:{channel}->{consumer}"
        for b, sub in self.route(consumer, batch, rect):
            self.stores[consumer].append(b, sub)
            t.add("traffic", wire, len(sub))
            t.add("appended", consumer, len(sub))

    def inject(self, inputs: Mapping[str, np.ndarray]) -> None:
        full = (0, 0) + self.screen
        for s, batch in inputs.items():
            if len(batch) == 0:
                continue
            self.tally.add("injected", s, len(batch))
            for b, sub in self.route(s, batch, full):
                self.stores[s].append(b, sub)
                self.tally.add("appended", s, len(sub))

    # kernel execution

    def _run_stage(self, kidx: int, pos: int, batch: np.ndarray, unit: _Unit) -> None:
        k = self.m.kernels[kidx]
        s = k.stages[pos]
        nxt = k.stages[pos + 1] if pos + 1 < len(k.stages) else None
        local = nxt is not None and k.sync_before(nxt) is Sync.LOCAL
        decl = self.decls[s]
        nch = len(decl.output_types)
        t = self.tally
        t.add("stage_in", s, len(batch))

        def emit(ctx, out, channel):
            if not 0 <= channel < nch:
                raise PhaseError(s, unit.bin_id, ValueError(f"emit on undeclared channel {channel}"))
            if out is None or len(out) == 0:
                return
            t.add("stage_out", s, len(out))
            for c in self.consumers[s].get(channel, ()):
                if c == nxt:
                    t.add("fused_out", c, len(out))
                    if local:
                        unit.pending[pos + 1].append(out)
                    else:
                        self._run_stage(kidx, pos + 1, out, unit)
                else:
                    self._store(s, channel, c, out, unit.rect)

        ctx = StageContext(s, unit.bin_id, unit.rect, nch, self.targets, self.params, unit.worker, emit)
        if pos > 0:
            t.add("fused_in", s, len(batch))
        try:
            decl.process(batch, ctx)
        except PhaseError:
            raise
        except Exception as exc:
            raise PhaseError(s, unit.bin_id, exc) from exc

    def _run_unit(self, kidx: int, u: WorkUnit, worker: int, done: list[int], index: int) -> None:
        k = self.m.kernels[kidx]
        rect = bin_rect(u.bin, self.g.bin_size(k.head), self.screen)
        unit = _Unit(len(k.stages), u.bin, rect, worker)
        self._run_stage(kidx, 0, u.batch, unit)
        for pos in range(1, len(k.stages)):
            if unit.pending[pos]:
                self.tally.add("barriers", "local", 1)
                batch = concat(unit.pending[pos])
                unit.pending[pos] = []
                self._run_stage(kidx, pos, batch, unit)
        done[index] += 1

    def launch(self, kidx: int, only=None) -> None:
        k = self.m.kernels[kidx]
        head = k.head
        taken = self.stores[head].take(only)
        if not taken:
            return
        t0 = time.perf_counter()
        t = self.tally
        for _, batch in taken:
            t.add("consumed", head, len(batch))
            t.add(f"occupancy:{head}", occupancy_bucket(len(batch)), 1)
        mode = k.dispatch.mode
        splittable = all(self.decls[s].process_mode is ProcessMode.PER_PRIMITIVE for s in k.stages)
        pool = self._pool
        if mode is DispatchMode.SPLIT_ALL and splittable:
            per_bin = [(b, split_units(kidx, b, batch, k.dispatch.split, self.workers)) for b, batch in taken]
            units = [u for _, us in per_bin for u in us]
        else:
            units = [WorkUnit(kidx, b, None, batch) for b, batch in taken]
        done = [0] * len(units)
        index = {id(u): i for i, u in enumerate(units)}

        def run(u: WorkUnit, w: int) -> None:
            self._run_unit(kidx, u, w, done, index[id(u)])

        if mode is DispatchMode.SPLIT_ALL and splittable:
            dispatch_split_all(per_bin, pool, run)
        elif mode is DispatchMode.LOAD_BALANCE or mode is DispatchMode.SPLIT_ALL:
            dispatch_load_balance(units, pool, run)
        else:
            dispatch_prescheduled(units, pool, run, serialize=mode is DispatchMode.SERIALIZE)
        self._units[0] += len(units)
        self._units[1] += sum(done)
        self._units[2] += sum(1 for d in done if d != 1)
        t.add("barriers", "global", 1)
        self._kernel_time[kidx] += time.perf_counter() - t0
        self._kernel_launches[kidx] += 1

    def _run_loop(self, ks: list[int]) -> None:
        stages = [s for i in ks for s in self.m.kernels[i].stages]
        iters = 0
        while any(self.stores[s].nonempty() for s in stages):
            if iters == self.cycle_cap:
                raise LoopCapExceeded(stages, self.cycle_cap)
            for i in ks:
                self.launch(i)
            iters += 1
        key = "+".join(stages)
        self._loop_iters[key] = max(self._loop_iters.get(key, 0), iters)

    def _run_group(self, ks: list[int]) -> None:
        heads = [self.m.kernels[i].head for i in ks]
        sizes = {h: self.g.bin_size(h) for h in heads}
        plan = depth_first_plan(heads, sizes, self.screen)
        by_head = dict(zip(heads, ks))
        j = 0
        while j < len(plan):
            stage = plan[j][0]
            bins = []
            while j < len(plan) and plan[j][0] == stage:
                bins.append(plan[j][1])
                j += 1
            self.launch(by_head[stage], bins)
        # primitives that reached a bin after its slot in the sweep
        for i in ks:
            self.launch(i)

    def _run_kernels(self) -> None:
        ks = self.m.kernels
        i = 0
        while i < len(ks):
            k = ks[i]
            if k.loop is not None or k.group is not None:
                attr = "loop" if k.loop is not None else "group"
                j = i
                while j < len(ks) and getattr(ks[j], attr) == getattr(k, attr):
                    j += 1
                members = list(range(i, j))
                if attr == "loop":
                    self._run_loop(members)
                else:
                    self._run_group(members)
                i = j
            else:
                self.launch(i)
                i += 1

    def run(self, inputs) -> tuple[Any, RunStats]:
        if not isinstance(inputs, Mapping):
            sources = self.g.sources
            if len(sources) != 1:
                raise ValueError(f"pipeline has sources {sources}; pass a mapping")
            inputs = {sources[0]: inputs}
        for s in inputs:
            if s not in self.g.sources:
                raise ValueError(f"{s!r} is not a source stage")
        n = max((len(v) for v in inputs.values()), default=0)
        strips = max(1, -(-n // self.strip_mine))
        t0 = time.perf_counter()
        with Pool(self.workers) as pool:
            self._pool = pool
            for k in range(strips):
                a, b = k * self.strip_mine, (k + 1) * self.strip_mine
                self.inject({s: v[a:b] for s, v in inputs.items()})
                self._run_kernels()
        if self.targets is not None and hasattr(self.targets, "finish"):
            self.targets.finish()
        return self.targets, self._stats(strips, time.perf_counter() - t0)

    def _stats(self, strips: int, seconds: float) -> RunStats:
        t = self.tally
        st = RunStats(backend=kernel_backend.BACKEND, workers=self.workers, strips=strips,
                      total_seconds=seconds)
        for i, k in enumerate(self.m.kernels):
            st.kernels.append({
                "index": i,
                "stages": list(k.stages),
                "dispatch": str(k.dispatch),
                "entry_sync": k.entry_sync.value,
                "launches": self._kernel_launches[i],
                "seconds": self._kernel_time[i],
            })
        st.stage_in = t.table("stage_in")
        st.stage_out = t.table("stage_out")
        st.traffic = {w.counter: 0 for w in self.m.wiring}
        st.traffic.update(t.table("traffic"))
        st.injected = t.table("injected")
        st.appended = t.table("appended")
        st.consumed = t.table("consumed")
        st.fused_in = t.table("fused_in")
        st.fused_out = t.table("fused_out")
        st.barriers = t.table("barriers")
        st.occupancy = {s: t.table(f"occupancy:{s}") for s in self.g.stage_names
                        if t.counts.get(f"occupancy:{s}")}
        st.loop_iterations = dict(self._loop_iters)
        st.units_generated, st.units_completed, st.units_not_once = self._units
        st.leftover = {s: self.stores[s].count() for s in self.g.stage_names if self.stores[s].nonempty()}
        st.threads_per_bin = {s.name: s.bin_config.threads_per_bin for s in self.g.stages}
        return st


def execute(mapping: KernelMapping, inputs, *, workers: int = 1, targets: Any = None,
            params: Mapping[str, Any] | None = None, cycle_cap: int = DEFAULT_CYCLE_CAP,
            strip_mine: int = DEFAULT_STRIP) -> tuple[Any, RunStats]:
    """Run ``mapping`` on ``inputs`` (an array for the single source, or a mapping)."""
    ex = Executor(mapping, workers=workers, targets=targets, params=params,
                  cycle_cap=cycle_cap, strip_mine=strip_mine)
    return ex.run(inputs)
