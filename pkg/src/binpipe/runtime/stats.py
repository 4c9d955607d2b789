"""Run statistics collected by the executor."""
from __future__ import annotations

import json
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field


def occupancy_bucket(n: int) -> str:
    """Power-of-two bucket label for a bin holding ``n`` primitives."""
    if n <= 1:
        return str(n)
    lo = 1 << (n.bit_length() - 1)
    return f"{lo}-{2 * lo - 1}"


@dataclass
class RunStats:
    backend: str = ""
    workers: int = 1
    kernels: list[dict] = field(default_factory=list)
    stage_in: dict[str, int] = field(default_factory=dict)
    stage_out: dict[str, int] = field(default_factory=dict)
    traffic: dict[str, int] = field(default_factory=dict)
    injected: dict[str, int] = field(default_factory=dict)
    occupancy: dict[str, dict[str, int]] = field(default_factory=dict)
    loop_iterations: dict[str, int] = field(default_factory=dict)
    units_generated: int = 0
    units_completed: int = 0
    units_not_once: int = 0
    appended: dict[str, int] = field(default_factory=dict)
    consumed: dict[str, int] = field(default_factory=dict)
    fused_in: dict[str, int] = field(default_factory=dict)
    fused_out: dict[str, int] = field(default_factory=dict)
    leftover: dict[str, int] = field(default_factory=dict)
    barriers: dict[str, int] = field(default_factory=dict)
    threads_per_bin: dict[str, int] = field(default_factory=dict)
    strips: int = 0
    total_seconds: float = 0.0

    @property
    def exactly_once(self) -> bool:
        return self.units_not_once == 0 and self.units_generated == self.units_completed

    @property
    def conserved(self) -> bool:
        """Every primitive written to a bin store or passed across a fused edge was consumed."""
        stages = set(self.appended) | set(self.consumed) | set(self.fused_in) | set(self.fused_out)
        return (all(self.appended.get(s, 0) == self.consumed.get(s, 0) for s in stages)
                and all(self.fused_in.get(s, 0) == self.fused_out.get(s, 0) for s in stages)
                and not any(self.leftover.values()))

    @property
    def inter_stage_traffic(self) -> int:
        return sum(self.traffic.values())

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "workers": self.workers,
            "total_seconds": self.total_seconds,
            "strips": self.strips,
            "kernels": self.kernels,
            "stage_in": self.stage_in,
            "stage_out": self.stage_out,
            "traffic": self.traffic,
            "inter_stage_traffic": self.inter_stage_traffic,
            "injected": self.injected,
            "occupancy": self.occupancy,
            "loop_iterations": self.loop_iterations,
            "barriers": self.barriers,
            "units": {
                "generated": self.units_generated,
                "completed": self.units_completed,
                "not_exactly_once": self.units_not_once,
                "exactly_once": self.exactly_once,
            },
            "conservation": {
                "appended": self.appended,
                "consumed": self.consumed,
                "fused_in": self.fused_in,
                "fused_out": self.fused_out,
                "leftover": self.leftover,
                "ok": self.conserved,
            },
            "threads_per_bin": self.threads_per_bin,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class Tally:
    """Thread-safe named counters; flushed into a RunStats at the end."""

    def __init__(self):
        self._lock = threading.Lock()
        self.counts: dict[str, Counter] = defaultdict(Counter)

    def add(self, table: str, key: str, n: int = 1) -> None:
        with self._lock:
            self.counts[table][key] += n

    def table(self, name: str) -> dict[str, int]:
        return dict(sorted(self.counts[name].items()))
