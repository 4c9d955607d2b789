"""Multicore execution of kernel mappings."""
from .dispatch import Pool, WorkUnit
from .executor import (
    DEFAULT_CYCLE_CAP,
    DEFAULT_STRIP,
    AssignContext,
    Executor,
    LoopCapExceeded,
    PhaseError,
    StageContext,
    execute,
)
from .stats import RunStats
from .store import BinStore

__all__ = [
    "AssignContext",
    "BinStore",
    "DEFAULT_CYCLE_CAP",
    "DEFAULT_STRIP",
    "Executor",
    "LoopCapExceeded",
    "PhaseError",
    "Pool",
    "RunStats",
    "StageContext",
    "WorkUnit",
    "execute",
]
