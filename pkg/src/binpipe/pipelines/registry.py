"""Named phase functions, so pipeline description files can refer to them."""
from __future__ import annotations

from typing import Callable

from . import raster, reyes, testgraphs

PROCESS: dict[str, Callable] = {
    "vertex_shader": raster.vertex_shader,
    "rasterizer": raster.rasterizer,
    "fragment_shader": raster.fragment_shader,
    "depth_test": raster.depth_test,
    "gbuffer": raster.gbuffer,
    "composite": raster.composite,
    "split": reyes.split,
    "dice": reyes.dice,
    "sample": reyes.sample,
    "shade": reyes.shade,
    "passthrough": testgraphs.passthrough,
    "sink": testgraphs.sink,
}

ASSIGN: dict[str, Callable] = {
    "round_robin": raster.round_robin,
}


def register_process(name: str, fn: Callable) -> None:
    PROCESS[name] = fn


def register_assign(name: str, fn: Callable) -> None:
    ASSIGN[name] = fn


def name_of(fn: Callable, table: dict[str, Callable]) -> str:
    for k, v in table.items():
        if v is fn:
            return k
    raise KeyError(f"{getattr(fn, '__name__', fn)!r} is not registered")


def lookup(name: str, table: dict[str, Callable], what: str) -> Callable:
    try:
        return table[name]
    except KeyError:
        raise KeyError(f"unknown {what} function {name!r}; known: {', '.join(sorted(table))}") from None
