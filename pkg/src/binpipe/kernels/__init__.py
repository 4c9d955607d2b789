"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; ``BINPIPE_BACKEND=python``
forces the fallback. Call the kernels through this module (``kernels.shade``)
so :func:`set_backend` takes effect everywhere.
"""
from __future__ import annotations

import importlib
import os

from . import _fallback

_BACKENDS = {"python": _fallback}
try:
    _BACKENDS["native"] = importlib.import_module("._native", __name__)
except ImportError:  # extension not built
    pass

KERNELS = ("rasterize", "shade", "depth_merge", "MergeLock")


def available() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def load(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {available()}") from None


def set_backend(name: str) -> str:
    mod = load(name)
    g = globals()
    for k in KERNELS:
        g[k] = getattr(mod, k)
    g["BACKEND"] = name
    return name


BACKEND = ""
_want = os.environ.get("BINPIPE_BACKEND", "").strip().lower()
if _want:
    set_backend(_want)
else:
    set_backend("native" if "native" in _BACKENDS else "python")
