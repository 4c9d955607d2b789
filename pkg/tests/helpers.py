import numpy as np

from binpipe.primitives import SUBPIXEL, TRI


def tri_records(pix_tris, z=(0.5, 0.5, 0.5), prims=None, normal=(0.0, 0.0, 1.0), subpixel=False):
    """TRI records from (n, 3, 2) screen coordinates in pixels (or fixed point)."""
    a = np.asarray(pix_tris, dtype=np.float64)
    n = len(a)
    out = np.zeros(n, dtype=TRI)
    scale = 1 if subpixel else SUBPIXEL
    for k in range(3):
        out[f"X{k}"] = np.rint(a[:, k, 0] * scale).astype(np.int64)
        out[f"Y{k}"] = np.rint(a[:, k, 1] * scale).astype(np.int64)
        out[f"z{k}"] = z[k]
        out[f"iw{k}"] = 1.0
        for c, v in zip("xyz", normal):
            out[f"n{k}{c}"] = v
    out["prim"] = np.arange(n) if prims is None else prims
    return out


# acceptance outcomes, printed in the terminal summary by conftest
ACCEPTANCE: dict[str, list[tuple[str, str, str]]] = {}


def record(criterion: str, part: str, status: str, detail: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, status, detail))
    print(f"criterion {criterion} [{part}]: {status} {detail}".rstrip())
