"""Binary PPM (P6) output."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def quantize(img: np.ndarray) -> np.ndarray:
    """Float RGB in [0, 1] to uint8 with round-half-up."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path, img: np.ndarray) -> None:
    q = quantize(img)
    h, w, _ = q.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + q.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError(f"{path}: only 8-bit P6 is supported")
    w, h = int(fields[1]), int(fields[2])
    pix = data[pos + 1:pos + 1 + w * h * 3]
    if len(pix) != w * h * 3:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(pix, dtype=np.uint8).reshape(h, w, 3)
