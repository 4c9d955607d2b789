"""Built-in scenes, procedural generators and small file loaders."""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..primitives import OBJTRI, PATCH
from .geometry import Camera, face_normals
from .reyes import make_patches

DEFAULT_CAMERA = Camera()


@dataclass
class Scene:
    kind: str  # "triangles" or "patches"
    prims: np.ndarray
    camera: Camera = DEFAULT_CAMERA
    name: str = ""

    def __len__(self):
        return len(self.prims)


def _tris(p: np.ndarray, n: np.ndarray | None = None) -> np.ndarray:
    out = np.zeros(len(p), dtype=OBJTRI)
    out["p"] = p
    out["n"] = np.repeat(face_normals(p)[:, None, :], 3, axis=1) if n is None else n
    out["prim"] = np.arange(len(p))
    return out


def quad() -> Scene:
    """Two triangles over the central quarter of the default view, slightly tilted."""
    a, b = 1.2, 0.9
    v = np.array([[-a, -b, -0.1], [a, -b, 0.1], [a, b, -0.1], [-a, b, 0.1]])
    p = np.stack([v[[0, 1, 2]], v[[0, 2, 3]]])
    return Scene("triangles", _tris(p), name="quad")


SIZES = {"mixed": (1.0, 80.0), "small": (1.0, 6.0)}


def soup(n: int = 10000, size: str = "mixed", seed: int = 7, camera: Camera = DEFAULT_CAMERA,
         screen=(1024, 768)) -> Scene:
    """Random triangles in front of the camera with log-uniform pixel edge lengths."""
    if size not in SIZES:
        raise ValueError(f"size must be one of {sorted(SIZES)}")
    lo, hi = SIZES[size]
    rng = np.random.default_rng(seed)
    dist = np.linalg.norm(np.asarray(camera.eye, dtype=float) - np.asarray(camera.target, dtype=float))
    ppu = camera.pixels_per_unit(screen, dist)
    half_w = screen[0] / ppu / 2.0
    half_h = screen[1] / ppu / 2.0
    centre = np.stack([rng.uniform(-half_w, half_w, n), rng.uniform(-half_h, half_h, n),
                       rng.uniform(-0.5, 0.5, n)], axis=1)
    edge_px = np.exp(rng.uniform(math.log(lo), math.log(hi), n))
    r = edge_px / ppu / math.sqrt(3.0)
    ang = rng.uniform(0.0, 2.0 * math.pi, (n, 1)) + np.array([0.0, 2.0, 4.0]) * math.pi / 3.0
    ang = ang + rng.uniform(-0.4, 0.4, (n, 3))
    tilt = rng.uniform(-0.5, 0.5, (n, 3))
    p = np.empty((n, 3, 3))
    p[:, :, 0] = centre[:, None, 0] + r[:, None] * np.cos(ang)
    p[:, :, 1] = centre[:, None, 1] + r[:, None] * np.sin(ang)
    p[:, :, 2] = centre[:, None, 2] + r[:, None] * tilt
    fn = face_normals(p)
    nrm = fn[:, None, :] + rng.normal(0.0, 0.15, (n, 3, 3))
    return Scene("triangles", _tris(p, nrm), camera, name=f"soup-{size}-{n}")


def patch_array(n: int = 4, extent: float = 2.4, amplitude: float = 0.2, tilt_deg: float = -35.0) -> Scene:
    """An n x n grid of bicubic patches sampling a wavy height field."""
    t = np.linspace(0.0, 1.0, 4)
    cps = []
    ca, sa = math.cos(math.radians(tilt_deg)), math.sin(math.radians(tilt_deg))
    for j in range(n):
        for i in range(n):
            pts = []
            for row in range(4):
                for col in range(4):
                    x = (i + t[col]) / n * extent - extent / 2
                    y = (j + t[row]) / n * extent - extent / 2
                    z = amplitude * math.sin(2.2 * x) * math.cos(1.7 * y)
                    # tilt the sheet about the x axis so it recedes
                    pts.append((x, y * ca - z * sa, y * sa + z * ca))
            cps.append(pts)
    return Scene("patches", make_patches(np.array(cps)), name=f"patch-array-{n}")


def load_patches(path) -> np.ndarray:
    """Read a patch file: one ``x y z`` control point per line, 16 per patch.

    Blank lines and ``#`` comments are ignored.
    """
    text = Path(path).read_text() if not hasattr(path, "read_text") else path.read_text()
    return _parse_patches(text, str(path))


def _parse_patches(text: str, where: str) -> np.ndarray:
    pts = []
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        f = line.split()
        if len(f) != 3:
            raise ValueError(f"{where}:{ln}: expected 'x y z', got {line!r}")
        pts.append([float(v) for v in f])
    if len(pts) % 16:
        raise ValueError(f"{where}: {len(pts)} control points is not a multiple of 16")
    return np.array(pts, dtype=np.float64).reshape(-1, 16, 3)


def teapot(scale: float = 0.45) -> Scene:
    """The 32-patch teapot, z-up data turned y-up, centred on the origin."""
    res = resources.files("binpipe.pipelines") / "data" / "teapot.patches"
    cp = _parse_patches(res.read_text(), "teapot.patches")
    x, y, z = cp[..., 0], cp[..., 1], cp[..., 2]
    world = np.stack([(x - 0.2) * scale, (z - 1.575) * scale, -y * scale], axis=-1)
    return Scene("patches", make_patches(world), name="teapot")


def load_obj(path) -> np.ndarray:
    """Triangles from a Wavefront OBJ subset: ``v``, ``vn`` and ``f`` lines.

    Polygons are fan-triangulated; faces without normals get face normals.
    """
    verts, norms, tris, tnorms = [], [], [], []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        tag, args = line[0], line[1:]
        if tag == "v":
            verts.append([float(a) for a in args[:3]])
        elif tag == "vn":
            norms.append([float(a) for a in args[:3]])
        elif tag == "f":
            if len(args) < 3:
                raise ValueError(f"{path}:{ln}: face needs 3 or more vertices")
            vi, ni = [], []
            for a in args:
                parts = a.split("/")
                vi.append(_obj_index(parts[0], len(verts), path, ln))
                ni.append(_obj_index(parts[2], len(norms), path, ln) if len(parts) > 2 and parts[2] else None)
            for k in range(1, len(vi) - 1):
                tri = [vi[0], vi[k], vi[k + 1]]
                tn = [ni[0], ni[k], ni[k + 1]]
                tris.append([verts[i] for i in tri])
                tnorms.append(None if None in tn else [norms[i] for i in tn])
    if not tris:
        return np.zeros(0, dtype=OBJTRI)
    p = np.array(tris, dtype=np.float64)
    fn = face_normals(p)
    n = np.array([tn if tn is not None else [fn[i]] * 3 for i, tn in enumerate(tnorms)], dtype=np.float64)
    return _tris(p, n)


def _obj_index(tok: str, count: int, path, ln: int) -> int:
    i = int(tok)
    i = i - 1 if i > 0 else count + i
    if not 0 <= i < count:
        raise ValueError(f"{path}:{ln}: index {tok} out of range")
    return i


def _parse_opts(text: str) -> dict[str, str]:
    opts = {}
    for part in filter(None, text.split(",")):
        k, sep, v = part.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {part!r}")
        opts[k.strip()] = v.strip()
    return opts


def procedural(spec: str, screen=(1024, 768)) -> Scene:
    """Build a scene from ``name[:key=value,...]``.

    ``quad``, ``soup:n=10000,size=mixed,seed=7``, ``patch-array:n=4``, ``teapot``.
    """
    name, _, rest = spec.partition(":")
    opts = _parse_opts(rest)
    try:
        if name == "quad":
            return quad()
        if name == "soup":
            return soup(int(opts.get("n", 10000)), opts.get("size", "mixed"), int(opts.get("seed", 7)),
                        screen=screen)
        if name == "patch-array":
            return patch_array(int(opts.get("n", 4)))
        if name == "teapot":
            return teapot(float(opts.get("scale", 0.45)))
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad scene spec {spec!r}: {exc}") from exc
    raise ValueError(f"unknown procedural scene {name!r}")


def load_scene(path) -> Scene:
    """``.obj`` files hold triangles, anything else is read as a patch file."""
    path = Path(path)
    if path.suffix.lower() == ".obj":
        return Scene("triangles", load_obj(path), name=path.stem)
    return Scene("patches", make_patches(load_patches(path)), name=path.stem)


def empty_patches() -> np.ndarray:
    return np.zeros(0, dtype=PATCH)
