# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled hot kernels: rasterize, shade, depth merge.

Each loop replays the numpy fallback's arithmetic in the same order, and the
module is built without floating-point contraction, so both backends agree
bit for bit. The loops run without the GIL.
"""
import numpy as np

from libc.math cimport sqrt, sin
from libc.stdint cimport int32_t, int64_t, uint8_t
from libc.stdlib cimport free, malloc, realloc
from libc.string cimport memcpy

from ..primitives import FRAG, HALF as _HALF, SUBPIXEL as _SUBPIXEL
from ..pipelines.shading import LIGHT as _LIGHT, MATERIAL as _MATERIAL

cdef extern from *:
    """
    static inline void bp_spin_lock(int *l) {
        while (__atomic_exchange_n(l, 1, __ATOMIC_ACQUIRE)) {
            while (__atomic_load_n(l, __ATOMIC_RELAXED)) { }
        }
    }
    static inline void bp_spin_unlock(int *l) {
        __atomic_store_n(l, 0, __ATOMIC_RELEASE);
    }
    static volatile double bp_sink;
    static inline void bp_sink_store(double v) { bp_sink = v; }
    """
    void bp_spin_lock(int *l) nogil
    void bp_spin_unlock(int *l) nogil
    void bp_sink_store(double v) nogil

ctypedef packed struct Tri:
    int64_t X0, Y0, X1, Y1, X2, Y2
    double z0, z1, z2, iw0, iw1, iw2
    double n0x, n0y, n0z, n1x, n1y, n1z, n2x, n2y, n2z
    int64_t prim

ctypedef packed struct Frag:
    int32_t x, y
    double depth, nx, ny, nz, r, g, b
    int64_t prim

cdef int64_t SUB = _SUBPIXEL
cdef int64_t HALF = _HALF
cdef double LIGHT = _LIGHT
cdef double MR = _MATERIAL[0]
cdef double MG = _MATERIAL[1]
cdef double MB = _MATERIAL[2]


cdef inline int64_t floordiv(int64_t a, int64_t b) nogil:
    cdef int64_t q = a / b
    if (a % b != 0) and ((a < 0) != (b < 0)):
        q -= 1
    return q


cdef inline bint owns(int64_t ax, int64_t ay, int64_t bx, int64_t by) nogil:
    cdef int64_t dx = bx - ax
    cdef int64_t dy = by - ay
    return dy < 0 or (dy == 0 and dx > 0)


cdef struct FragBuf:
    Frag *data
    Py_ssize_t n
    Py_ssize_t cap


cdef int push(FragBuf *buf) nogil:
    cdef Py_ssize_t cap
    cdef Frag *grown
    if buf.n == buf.cap:
        cap = buf.cap * 2 if buf.cap else 1024
        grown = <Frag *> realloc(buf.data, cap * sizeof(Frag))
        if grown == NULL:
            return -1
        buf.data = grown
        buf.cap = cap
    buf.n += 1
    return 0


def rasterize(const Tri[:] tris, long x0, long y0, long x1, long y1, bint flat=False):
    cdef FragBuf buf
    buf.data = NULL
    buf.n = 0
    buf.cap = 0
    cdef Py_ssize_t i
    cdef int64_t ax, ay, bx, by, cx, cy, area, t64
    cdef int64_t xa, xb, ya, yb, px, py, PX, PY, w0, w1, w2, lo, hi
    cdef double z0, z1, z2, iw0, iw1, iw2, td
    cdef double n0x, n0y, n0z, n1x, n1y, n1z, n2x, n2y, n2z
    cdef double f0, f1, f2, q0, q1, q2, den, depth, farea
    cdef bint o12, o20, o01
    cdef int failed = 0
    cdef Frag *f
    with nogil:
        for i in range(tris.shape[0]):
            ax = tris[i].X0
            ay = tris[i].Y0
            bx = tris[i].X1
            by = tris[i].Y1
            cx = tris[i].X2
            cy = tris[i].Y2
            z0 = tris[i].z0
            z1 = tris[i].z1
            z2 = tris[i].z2
            iw0 = tris[i].iw0
            iw1 = tris[i].iw1
            iw2 = tris[i].iw2
            n0x = tris[i].n0x
            n0y = tris[i].n0y
            n0z = tris[i].n0z
            n1x = tris[i].n1x
            n1y = tris[i].n1y
            n1z = tris[i].n1z
            n2x = tris[i].n2x
            n2y = tris[i].n2y
            n2z = tris[i].n2z
            area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if area == 0:
                continue
            if area < 0:
                area = -area
                t64 = bx; bx = cx; cx = t64
                t64 = by; by = cy; cy = t64
                td = z1; z1 = z2; z2 = td
                td = iw1; iw1 = iw2; iw2 = td
                td = n1x; n1x = n2x; n2x = td
                td = n1y; n1y = n2y; n2y = td
                td = n1z; n1z = n2z; n2z = td
            lo = min(min(ax, bx), cx)
            hi = max(max(ax, bx), cx)
            xa = max(-floordiv(HALF - lo, SUB), x0)
            xb = min(floordiv(hi - HALF, SUB), x1 - 1)
            lo = min(min(ay, by), cy)
            hi = max(max(ay, by), cy)
            ya = max(-floordiv(HALF - lo, SUB), y0)
            yb = min(floordiv(hi - HALF, SUB), y1 - 1)
            if xa > xb or ya > yb:
                continue
            o12 = owns(bx, by, cx, cy)
            o20 = owns(cx, cy, ax, ay)
            o01 = owns(ax, ay, bx, by)
            farea = <double> area
            for py in range(ya, yb + 1):
                PY = py * SUB + HALF
                for px in range(xa, xb + 1):
                    PX = px * SUB + HALF
                    w0 = (cx - bx) * (PY - by) - (cy - by) * (PX - bx)
                    if w0 < 0 or (w0 == 0 and not o12):
                        continue
                    w1 = (ax - cx) * (PY - cy) - (ay - cy) * (PX - cx)
                    if w1 < 0 or (w1 == 0 and not o20):
                        continue
                    w2 = (bx - ax) * (PY - ay) - (by - ay) * (PX - ax)
                    if w2 < 0 or (w2 == 0 and not o01):
                        continue
                    if flat:
                        depth = z0
                    else:
                        f0 = <double> w0
                        f1 = <double> w1
                        f2 = <double> w2
                        depth = ((f0 * z0 + f1 * z1) + f2 * z2) / farea
                    if not (depth >= 0.0 and depth <= 1.0):
                        continue
                    if push(&buf) != 0:
                        failed = 1
                        break
                    f = &buf.data[buf.n - 1]
                    f.x = <int32_t> px
                    f.y = <int32_t> py
                    f.depth = depth
                    f.r = 0.0
                    f.g = 0.0
                    f.b = 0.0
                    f.prim = tris[i].prim
                    if flat:
                        f.nx = n0x
                        f.ny = n0y
                        f.nz = n0z
                    else:
                        q0 = f0 * iw0
                        q1 = f1 * iw1
                        q2 = f2 * iw2
                        den = (q0 + q1) + q2
                        f.nx = ((q0 * n0x + q1 * n1x) + q2 * n2x) / den
                        f.ny = ((q0 * n0y + q1 * n1y) + q2 * n2y) / den
                        f.nz = ((q0 * n0z + q1 * n1z) + q2 * n2z) / den
                if failed:
                    break
            if failed:
                break
    if failed:
        free(buf.data)
        raise MemoryError("fragment buffer")
    out = np.empty(buf.n, dtype=FRAG)
    cdef Frag[::1] view
    if buf.n:
        view = out
        memcpy(&view[0], buf.data, buf.n * sizeof(Frag))
    free(buf.data)
    return out


def shade(Frag[:] frags, int cost=0):
    cdef Py_ssize_t i
    cdef int k
    cdef double nx, ny, nz, ln, d, acc
    with nogil:
        for i in range(frags.shape[0]):
            nx = frags[i].nx
            ny = frags[i].ny
            nz = frags[i].nz
            ln = sqrt((nx * nx + ny * ny) + nz * nz)
            if ln == 0.0:
                d = 0.0
            else:
                d = ((nx / ln) * LIGHT + (ny / ln) * LIGHT) + (nz / ln) * LIGHT
            if not d > 0.0:
                d = 0.0
            if cost:
                acc = 0.0
                for k in range(cost):
                    acc = sin(acc + d)
                bp_sink_store(acc)
            frags[i].r = MR * d
            frags[i].g = MG * d
            frags[i].b = MB * d
    return frags.base if frags.base is not None else frags


class MergeLock:
    """One spinlock word per framebuffer row."""

    def __init__(self, height):
        self.rows = np.zeros(int(height), dtype=np.int32)


def depth_merge(const Frag[:] frags, double[:, ::1] depth, int64_t[:, ::1] prim,
                double[:, :, ::1] payload, bint store_normal, lock=None):
    cdef Py_ssize_t n = frags.shape[0]
    mask = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] m = mask
    cdef int32_t[::1] rows
    cdef int *locks = NULL
    if lock is not None:
        rows = lock.rows
        locks = <int *> &rows[0]
    cdef Py_ssize_t i
    cdef int32_t x, y
    cdef double d, od
    cdef int64_t p
    with nogil:
        for i in range(n):
            x = frags[i].x
            y = frags[i].y
            d = frags[i].depth
            p = frags[i].prim
            if locks != NULL:
                bp_spin_lock(&locks[y])
            od = depth[y, x]
            if d < od or (d == od and p < prim[y, x]):
                depth[y, x] = d
                prim[y, x] = p
                if store_normal:
                    payload[y, x, 0] = frags[i].nx
                    payload[y, x, 1] = frags[i].ny
                    payload[y, x, 2] = frags[i].nz
                else:
                    payload[y, x, 0] = frags[i].r
                    payload[y, x, 1] = frags[i].g
                    payload[y, x, 2] = frags[i].b
                m[i] = 1
            if locks != NULL:
                bp_spin_unlock(&locks[y])
        # a fragment beaten later in the same batch is not a winner
        for i in range(n):
            if m[i]:
                x = frags[i].x
                y = frags[i].y
                if locks != NULL:
                    bp_spin_lock(&locks[y])
                if depth[y, x] != frags[i].depth or prim[y, x] != frags[i].prim:
                    m[i] = 0
                if locks != NULL:
                    bp_spin_unlock(&locks[y])
    return mask.view(np.bool_)
