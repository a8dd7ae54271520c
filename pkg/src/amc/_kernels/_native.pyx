# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled twins of the kernels in ``fallback.py``.

Bit-parity contract: float32 kernels replay the exact accumulation order of
the fallback (filter positions row-major, then input channels, one rounding
per add); integer kernels are exact.  Build flags disable FP contraction so
no FMA sneaks extra precision into the float path.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv_forward(float[:, :, ::1] x, float[:, :, :, ::1] w, float[::1] b,
                 int stride, int padding):
    # Accumulates one (oh, ow) float32 plane per output channel, adding the
    # (i, ky, kx) products in that fixed order; per-element rounding order is
    # identical to the scalar definition, and the ox loop vectorizes.
    cdef Py_ssize_t ic = x.shape[0], h = x.shape[1], wd = x.shape[2]
    cdef Py_ssize_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * padding - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * padding - kw) // stride + 1
    pad_np = np.zeros((ic, h + 2 * padding, wd + 2 * padding), dtype=np.float32)
    pad_np[:, padding:padding + h, padding:padding + wd] = np.asarray(x)
    cdef float[:, :, ::1] pad = pad_np
    out_np = np.empty((oc, oh, ow), dtype=np.float32)
    acc_np = np.empty((oh, ow), dtype=np.float32)
    cdef float[:, :, ::1] out = out_np
    cdef float[:, ::1] acc = acc_np
    cdef Py_ssize_t o, i, ky, kx, oy, ox
    cdef float wv, bv
    for o in range(oc):
        for oy in range(oh):
            for ox in range(ow):
                acc[oy, ox] = 0.0
        for i in range(ic):
            for ky in range(kh):
                for kx in range(kw):
                    wv = w[o, i, ky, kx]
                    for oy in range(oh):
                        for ox in range(ow):
                            acc[oy, ox] = acc[oy, ox] + wv * pad[i, oy * stride + ky, ox * stride + kx]
        bv = b[o]
        for oy in range(oh):
            for ox in range(ow):
                out[o, oy, ox] = acc[oy, ox] + bv
    return out_np


def maxpool_forward(float[:, :, ::1] x, int kh, int kw, int stride, int padding):
    # Plane-at-a-time max over the valid window offsets; padded positions are
    # simply never visited.  Max is order-independent, so this matches the
    # fallback exactly.
    cdef Py_ssize_t c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef Py_ssize_t oh = (h + 2 * padding - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * padding - kw) // stride + 1
    out_np = np.full((c, oh, ow), -np.inf, dtype=np.float32)
    cdef float[:, :, ::1] out = out_np
    cdef Py_ssize_t ch, oy, ox, ky, kx, oy0, oy1, ox0, ox1
    cdef float v
    for ky in range(kh):
        oy0 = max(<Py_ssize_t> 0, -(-(padding - ky) // stride))
        oy1 = min(oh, (h - 1 + padding - ky) // stride + 1)
        if oy1 <= oy0:
            continue
        for kx in range(kw):
            ox0 = max(<Py_ssize_t> 0, -(-(padding - kx) // stride))
            ox1 = min(ow, (w - 1 + padding - kx) // stride + 1)
            if ox1 <= ox0:
                continue
            for ch in range(c):
                for oy in range(oy0, oy1):
                    for ox in range(ox0, ox1):
                        v = x[ch, oy * stride - padding + ky, ox * stride - padding + kx]
                        out[ch, oy, ox] = v if v > out[ch, oy, ox] else out[ch, oy, ox]
    return out_np


def tile_sad_table(const unsigned char[:, ::1] current,
                   const unsigned char[:, ::1] key,
                   int tile, const int[:, ::1] offsets):
    cdef Py_ssize_t h = current.shape[0], w = current.shape[1]
    cdef Py_ssize_t ty = h // tile, tx = w // tile
    cdef Py_ssize_t n = offsets.shape[0]
    sad_np = np.zeros((ty, tx, n), dtype=np.uint64)
    valid_np = np.zeros((ty, tx, n), dtype=bool)
    cdef cnp.uint64_t[:, :, ::1] sad = sad_np
    cdef cnp.uint8_t[:, :, ::1] valid = valid_np.view(np.uint8)
    cdef Py_ssize_t r, c, k, py, px, oy, ox
    cdef int dy, dx
    cdef unsigned long long acc
    cdef int d
    for r in range(ty):
        for c in range(tx):
            for k in range(n):
                dy = offsets[k, 0]
                dx = offsets[k, 1]
                oy = r * tile + dy
                ox = c * tile + dx
                if oy < 0 or ox < 0 or oy + tile > h or ox + tile > w:
                    continue
                acc = 0
                for py in range(tile):
                    for px in range(tile):
                        d = <int> current[r * tile + py, c * tile + px] - <int> key[oy + py, ox + px]
                        acc += d if d >= 0 else -d
                sad[r, c, k] = acc
                valid[r, c, k] = 1
    return sad_np, valid_np


def field_sums(const cnp.uint64_t[:, :, ::1] sad,
               const long long[::1] r0, const long long[::1] r1,
               const long long[::1] c0, const long long[::1] c1,
               ok_np):
    """Rolling-sum aggregation of tile SADs into per-field SADs.

    Walks each field row left to right per offset; the first valid field of
    a run is summed in full, later ones reuse the previous field's sum and
    add/subtract the leading/trailing tile columns (past-sum behavior).
    """
    cdef cnp.uint8_t[:, :, ::1] ok = ok_np.view(np.uint8)
    cdef Py_ssize_t fy = r0.shape[0], fx = c0.shape[0], n = sad.shape[2]
    sums_np = np.zeros((fy, fx, n), dtype=np.uint64)
    cdef cnp.uint64_t[:, :, ::1] sums = sums_np
    cdef Py_ssize_t k, iy, ix, r, c
    cdef unsigned long long acc
    cdef long long ops = 0
    cdef bint prev
    cdef long long pc0, pc1
    for k in range(n):
        for iy in range(fy):
            prev = False
            pc0 = 0
            pc1 = 0
            acc = 0
            for ix in range(fx):
                if not ok[iy, ix, k]:
                    prev = False
                    continue
                if not prev:
                    acc = 0
                    for r in range(r0[iy], r1[iy]):
                        for c in range(c0[ix], c1[ix]):
                            acc += sad[r, c, k]
                    ops += (r1[iy] - r0[iy]) * (c1[ix] - c0[ix])
                else:
                    for r in range(r0[iy], r1[iy]):
                        for c in range(pc1, c1[ix]):
                            acc += sad[r, c, k]
                        for c in range(pc0, c0[ix]):
                            acc -= sad[r, c, k]
                    ops += (r1[iy] - r0[iy]) * ((c1[ix] - pc1) + (c0[ix] - pc0))
                sums[iy, ix, k] = acc
                prev = True
                pc0 = c0[ix]
                pc1 = c1[ix]
    return sums_np, int(ops)


def exhaustive_field_sads(const unsigned char[:, ::1] current,
                          const unsigned char[:, ::1] key,
                          const int[:, ::1] offsets,
                          const long long[::1] y0, const long long[::1] y1,
                          const long long[::1] x0, const long long[::1] x1,
                          ok_np):
    """Per-field SAD by direct pixel summation over covered tiles."""
    cdef cnp.uint8_t[:, :, ::1] ok = ok_np.view(np.uint8)
    cdef Py_ssize_t fy = y0.shape[0], fx = x0.shape[0], n = offsets.shape[0]
    sums_np = np.zeros((fy, fx, n), dtype=np.uint64)
    cdef cnp.uint64_t[:, :, ::1] sums = sums_np
    cdef Py_ssize_t k, iy, ix, py, px
    cdef int dy, dx, d
    cdef unsigned long long acc
    cdef long long ops = 0
    for iy in range(fy):
        for ix in range(fx):
            for k in range(n):
                if not ok[iy, ix, k]:
                    continue
                dy = offsets[k, 0]
                dx = offsets[k, 1]
                acc = 0
                for py in range(y0[iy], y1[iy]):
                    for px in range(x0[ix], x1[ix]):
                        d = <int> current[py, px] - <int> key[py + dy, px + dx]
                        acc += d if d >= 0 else -d
                sums[iy, ix, k] = acc
                ops += (y1[iy] - y0[iy]) * (x1[ix] - x0[ix])
    return sums_np, int(ops)


def warp_bilinear(const short[:, :, ::1] act, const short[:, :, ::1] field):
    cdef Py_ssize_t c = act.shape[0], h = act.shape[1], w = act.shape[2]
    cdef Py_ssize_t fy = field.shape[0], fx = field.shape[1]
    out_np = np.empty((c, fy, fx), dtype=np.int16)
    cdef short[:, :, ::1] out = out_np
    cdef Py_ssize_t ch, oy, ox
    cdef long long sy, sx, u, v, w00, w01, w10, w11, acc
    cdef Py_ssize_t iy0, iy1, ix0, ix1
    for oy in range(fy):
        for ox in range(fx):
            sy = (oy << 8) + field[oy, ox, 0]
            sx = (ox << 8) + field[oy, ox, 1]
            iy0 = sy >> 8
            ix0 = sx >> 8
            v = sy & 255
            u = sx & 255
            iy1 = iy0 + 1
            ix1 = ix0 + 1
            if iy0 < 0: iy0 = 0
            if iy0 > h - 1: iy0 = h - 1
            if iy1 < 0: iy1 = 0
            if iy1 > h - 1: iy1 = h - 1
            if ix0 < 0: ix0 = 0
            if ix0 > w - 1: ix0 = w - 1
            if ix1 < 0: ix1 = 0
            if ix1 > w - 1: ix1 = w - 1
            w00 = (256 - u) * (256 - v)
            w01 = u * (256 - v)
            w10 = (256 - u) * v
            w11 = u * v
            for ch in range(c):
                acc = (act[ch, iy0, ix0] * w00 + act[ch, iy0, ix1] * w01
                       + act[ch, iy1, ix0] * w10 + act[ch, iy1, ix1] * w11)
                out[ch, oy, ox] = <short> (acc >> 16 if acc >= 0 else -((-acc) >> 16))
    return out_np
