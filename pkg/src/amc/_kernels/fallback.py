"""Pure-numpy implementations of the hot kernels.

These define the reference semantics for the compiled backend in
``_native.pyx``: every function here must produce bit-identical output to
its native twin.  The float32 kernels pin their accumulation order (filter
positions row-major, then input channels) so that identical operand
sequences round identically; the integer kernels are exact, so any
evaluation order works.

Backend selection happens in ``amc._kernels.__init__``.
"""

from __future__ import annotations

import numpy as np


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def conv_forward(x, w, b, stride, padding):
    """Direct convolution, float32, fixed accumulation order.

    x: (in_channels, h, w) float32, w: (out_channels, in_channels, kh, kw)
    float32, b: (out_channels,) float32.  Zero padding; bias added after the
    window sum.  Output dims follow (d + 2p - k) // s + 1.
    """
    ic, h, wd = x.shape
    oc, _, kh, kw = w.shape
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    padded = x
    if padding:
        padded = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    out = np.empty((oc, oh, ow), dtype=np.float32)
    for o in range(oc):
        acc = np.zeros((oh, ow), dtype=np.float32)
        for i in range(ic):
            for ky in range(kh):
                for kx in range(kw):
                    win = padded[
                        i,
                        ky : ky + stride * (oh - 1) + 1 : stride,
                        kx : kx + stride * (ow - 1) + 1 : stride,
                    ]
                    acc += w[o, i, ky, kx] * win
        out[o] = acc + b[o]
    return out


def maxpool_forward(x, kh, kw, stride, padding):
    """Per-channel window maximum; padded positions never enter the max."""
    c, h, w = x.shape
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.full((c, oh, ow), -np.inf, dtype=np.float32)
    for ky in range(kh):
        oy0 = max(0, _ceil_div(padding - ky, stride))
        oy1 = min(oh, (h - 1 + padding - ky) // stride + 1)
        if oy1 <= oy0:
            continue
        iy = oy0 * stride - padding + ky
        for kx in range(kw):
            ox0 = max(0, _ceil_div(padding - kx, stride))
            ox1 = min(ow, (w - 1 + padding - kx) // stride + 1)
            if ox1 <= ox0:
                continue
            ix = ox0 * stride - padding + kx
            win = x[
                :,
                iy : iy + stride * (oy1 - oy0 - 1) + 1 : stride,
                ix : ix + stride * (ox1 - ox0 - 1) + 1 : stride,
            ]
            np.maximum(out[:, oy0:oy1, ox0:ox1], win, out=out[:, oy0:oy1, ox0:ox1])
    return out


def tile_sad_table(current, key, tile, offsets):
    """Per-tile SAD against the key frame over a grid of displacements.

    current/key: (h, w) uint8.  offsets: (n, 2) int32 (dy, dx) displacements
    applied to the key-frame block.  Returns (sad, valid): sad is
    (tiles_y, tiles_x, n) uint64, valid marks offsets whose displaced tile
    lies fully inside the key frame.  Partial border tiles are not produced.
    """
    h, w = current.shape
    ty, tx = h // tile, w // tile
    n = len(offsets)
    sad = np.zeros((ty, tx, n), dtype=np.uint64)
    valid = np.zeros((ty, tx, n), dtype=bool)
    cur = current[: ty * tile, : tx * tile].astype(np.int32)
    keyi = key.astype(np.int32)
    for k in range(n):
        dy, dx = int(offsets[k, 0]), int(offsets[k, 1])
        r0 = max(0, _ceil_div(-dy, tile))
        r1 = min(ty, (h - dy) // tile)
        c0 = max(0, _ceil_div(-dx, tile))
        c1 = min(tx, (w - dx) // tile)
        if r0 >= r1 or c0 >= c1:
            continue
        a = cur[r0 * tile : r1 * tile, c0 * tile : c1 * tile]
        bb = keyi[r0 * tile + dy : r1 * tile + dy, c0 * tile + dx : c1 * tile + dx]
        d = np.abs(a - bb)
        s = d.reshape(r1 - r0, tile, c1 - c0, tile).sum(axis=(1, 3), dtype=np.int64)
        sad[r0:r1, c0:c1, k] = s.astype(np.uint64)
        valid[r0:r1, c0:c1, k] = True
    return sad, valid


def _rolling_op_count(r0, r1, c0, c1, ok):
    """Add/subtract count of the rolling-sum consumer for validity mask `ok`.

    The consumer walks each field row left to right: a fresh sum over all
    covered tiles at the start of every valid run, then one add per leading
    tile and one subtract per trailing tile for each subsequent field.  The
    count telescopes, so it can be evaluated without the walk.
    """
    nrows = np.maximum(r1 - r0, 0)[:, None, None]  # (fy,1,1)
    ncols = np.maximum(c1 - c0, 0)[None, :, None]  # (1,fx,1)
    prev = np.zeros_like(ok)
    prev[:, 1:, :] = ok[:, :-1, :]
    start = ok & ~prev
    cont = ok & prev
    dc1 = np.zeros(len(c0), dtype=np.int64)
    dc0 = np.zeros(len(c0), dtype=np.int64)
    dc1[1:] = c1[1:] - c1[:-1]
    dc0[1:] = c0[1:] - c0[:-1]
    step = (dc1 + dc0)[None, :, None]
    ops = (start * (nrows * ncols)).sum() + (cont * (nrows * step)).sum()
    return int(ops)


def field_sums(sad, r0, r1, c0, c1, ok):
    """Aggregate tile SADs into per-field SADs.

    sad: (tiles_y, tiles_x, n) uint64.  r0/r1 index covered tile rows per
    field row, c0/c1 covered tile columns per field column, ok marks
    (field, offset) entries whose covered tiles are all valid.  Returns
    (sums, ops): sums is (fy, fx, n) uint64, zero where ~ok; ops counts the
    adds/subtracts a rolling-sum consumer performs for the same mask.

    Sums are computed with 2-D prefix sums; integer arithmetic makes this
    exactly equal to the rolling column add/subtract evaluation the native
    backend performs.
    """
    ty, tx = sad.shape[:2]
    integ = np.zeros((ty + 1, tx + 1, sad.shape[2]), dtype=np.uint64)
    np.cumsum(sad, axis=0, out=integ[1:, 1:])
    np.cumsum(integ[1:, 1:], axis=1, out=integ[1:, 1:])
    # ranges may be degenerate (or out of range) for fields with no covered
    # tiles; those entries are ~ok and get zeroed below
    r0c = np.clip(r0, 0, ty)
    r1c = np.clip(r1, r0c, ty)
    c0c = np.clip(c0, 0, tx)
    c1c = np.clip(c1, c0c, tx)
    sums = (
        integ[r1c[:, None], c1c[None, :]]
        - integ[r0c[:, None], c1c[None, :]]
        - integ[r1c[:, None], c0c[None, :]]
        + integ[r0c[:, None], c0c[None, :]]
    )
    sums[~ok] = 0
    return sums, _rolling_op_count(r0, r1, c0, c1, ok)


def exhaustive_field_sads(current, key, offsets, y0, y1, x0, x1, ok):
    """Per-field SAD by direct pixel summation (no tile reuse).

    y0/y1 and x0/x1 are per-field pixel rectangles (tile-aligned, partial
    tiles already dropped).  Returns (sums, ops) with ops counting one
    absolute-difference addition per pixel per valid (field, offset).
    """
    h, w = current.shape
    n = len(offsets)
    fy, fx = len(y0), len(x0)
    cur = current.astype(np.int32)
    keyi = key.astype(np.int32)
    sums = np.zeros((fy, fx, n), dtype=np.uint64)
    y0c = np.clip(y0, 0, h)
    y1c = np.clip(y1, y0c, h)
    x0c = np.clip(x0, 0, w)
    x1c = np.clip(x1, x0c, w)
    for k in range(n):
        dy, dx = int(offsets[k, 0]), int(offsets[k, 1])
        if not ok[:, :, k].any():
            continue
        lo_y, hi_y = max(0, -dy), min(h, h - dy)
        lo_x, hi_x = max(0, -dx), min(w, w - dx)
        diff = np.zeros((h, w), dtype=np.int64)
        diff[lo_y:hi_y, lo_x:hi_x] = np.abs(
            cur[lo_y:hi_y, lo_x:hi_x] - keyi[lo_y + dy : hi_y + dy, lo_x + dx : hi_x + dx]
        )
        integ = np.zeros((h + 1, w + 1), dtype=np.int64)
        np.cumsum(diff, axis=0, out=integ[1:, 1:])
        np.cumsum(integ[1:, 1:], axis=1, out=integ[1:, 1:])
        s = (
            integ[y1c[:, None], x1c[None, :]]
            - integ[y0c[:, None], x1c[None, :]]
            - integ[y1c[:, None], x0c[None, :]]
            + integ[y0c[:, None], x0c[None, :]]
        )
        sums[:, :, k] = np.where(ok[:, :, k], s, 0).astype(np.uint64)
    area = (
        np.maximum(y1 - y0, 0)[:, None, None] * np.maximum(x1 - x0, 0)[None, :, None]
    )
    ops = int((ok * area).sum())
    return sums, ops


def warp_bilinear(act, field):
    """Bilinear gather in Q8.8 fixed point.

    act: (c, h, w) int16 Q8.8 activation.  field: (fy, fx, 2) int16 Q8.8
    gather vectors (dy, dx) pointing from each output coordinate to its
    source.  Out-of-range sources clamp to the edge.  The four weighted
    products accumulate in wide integers; one final shift truncates toward
    zero back to Q8.8.
    """
    c, h, w = act.shape
    fy, fx = field.shape[:2]
    ys = (np.arange(fy, dtype=np.int32) << 8)[:, None] + field[:, :, 0].astype(np.int32)
    xs = (np.arange(fx, dtype=np.int32) << 8)[None, :] + field[:, :, 1].astype(np.int32)
    iy = ys >> 8
    ix = xs >> 8
    v = (ys & 255).astype(np.int64)
    u = (xs & 255).astype(np.int64)
    y0 = np.clip(iy, 0, h - 1)
    y1 = np.clip(iy + 1, 0, h - 1)
    x0 = np.clip(ix, 0, w - 1)
    x1 = np.clip(ix + 1, 0, w - 1)
    a = act.astype(np.int64)
    w00 = (256 - u) * (256 - v)
    w01 = u * (256 - v)
    w10 = (256 - u) * v
    w11 = u * v
    acc = (
        a[:, y0, x0] * w00
        + a[:, y0, x1] * w01
        + a[:, y1, x0] * w10
        + a[:, y1, x1] * w11
    )
    out = np.where(acc >= 0, acc >> 16, -((-acc) >> 16))
    return out.astype(np.int16)
