"""Run-length-encoded storage of Q8.8 activations.

Each channel is a stream of (gap, value) pairs: `gap` zeros followed by one
stored value, which may itself be zero.  Gaps are 8-bit, so a pair covers at
most 256 elements; runs longer than 255 zeros continue through (255, 0)
escape pairs.  The canonical encoding uses maximal gaps and escapes only
when a run exceeds 255.

A four-lane decoder mirrors the hardware gather path used by bilinear
warping: four stream cursors advance by the minimum shared zero gap, and
lanes still inside a zero run contribute zeros.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .fixedpoint import Q_ONE

MAGIC = b"EVA2"
FORMAT_VERSION = 1
GAP_BITS = 8
_MAX_GAP = 255


@dataclass
class SparseActivation:
    """RLE-encoded (channels, height, width) Q8.8 volume.

    streams[c] is a (gaps uint8, values int16) pair of equal-length arrays.
    """

    channels: int
    height: int
    width: int
    streams: list[tuple[np.ndarray, np.ndarray]]

    def validate(self) -> None:
        if len(self.streams) != self.channels:
            raise ValueError("one stream required per channel")
        plane = self.height * self.width
        for c, (gaps, values) in enumerate(self.streams):
            if gaps.shape != values.shape:
                raise ValueError(f"channel {c}: gap/value length mismatch")
            total = int(gaps.astype(np.int64).sum()) + gaps.shape[0]
            if total != plane:
                raise ValueError(
                    f"channel {c}: stream covers {total} elements, expected {plane}"
                )

    @property
    def pair_count(self) -> int:
        return sum(len(g) for g, _ in self.streams)

    def encoded_size(self) -> int:
        """Exact byte size of the on-disk representation."""
        return len(MAGIC) + 1 + 1 + 6 + 4 * self.channels + 3 * self.pair_count

    def dense_size(self) -> int:
        """Byte size of the dense 16-bit representation."""
        return 2 * self.channels * self.height * self.width


def _as_q88(t) -> np.ndarray:
    arr = np.ascontiguousarray(t, dtype=np.int16)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-d (c, h, w) Q8.8 volume, got {arr.shape}")
    return arr


def rle_encode(t, zero_epsilon: float = 0.0) -> SparseActivation:
    """Encode a Q8.8 int16 volume; |value| <= zero_epsilon stores as zero."""
    arr = _as_q88(t)
    c, h, w = arr.shape
    if zero_epsilon > 0.0:
        thr = zero_epsilon * Q_ONE
        arr = np.where(np.abs(arr.astype(np.int32)) <= thr, 0, arr).astype(np.int16)
    streams = []
    for ch in range(c):
        flat = arr[ch].ravel()
        gaps: list[int] = []
        values: list[int] = []
        prev = -1
        for idx in np.flatnonzero(flat):
            gap = int(idx) - prev - 1
            while gap > _MAX_GAP:
                gaps.append(_MAX_GAP)
                values.append(0)
                gap -= _MAX_GAP + 1
            gaps.append(gap)
            values.append(int(flat[idx]))
            prev = int(idx)
        rem = flat.shape[0] - prev - 1
        while rem > _MAX_GAP:
            gaps.append(_MAX_GAP)
            values.append(0)
            rem -= _MAX_GAP + 1
        if rem > 0:
            gaps.append(rem - 1)
            values.append(0)
        streams.append(
            (np.asarray(gaps, dtype=np.uint8), np.asarray(values, dtype=np.int16))
        )
    return SparseActivation(channels=c, height=h, width=w, streams=streams)


def rle_decode(s: SparseActivation) -> np.ndarray:
    """Decode back to a dense int16 (c, h, w) volume."""
    plane = s.height * s.width
    out = np.zeros((s.channels, plane), dtype=np.int16)
    for ch, (gaps, values) in enumerate(s.streams):
        positions = np.cumsum(gaps.astype(np.int64) + 1) - 1
        covered = int(positions[-1]) + 1 if positions.shape[0] else 0
        if covered != plane:
            raise ValueError(
                f"malformed stream for channel {ch}: element count mismatch "
                f"({covered} covered, {plane} expected)"
            )
        out[ch, positions] = values
    return out.reshape(s.channels, s.height, s.width)


def lane_decode4(
    s: SparseActivation, channel: int, coords
) -> tuple[int, int, int, int]:
    """Decode the four neighborhood values via sparsity decoder lanes.

    Each lane seeks its coordinate's position in the pair stream and reports
    the zero gap remaining before its next stored value.  The minimum gap is
    broadcast and subtracted from every lane (skipping zeros shared among all
    four); lanes reaching gap zero emit their value register, the rest emit
    zero.  Equivalent to a dense gather.
    """
    if not 0 <= channel < s.channels:
        raise IndexError(f"channel {channel} out of range")
    gaps, values = s.streams[channel]
    value_pos = np.cumsum(gaps.astype(np.int64) + 1) - 1
    lanes = []
    for y, x in coords:
        if not (0 <= y < s.height and 0 <= x < s.width):
            raise IndexError(f"coordinate ({y}, {x}) out of bounds")
        target = y * s.width + x
        pair = int(np.searchsorted(value_pos, target, side="left"))
        residual = int(value_pos[pair]) - target
        lanes.append((residual, int(values[pair])))
    shared = min(gap for gap, _ in lanes)
    lanes = [(gap - shared, value) for gap, value in lanes]
    if shared > 0:
        # All four coordinates sit inside zero runs; the min-unit jump skips
        # them wholesale and every lane provides zero.
        return (0, 0, 0, 0)
    return tuple(value if gap == 0 else 0 for gap, value in lanes)


# ---------------------------------------------------------------------------
# File formats (little-endian throughout).
# Sparse: magic "EVA2", u8 version=1, u8 gap_bits=8, u16 channels, u16 height,
#   u16 width, then per channel: u32 pair count, pairs of (u8 gap, i16 value).
# Dense:  magic "EVAD", u16 channels/height/width, then i16 Q8.8 values in
#   channel-major order.

_PAIR_DTYPE = np.dtype([("gap", "u1"), ("value", "<i2")])
DENSE_MAGIC = b"EVAD"


def write_file(s: SparseActivation, path) -> None:
    s.validate()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BBHHH", FORMAT_VERSION, GAP_BITS, s.channels, s.height, s.width))
        for gaps, values in s.streams:
            fh.write(struct.pack("<I", len(gaps)))
            pairs = np.empty(len(gaps), dtype=_PAIR_DTYPE)
            pairs["gap"] = gaps
            pairs["value"] = values
            fh.write(pairs.tobytes())


def read_file(path) -> SparseActivation:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version, gap_bits, c, h, w = struct.unpack("<BBHHH", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported version {version}")
        if gap_bits != GAP_BITS:
            raise ValueError(f"unsupported gap width {gap_bits}")
        streams = []
        for _ in range(c):
            (count,) = struct.unpack("<I", fh.read(4))
            raw = fh.read(3 * count)
            if len(raw) != 3 * count:
                raise ValueError("truncated stream")
            pairs = np.frombuffer(raw, dtype=_PAIR_DTYPE)
            streams.append(
                (pairs["gap"].copy(), pairs["value"].copy())
            )
    out = SparseActivation(channels=c, height=h, width=w, streams=streams)
    out.validate()
    return out


def write_dense(t, path) -> None:
    arr = _as_q88(t)
    c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(DENSE_MAGIC)
        fh.write(struct.pack("<HHH", c, h, w))
        fh.write(arr.astype("<i2").tobytes())


def read_dense(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != DENSE_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {DENSE_MAGIC!r}")
        c, h, w = struct.unpack("<HHH", fh.read(6))
        raw = fh.read(2 * c * h * w)
        if len(raw) != 2 * c * h * w:
            raise ValueError("truncated dense tensor")
    return np.frombuffer(raw, dtype="<i2").reshape(c, h, w).astype(np.int16)
