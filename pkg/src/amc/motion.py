"""Receptive-field block motion estimation (RFBME).

Block matching at receptive-field granularity.  The frame is cut into
stride-sized square tiles; a producer computes per-tile absolute-difference
sums once per search offset, and a consumer aggregates those shared tile
sums into per-field match errors with rolling column add/subtract updates.
An exhaustive per-field matcher with identical coverage, validity, and
tie-breaking serves as the oracle.

Conventions:
  - Search offsets are displacements applied to the key-frame block, so the
    argmin offset is directly the gather vector for activation warping.
  - Partial tiles at the right/bottom frame border are ignored, both for
    tile SADs and for field coverage; receptive fields reaching outside the
    frame are clamped, so only their in-frame tiles contribute.
  - Ties between equal-SAD offsets break toward the smallest Euclidean
    magnitude, then row-major (dy, then dx).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .tensor import ReceptiveFieldGeometry

NO_MATCH = np.uint64(np.iinfo(np.uint64).max)
"""Sentinel SAD for fields with no valid search offset (or no covered tiles)."""


def _as_frame(x) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d luma frame, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SearchParams:
    """Search grid: offsets in {-radius, -radius+stride, ..., +radius}."""

    radius: int
    stride: int = 1

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("search stride must be >= 1")
        if self.radius < 0:
            raise ValueError("search radius must be >= 0")
        if self.radius % self.stride:
            raise ValueError("search radius must be a multiple of the search stride")


def search_offsets(search: SearchParams) -> np.ndarray:
    """(n, 2) int32 (dy, dx) grid in row-major search order."""
    span = np.arange(-search.radius, search.radius + 1, search.stride, dtype=np.int32)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    return np.ascontiguousarray(np.stack([dy.ravel(), dx.ravel()], axis=1))


@dataclass
class TileDiffTable:
    """Per-tile SADs over the search grid (the producer's output)."""

    tile: int
    offsets: np.ndarray  # (n, 2) int32
    sad: np.ndarray      # (tiles_y, tiles_x, n) uint64
    valid: np.ndarray    # (tiles_y, tiles_x, n) bool
    ops: int             # absolute-difference additions performed

    @property
    def tiles_y(self) -> int:
        return self.sad.shape[0]

    @property
    def tiles_x(self) -> int:
        return self.sad.shape[1]


@dataclass
class MotionVectorField:
    """Per-receptive-field motion vectors with match-quality metrics."""

    vectors: np.ndarray  # (fields_y, fields_x, 2) int32 pixel offsets
    min_sad: np.ndarray  # (fields_y, fields_x) uint64; NO_MATCH where unmatched
    raw_error: int       # sum of min_sad over matched fields
    aggregate_error: float  # raw_error / contributing pixels
    total_magnitude: float  # sum of per-field vector magnitudes
    ops: int             # abs-diff additions plus tile-sum adds/subtracts

    @property
    def fields_y(self) -> int:
        return self.vectors.shape[0]

    @property
    def fields_x(self) -> int:
        return self.vectors.shape[1]

    @property
    def matched(self) -> np.ndarray:
        return self.min_sad != NO_MATCH


def field_grid(geometry: ReceptiveFieldGeometry, frame_dims: tuple[int, int]) -> tuple[int, int]:
    """Number of receptive-field positions per axis (the activation grid)."""
    h, w = frame_dims
    ny = (h - geometry.size - 2 * geometry.offset) // geometry.stride + 1
    nx = (w - geometry.size - 2 * geometry.offset) // geometry.stride + 1
    if ny < 1 or nx < 1:
        raise ValueError("frame too small for the receptive-field grid")
    return ny, nx


def produce_tile_diffs(
    current, key, tile: int, search: SearchParams
) -> TileDiffTable:
    """Tile-level SAD search of `current` tiles against the key frame.

    Only full tiles are produced (partial border tiles are ignored).  An
    offset is valid for a tile when the displaced tile lies fully inside the
    key frame.
    """
    current = _as_frame(current)
    key = _as_frame(key)
    if current.shape != key.shape:
        raise ValueError(f"frame dims differ: {current.shape} vs {key.shape}")
    if tile < 1:
        raise ValueError("tile side must be >= 1")
    h, w = current.shape
    if tile > h or tile > w:
        raise ValueError(f"tile side {tile} larger than frame {current.shape}")
    offsets = search_offsets(search)
    sad, valid = _kernels.tile_sad_table(current, key, tile, offsets)
    ops = int(valid.sum()) * tile * tile
    return TileDiffTable(tile=tile, offsets=offsets, sad=sad, valid=valid, ops=ops)


def _coverage(geometry, frame_dims, grid):
    """Covered full-tile ranges [r0, r1) x [c0, c1) per field row/column."""
    h, w = frame_dims
    t = geometry.stride
    ny, nx = grid
    oy = geometry.offset + np.arange(ny, dtype=np.int64) * t
    ox = geometry.offset + np.arange(nx, dtype=np.int64) * t
    r0 = -(-np.maximum(oy, 0) // t)
    r1 = np.minimum(oy + geometry.size, h) // t
    c0 = -(-np.maximum(ox, 0) // t)
    c1 = np.minimum(ox + geometry.size, w) // t
    return r0, r1, c0, c1


def _validity(offsets, tile, frame_dims, r0, r1, c0, c1):
    """(fy, fx, n) mask: offset valid for every covered tile of the field.

    Covered tiles form the rectangle [r0, r1) x [c0, c1); displacing that
    rectangle must keep it inside the key frame.  Fields with no covered
    tiles are invalid for every offset.
    """
    h, w = frame_dims
    dy = offsets[:, 0].astype(np.int64)[:, None]
    dx = offsets[:, 1].astype(np.int64)[:, None]
    row_ok = (r0[None, :] * tile + dy >= 0) & (r1[None, :] * tile + dy <= h)
    row_ok &= (r0 < r1)[None, :]
    col_ok = (c0[None, :] * tile + dx >= 0) & (c1[None, :] * tile + dx <= w)
    col_ok &= (c0 < c1)[None, :]
    return np.ascontiguousarray(row_ok.T[:, None, :] & col_ok.T[None, :, :])


def _finalize(sums, ok, offsets, r0, r1, c0, c1, tile, ops) -> MotionVectorField:
    """Argmin over valid offsets with deterministic tie-breaking."""
    mag2 = offsets[:, 0].astype(np.int64) ** 2 + offsets[:, 1].astype(np.int64) ** 2
    order = np.lexsort((offsets[:, 1], offsets[:, 0], mag2))
    ranked = np.where(ok[:, :, order], sums[:, :, order], NO_MATCH)
    best = ranked.argmin(axis=-1)
    min_sad = np.take_along_axis(ranked, best[:, :, None], axis=-1)[:, :, 0]
    matched = ok.any(axis=-1)
    min_sad[~matched] = NO_MATCH
    vectors = offsets[order][best].astype(np.int32)
    vectors[~matched] = 0
    covered_px = (
        np.maximum(r1 - r0, 0)[:, None] * np.maximum(c1 - c0, 0)[None, :]
    ) * (tile * tile)
    raw_error = int(min_sad[matched].sum()) if matched.any() else 0
    pixels = int(covered_px[matched].sum())
    aggregate = raw_error / pixels if pixels else 0.0
    total = float(np.hypot(vectors[:, :, 0], vectors[:, :, 1]).sum())
    return MotionVectorField(
        vectors=vectors,
        min_sad=min_sad,
        raw_error=raw_error,
        aggregate_error=aggregate,
        total_magnitude=total,
        ops=int(ops),
    )


def consume_tile_diffs(
    table: TileDiffTable,
    geometry: ReceptiveFieldGeometry,
    frame_dims: tuple[int, int],
) -> MotionVectorField:
    """Aggregate tile SADs into per-field motion vectors.

    A field's SAD at an offset is the sum of its covered tiles' SADs;
    consecutive fields share all but one tile column, so the consumer reuses
    the previous field's sum and adds/subtracts the leading/trailing columns.
    The returned ops field counts only the consumer's tile-sum adds/subtracts.
    """
    if table.tile != geometry.stride:
        raise ValueError("tile side must equal the receptive-field stride")
    h, w = frame_dims
    if table.tiles_y != h // table.tile or table.tiles_x != w // table.tile:
        raise ValueError("tile table does not cover the stated frame dims")
    grid = field_grid(geometry, frame_dims)
    r0, r1, c0, c1 = _coverage(geometry, frame_dims, grid)
    ok = _validity(table.offsets, table.tile, frame_dims, r0, r1, c0, c1)
    sums, ops = _kernels.field_sums(table.sad, r0, r1, c0, c1, ok)
    return _finalize(sums, ok, table.offsets, r0, r1, c0, c1, table.tile, ops)


def rfbme(
    current, key, geometry: ReceptiveFieldGeometry, search: SearchParams
) -> MotionVectorField:
    """Full producer/consumer motion estimation with tile-level reuse."""
    current = _as_frame(current)
    table = produce_tile_diffs(current, key, geometry.stride, search)
    mvf = consume_tile_diffs(table, geometry, current.shape)
    mvf.ops += table.ops
    return mvf


def exhaustive_bme(
    current, key, geometry: ReceptiveFieldGeometry, search: SearchParams
) -> MotionVectorField:
    """Oracle matcher: per-field SADs summed directly, no tile reuse.

    Same covered-tile footprint, offset validity, and tie-breaking as rfbme,
    so the two must agree exactly; only the operation count differs.
    """
    current = _as_frame(current)
    key = _as_frame(key)
    if current.shape != key.shape:
        raise ValueError(f"frame dims differ: {current.shape} vs {key.shape}")
    if geometry.stride > min(current.shape):
        raise ValueError("tile side larger than frame")
    offsets = search_offsets(search)
    grid = field_grid(geometry, current.shape)
    r0, r1, c0, c1 = _coverage(geometry, current.shape, grid)
    ok = _validity(offsets, geometry.stride, current.shape, r0, r1, c0, c1)
    t = geometry.stride
    sums, ops = _kernels.exhaustive_field_sads(
        current, key, offsets, r0 * t, r1 * t, c0 * t, c1 * t, ok
    )
    return _finalize(sums, ok, offsets, r0, r1, c0, c1, t, ops)
