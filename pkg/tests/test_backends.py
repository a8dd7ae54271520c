"""Bit-parity between the compiled kernels and the numpy fallback.

float32 kernels must match bit for bit (pinned accumulation order, no FP
contraction); integer kernels must match exactly; rolling-sum op counts from
the native consumer must equal the fallback's closed-form accounting.
"""

import numpy as np
import pytest

from amc._kernels import fallback

native = pytest.importorskip("amc._kernels._native")


@pytest.fixture
def rng():
    return np.random.default_rng(99)


class TestConvParity:
    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 0), (2, 1), (3, 2)])
    def test_bitwise(self, rng, stride, padding):
        x = rng.normal(size=(3, 17, 13)).astype(np.float32)
        w = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)
        b = rng.normal(size=4).astype(np.float32)
        a = fallback.conv_forward(x, w, b, stride, padding)
        n = native.conv_forward(x, w, b, stride, padding)
        assert a.dtype == n.dtype == np.float32
        assert np.array_equal(a.view(np.uint32), n.view(np.uint32))  # bit-level

    def test_large_kernel(self, rng):
        x = rng.normal(size=(2, 12, 12)).astype(np.float32)
        w = rng.normal(size=(1, 2, 5, 5)).astype(np.float32)
        b = np.zeros(1, np.float32)
        assert np.array_equal(
            fallback.conv_forward(x, w, b, 2, 2).view(np.uint32),
            native.conv_forward(x, w, b, 2, 2).view(np.uint32),
        )


class TestPoolParity:
    @pytest.mark.parametrize("k,stride,padding", [(2, 2, 0), (2, 1, 0), (3, 2, 1), (2, 2, 1)])
    def test_equal(self, rng, k, stride, padding):
        x = rng.normal(size=(3, 11, 14)).astype(np.float32)
        a = fallback.maxpool_forward(x, k, k, stride, padding)
        n = native.maxpool_forward(x, k, k, stride, padding)
        assert np.array_equal(a, n)


class TestSadParity:
    def test_table(self, rng):
        cur = rng.integers(0, 256, (37, 29)).astype(np.uint8)
        key = rng.integers(0, 256, (37, 29)).astype(np.uint8)
        offsets = np.ascontiguousarray(
            np.stack(np.meshgrid(np.arange(-6, 7, 3), np.arange(-6, 7, 3), indexing="ij"), -1)
            .reshape(-1, 2).astype(np.int32)
        )
        sa, va = fallback.tile_sad_table(cur, key, 4, offsets)
        sn, vn = native.tile_sad_table(cur, key, 4, offsets)
        assert np.array_equal(va, vn)
        assert np.array_equal(sa, sn)


class TestConsumerParity:
    def test_sums_and_rolling_op_count(self, rng):
        from amc.motion import SearchParams, _coverage, _validity, field_grid, produce_tile_diffs
        from amc.tensor import ReceptiveFieldGeometry

        cur = rng.integers(0, 256, (40, 44)).astype(np.uint8)
        key = rng.integers(0, 256, (40, 44)).astype(np.uint8)
        geo = ReceptiveFieldGeometry(size=12, stride=4, offset=-2)
        table = produce_tile_diffs(cur, key, 4, SearchParams(radius=8, stride=4))
        grid = field_grid(geo, cur.shape)
        r0, r1, c0, c1 = _coverage(geo, cur.shape, grid)
        ok = _validity(table.offsets, 4, cur.shape, r0, r1, c0, c1)
        sa, opsa = fallback.field_sums(table.sad, r0, r1, c0, c1, ok)
        sn, opsn = native.field_sums(table.sad, r0, r1, c0, c1, ok)
        assert np.array_equal(sa, sn)
        assert opsa == opsn  # closed form == literal rolling walk


class TestExhaustiveParity:
    def test_sums_and_ops(self, rng):
        from amc.motion import SearchParams, _coverage, _validity, field_grid, search_offsets
        from amc.tensor import ReceptiveFieldGeometry

        cur = rng.integers(0, 256, (36, 36)).astype(np.uint8)
        key = rng.integers(0, 256, (36, 36)).astype(np.uint8)
        geo = ReceptiveFieldGeometry(size=8, stride=4, offset=0)
        offsets = search_offsets(SearchParams(radius=8, stride=4))
        grid = field_grid(geo, cur.shape)
        r0, r1, c0, c1 = _coverage(geo, cur.shape, grid)
        ok = _validity(offsets, 4, cur.shape, r0, r1, c0, c1)
        sa, opsa = fallback.exhaustive_field_sads(cur, key, offsets, r0 * 4, r1 * 4, c0 * 4, c1 * 4, ok)
        sn, opsn = native.exhaustive_field_sads(cur, key, offsets, r0 * 4, r1 * 4, c0 * 4, c1 * 4, ok)
        assert np.array_equal(sa, sn)
        assert opsa == opsn


class TestWarpParity:
    def test_exact(self, rng):
        act = rng.integers(-32768, 32768, (3, 19, 23)).astype(np.int16)
        field = rng.integers(-5 * 256, 5 * 256, (19, 23, 2)).astype(np.int16)
        a = fallback.warp_bilinear(act, field)
        n = native.warp_bilinear(act, field)
        assert np.array_equal(a, n)

    def test_extreme_vectors(self, rng):
        act = rng.integers(-32768, 32768, (1, 4, 4)).astype(np.int16)
        field = np.array([[[-32768, 32767]] * 4] * 4, np.int16)
        assert np.array_equal(
            fallback.warp_bilinear(act, field), native.warp_bilinear(act, field)
        )
