"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Sizes are chosen to resemble real use (video-scale frames, mid-network
activation volumes) rather than the miniatures the tests run on.
"""

import argparse
import time

import numpy as np

from amc._kernels import fallback

try:
    from amc._kernels import _native as native
except ImportError:
    native = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def build_cases(rng):
    cases = []

    x = rng.normal(size=(16, 96, 96)).astype(np.float32)
    w = rng.normal(size=(32, 16, 3, 3)).astype(np.float32)
    b = rng.normal(size=32).astype(np.float32)
    cases.append(("conv 16->32ch 3x3 @96x96", lambda m: m.conv_forward(x, w, b, 1, 1)))

    px = rng.normal(size=(32, 96, 96)).astype(np.float32)
    cases.append(("maxpool 2x2/2 @32ch 96x96", lambda m: m.maxpool_forward(px, 2, 2, 2, 0)))

    cur = rng.integers(0, 256, (256, 256)).astype(np.uint8)
    key = rng.integers(0, 256, (256, 256)).astype(np.uint8)
    span = np.arange(-16, 17, 8, dtype=np.int32)
    offsets = np.ascontiguousarray(
        np.stack(np.meshgrid(span, span, indexing="ij"), -1).reshape(-1, 2)
    )
    cases.append(("tile SAD 8px tiles r16/s8 @256x256",
                  lambda m: m.tile_sad_table(cur, key, 8, offsets)))

    from amc.motion import SearchParams, _coverage, _validity, field_grid, produce_tile_diffs
    from amc.tensor import ReceptiveFieldGeometry

    geo = ReceptiveFieldGeometry(size=32, stride=8, offset=0)
    search = SearchParams(radius=16, stride=8)
    table = produce_tile_diffs(cur, key, 8, search)
    grid = field_grid(geo, cur.shape)
    r0, r1, c0, c1 = _coverage(geo, cur.shape, grid)
    ok = _validity(table.offsets, 8, cur.shape, r0, r1, c0, c1)
    cases.append(("consumer rolling sums (same table)",
                  lambda m: m.field_sums(table.sad, r0, r1, c0, c1, ok)))

    cases.append(("exhaustive field SADs (same search)",
                  lambda m: m.exhaustive_field_sads(
                      cur, key, table.offsets, r0 * 8, r1 * 8, c0 * 8, c1 * 8, ok)))

    act = rng.integers(-32768, 32768, (64, 56, 56)).astype(np.int16)
    field = rng.integers(-4 * 256, 4 * 256, (56, 56, 2)).astype(np.int16)
    cases.append(("bilinear warp 64ch 56x56", lambda m: m.warp_bilinear(act, field)))

    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    cases = build_cases(rng)

    name_w = max(len(name) for name, _ in cases)
    print(f"{'kernel':<{name_w}}  {'fallback':>10}  {'native':>10}  {'speedup':>8}")
    for name, fn in cases:
        t_fb = best_of(lambda: fn(fallback), args.repeats)
        if native is None:
            print(f"{name:<{name_w}}  {t_fb * 1e3:>8.2f}ms  {'n/a':>10}  {'n/a':>8}")
            continue
        t_nat = best_of(lambda: fn(native), args.repeats)
        print(
            f"{name:<{name_w}}  {t_fb * 1e3:>8.2f}ms  {t_nat * 1e3:>8.2f}ms"
            f"  {t_fb / t_nat:>7.1f}x"
        )
    if native is None:
        print("\ncompiled backend not built; showing fallback only")


if __name__ == "__main__":
    main()
