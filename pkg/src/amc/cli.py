"""Command-line front end.

Subcommands: run (stream a frame directory through the pipeline), estimate
(cost-model report for a descriptor), codec (dense <-> sparse activation
files), flow (standalone motion estimation between two frames).  Reports are
JSON / JSON Lines for external plotting.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import costs, netpbm, sparse
from .motion import NO_MATCH, SearchParams, exhaustive_bme, rfbme
from .pipeline import KeyFramePolicy, VideoFrame, default_search, run_stream
from .tensor import (
    NetworkDescriptor,
    ReceptiveFieldGeometry,
    load_descriptor,
    output_shape,
    receptive_field_geometry,
)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_frames(frames_dir: Path, net: NetworkDescriptor):
    paths = sorted(
        p for p in frames_dir.iterdir() if p.suffix.lower() in (".pgm", ".ppm")
    )
    if not paths:
        _fail(f"no .pgm/.ppm frames in {frames_dir}")
    channels = net.input_shape[0]
    for path in paths:
        img = netpbm.read_pnm(path)
        if img.ndim == 2:
            frame = VideoFrame.from_gray(img)
        else:
            frame = VideoFrame.from_rgb(img, network_channels=channels)
        if frame.pixels.shape != net.input_shape:
            _fail(
                f"{path.name}: frame shape {frame.pixels.shape} does not match "
                f"network input {net.input_shape}"
            )
        yield frame


def _mvf_json(mv) -> dict:
    min_sad = [
        [None if mv.min_sad[y, x] == NO_MATCH else int(mv.min_sad[y, x]) for x in range(mv.fields_x)]
        for y in range(mv.fields_y)
    ]
    return {
        "fields_y": mv.fields_y,
        "fields_x": mv.fields_x,
        "vectors": mv.vectors.tolist(),
        "min_sad": min_sad,
        "raw_error": mv.raw_error,
        "aggregate_error": mv.aggregate_error,
        "total_magnitude": mv.total_magnitude,
        "ops": mv.ops,
    }


@click.group()
def main():
    """Activation motion compensation tools."""


@main.command()
@click.option("--net", "net_path", required=True, type=click.Path(exists=True))
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--policy", "policy_spec", required=True,
              help="static:N | error:THETA | motion:THETA | always")
@click.option("--radius", type=int, default=None, help="search radius in pixels")
@click.option("--search-stride", type=int, default=None, help="search grid step")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--memoize", is_flag=True, help="reuse the stored activation unwarped")
@click.option("--dump-flow", is_flag=True, help="write per-frame vector fields to OUT.flow.jsonl")
@click.option("--dump-activations", is_flag=True,
              help="write per-frame target activations next to OUT (sparse format)")
@click.option("--cost-table", "cost_table_path", type=click.Path(exists=True), default=None)
@click.option("--epsilon", type=float, default=0.0, help="near-zero squash threshold")
@click.option("--fps", type=float, default=None, help="annotate records with timestamps")
def run(net_path, frames_dir, policy_spec, radius, search_stride, out_path,
        memoize, dump_flow, dump_activations, cost_table_path, epsilon, fps):
    """Stream a frame directory through the pipeline; write JSON Lines."""
    try:
        net = load_descriptor(net_path)
        policy = KeyFramePolicy.parse(policy_spec)
        if memoize:
            net.memoization_only = True
        geometry = receptive_field_geometry(net, net.target_layer)
        search = default_search(geometry)
        if radius is not None or search_stride is not None:
            stride = search_stride if search_stride is not None else geometry.stride
            rad = radius if radius is not None else 3 * stride
            search = SearchParams(radius=rad, stride=stride)
        overrides = costs.load_cost_table_json(cost_table_path) if cost_table_path else None
    except (ValueError, OSError) as exc:
        _fail(str(exc))

    out_path = Path(out_path)
    flow_fh = open(out_path.with_suffix(out_path.suffix + ".flow.jsonl"), "w") if dump_flow else None

    records = []

    def on_frame(index, output, decision, m):
        records.append(
            {
                "frame_index": index,
                "is_key": m.is_key,
                "metric_value": m.metric_value,
                "aggregate_error": m.aggregate_error,
                "total_magnitude": m.total_magnitude,
                "estimated_energy_mj": m.energy_mj,
                "estimated_latency_ms": m.latency_ms,
                "ops": {
                    "rfbme": m.rfbme_ops,
                    "warp_elements": m.warp_elements,
                    "prefix_macs": m.prefix_macs,
                    "suffix_macs": m.suffix_macs,
                },
                **({"timestamp_s": m.timestamp_s} if m.timestamp_s is not None else {}),
            }
        )
        if flow_fh is not None:
            payload = {"frame_index": index}
            if decision.vectors is not None:
                payload.update(_mvf_json(decision.vectors))
            flow_fh.write(json.dumps(payload) + "\n")
        if dump_activations and m.target_q88 is not None:
            act_path = out_path.parent / f"{out_path.stem}_act{index:05d}.bin"
            sparse.write_file(sparse.rle_encode(m.target_q88), act_path)

    try:
        report = run_stream(
            _load_frames(Path(frames_dir), net),
            net,
            policy,
            search,
            zero_epsilon=epsilon,
            cost_overrides=overrides,
            fps=fps,
            on_frame=on_frame,
        )
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    finally:
        if flow_fh is not None:
            flow_fh.close()

    n = len(records)
    summary = {
        "summary": {
            "frames": n,
            "keys": sum(1 for r in records if r["is_key"]),
            "key_fraction": report.key_fraction,
            "avg_energy_mj": sum(r["estimated_energy_mj"] for r in records) / n,
            "avg_latency_ms": sum(r["estimated_latency_ms"] for r in records) / n,
            "orig_energy_mj": report.cost.key_energy_mj,
            "orig_latency_ms": report.cost.key_latency_ms,
            "pred_energy_mj": report.cost.pred_energy_mj,
            "pred_latency_ms": report.cost.pred_latency_ms,
            "model_avg_energy_mj": report.cost.avg_energy_mj,
            "model_avg_latency_ms": report.cost.avg_latency_ms,
            "cost_table": "file" if overrides else "mac-proportional-default",
        }
    }
    with open(out_path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
        fh.write(json.dumps(summary) + "\n")
    click.echo(f"processed {n} frames, key fraction {report.key_fraction:.3f}")


@main.command()
@click.option("--net", "net_path", required=True, type=click.Path(exists=True))
@click.option("--width", type=int, required=True)
@click.option("--height", type=int, required=True)
@click.option("--radius", type=int, default=None)
@click.option("--search-stride", type=int, default=None)
@click.option("--cost-table", "cost_table_path", type=click.Path(exists=True), default=None)
@click.option("--key-fraction", type=float, default=1.0, show_default=True)
def estimate(net_path, width, height, radius, search_stride, cost_table_path, key_fraction):
    """Print cost-model estimates for a descriptor as JSON."""
    try:
        net = load_descriptor(net_path)
        input_dims = (net.input_shape[0], height, width)
        geometry = receptive_field_geometry(net, net.target_layer)
        stride = search_stride if search_stride is not None else geometry.stride
        rad = radius if radius is not None else 3 * stride
        search = SearchParams(radius=rad, stride=stride)
        shape = input_dims
        for layer in net.prefix:
            shape = output_shape(layer, shape)
        map_dims = shape[1:]
        overrides = costs.load_cost_table_json(cost_table_path) if cost_table_path else None
        table = costs.build_cost_table(net, input_dims, overrides=overrides)
        unopt = costs.unoptimized_ops(geometry, search, map_dims)
        rfb = costs.rfbme_ops(geometry, search, map_dims)
        report = costs.frame_costs(
            table, net, key_fraction, rfb,
            unoptimized_op_count=unopt, input_dims=input_dims,
        )
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    doc = {
        "input_dims": list(input_dims),
        "target_layer": net.target_layer,
        "receptive_field": {"size": geometry.size, "stride": geometry.stride, "offset": geometry.offset},
        "map_dims": list(map_dims),
        "search": {"radius": search.radius, "stride": search.stride},
        "prefix_macs": report.prefix_macs,
        "suffix_macs": report.suffix_macs,
        "unoptimized_ops": unopt,
        "rfbme_ops": rfb,
        "key_energy_mj": report.key_energy_mj,
        "pred_energy_mj": report.pred_energy_mj,
        "avg_energy_mj": report.avg_energy_mj,
        "key_latency_ms": report.key_latency_ms,
        "pred_latency_ms": report.pred_latency_ms,
        "avg_latency_ms": report.avg_latency_ms,
        "key_fraction": key_fraction,
        "cost_table": "file" if overrides else "mac-proportional-default",
    }
    click.echo(json.dumps(doc, indent=2))


@main.command()
@click.argument("mode", type=click.Choice(["encode", "decode"]))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--epsilon", type=float, default=0.0, show_default=True)
def codec(mode, in_path, out_path, epsilon):
    """Convert between dense Q8.8 tensor files and the sparse format."""
    try:
        if mode == "encode":
            dense = sparse.read_dense(in_path)
            sparse.write_file(sparse.rle_encode(dense, epsilon), out_path)
        else:
            act = sparse.read_file(in_path)
            sparse.write_dense(sparse.rle_decode(act), out_path)
    except (ValueError, OSError) as exc:
        _fail(str(exc))


@main.command()
@click.option("--current", "current_path", required=True, type=click.Path(exists=True))
@click.option("--key", "key_path", required=True, type=click.Path(exists=True))
@click.option("--rf-size", type=int, required=True)
@click.option("--rf-stride", type=int, required=True)
@click.option("--radius", type=int, required=True)
@click.option("--search-stride", type=int, default=1, show_default=True)
@click.option("--check-oracle", is_flag=True,
              help="cross-check against the exhaustive matcher")
@click.option("--magnitude", "magnitude_path", type=click.Path(), default=None,
              help="write a PGM magnitude map")
def flow(current_path, key_path, rf_size, rf_stride, radius, search_stride,
         check_oracle, magnitude_path):
    """Motion-estimate two frames and print the vector field as JSON."""
    try:
        current = netpbm.read_pnm(current_path)
        key = netpbm.read_pnm(key_path)
        if current.ndim != 2 or key.ndim != 2:
            _fail("flow expects grayscale PGM inputs")
        geometry = ReceptiveFieldGeometry(size=rf_size, stride=rf_stride, offset=0)
        search = SearchParams(radius=radius, stride=search_stride)
        mv = rfbme(current, key, geometry, search)
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    if check_oracle:
        oracle = exhaustive_bme(current, key, geometry, search)
        if not (
            np.array_equal(mv.vectors, oracle.vectors)
            and np.array_equal(mv.min_sad, oracle.min_sad)
        ):
            _fail("rfbme disagrees with the exhaustive matcher")
    if magnitude_path:
        mag = np.hypot(mv.vectors[:, :, 0], mv.vectors[:, :, 1])
        top = float(mag.max())
        scaled = (mag * (255.0 / top) if top > 0 else mag).astype(np.uint8)
        netpbm.write_pgm(magnitude_path, scaled)
    click.echo(json.dumps(_mvf_json(mv)))


if __name__ == "__main__":
    main()
