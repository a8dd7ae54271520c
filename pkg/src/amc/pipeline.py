"""Frame-by-frame orchestration.

Key frames run the full prefix and store the quantized target activation
(run-length encoded) plus the frame's luma.  Predicted frames estimate
motion against the stored key frame and either warp the stored activation
(default) or reuse it unchanged (memoization mode); both paths then run the
suffix.  The key path routes its own activation through the same
quantize/dequantize step, so key/predicted differences isolate warping
error rather than quantization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import costs, tensor
from .fixedpoint import dequantize, quantize
from .motion import MotionVectorField, SearchParams, rfbme
from .sparse import SparseActivation, rle_decode, rle_encode
from .tensor import NetworkDescriptor, ReceptiveFieldGeometry, receptive_field_geometry
from .warp import scale_vector_field, warp

# BT.601 integer luma weights, /256.
_LUMA_WEIGHTS = (77, 150, 29)


def luma_bt601(rgb: np.ndarray) -> np.ndarray:
    """(3, h, w) uint8 RGB planes -> (h, w) uint8 luma."""
    r = rgb[0].astype(np.uint32)
    g = rgb[1].astype(np.uint32)
    b = rgb[2].astype(np.uint32)
    y = (_LUMA_WEIGHTS[0] * r + _LUMA_WEIGHTS[1] * g + _LUMA_WEIGHTS[2] * b) >> 8
    return y.astype(np.uint8)


@dataclass
class VideoFrame:
    """Network input planes plus the luma used for motion estimation."""

    pixels: np.ndarray  # (c, h, w) float32, raw 0..255 sample values
    luma: np.ndarray    # (h, w) uint8

    @classmethod
    def from_gray(cls, gray: np.ndarray) -> "VideoFrame":
        gray = np.ascontiguousarray(gray, dtype=np.uint8)
        return cls(pixels=gray[None].astype(np.float32), luma=gray)

    @classmethod
    def from_rgb(cls, rgb: np.ndarray, network_channels: int = 3) -> "VideoFrame":
        rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
        luma = luma_bt601(rgb)
        if network_channels == 1:
            pixels = luma[None].astype(np.float32)
        else:
            pixels = rgb.astype(np.float32)
        return cls(pixels=pixels, luma=luma)


@dataclass(frozen=True)
class KeyFramePolicy:
    """static:N | error:theta | motion:theta | always."""

    kind: str  # "static", "error", "motion", "always"
    rate: int = 1
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in ("static", "error", "motion", "always"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.kind == "static" and self.rate < 1:
            raise ValueError("static rate must be >= 1")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")

    @classmethod
    def parse(cls, spec: str) -> "KeyFramePolicy":
        if spec == "always":
            return cls(kind="always")
        kind, sep, arg = spec.partition(":")
        if not sep:
            raise ValueError(f"bad policy spec {spec!r}")
        if kind == "static":
            return cls(kind="static", rate=int(arg))
        if kind in ("error", "motion"):
            return cls(kind=kind, threshold=float(arg))
        raise ValueError(f"bad policy spec {spec!r}")


def decide(
    metrics: MotionVectorField | None,
    policy: KeyFramePolicy,
    frames_since_key: int,
) -> bool:
    """Key/predicted decision for a non-first frame."""
    if policy.kind == "always":
        return True
    if policy.kind == "static":
        return frames_since_key + 1 >= policy.rate
    if metrics is None:
        raise ValueError(f"{policy.kind} policy needs motion metrics")
    if policy.kind == "error":
        return metrics.aggregate_error > policy.threshold
    return metrics.total_magnitude > policy.threshold


@dataclass
class PipelineState:
    key_frame: np.ndarray            # luma of the last key frame
    key_activation: SparseActivation
    frames_since_key: int
    geometry: ReceptiveFieldGeometry
    search: SearchParams


@dataclass
class FrameDecision:
    is_key: bool
    metric_value: float
    vectors: MotionVectorField | None  # absent on forced key frames


@dataclass
class FrameMetrics:
    frame_index: int
    is_key: bool
    metric_value: float
    aggregate_error: float
    total_magnitude: float
    rfbme_ops: int
    warp_elements: int
    prefix_macs: int
    suffix_macs: int
    energy_mj: float = 0.0
    latency_ms: float = 0.0
    timestamp_s: float | None = None
    # Dense Q8.8 target activation of this frame (stored for keys, warped or
    # memoized for predicted frames).  run_stream drops it after the on_frame
    # callback to keep collected metrics small.
    target_q88: np.ndarray | None = field(default=None, repr=False)


@dataclass
class StreamReport:
    metrics: list[FrameMetrics]
    key_fraction: float
    cost: costs.CostReport


def default_search(geometry: ReceptiveFieldGeometry) -> SearchParams:
    """radius = 3 tiles, search stride = one tile side."""
    return SearchParams(radius=3 * geometry.stride, stride=geometry.stride)


def _metric_value(policy: KeyFramePolicy, mv: MotionVectorField | None) -> float:
    if mv is None:
        return 0.0
    if policy.kind == "motion":
        return mv.total_magnitude
    return mv.aggregate_error


def process_frame(
    frame: VideoFrame,
    state: PipelineState | None,
    net: NetworkDescriptor,
    policy: KeyFramePolicy,
    search: SearchParams | None = None,
    zero_epsilon: float = 0.0,
):
    """Run one frame; returns (output, decision, new_state, metrics).

    The first frame (state is None) is always a key frame.  Motion metrics
    are computed for every later frame, whatever the policy, so adaptive
    decisions and logging share one estimate.
    """
    if frame.pixels.shape != net.input_shape:
        raise ValueError(
            f"frame shape {frame.pixels.shape} != network input {net.input_shape}"
        )
    mv: MotionVectorField | None = None
    if state is None:
        geometry = receptive_field_geometry(net, net.target_layer)
        search = search if search is not None else default_search(geometry)
        is_key = True
    else:
        geometry, search = state.geometry, state.search
        mv = rfbme(frame.luma, state.key_frame, geometry, search)
        is_key = decide(mv, policy, state.frames_since_key)

    c, h, w = net.target_shape()
    if is_key:
        target = tensor.run_prefix(net, frame.pixels)
        stored = rle_encode(quantize(target), zero_epsilon)
        dense_q88 = rle_decode(stored)
        output = tensor.run_suffix(net, dequantize(dense_q88))
        new_state = PipelineState(
            key_frame=frame.luma.copy(),
            key_activation=stored,
            frames_since_key=0,
            geometry=geometry,
            search=search,
        )
        warp_elements = 0
        prefix_macs = costs.prefix_macs(net)
    else:
        assert state is not None and mv is not None
        if net.memoization_only:
            dense_q88 = rle_decode(state.key_activation)
            warp_elements = 0
        else:
            act_field = scale_vector_field(mv, geometry.stride, (h, w))
            dense_q88 = warp(state.key_activation, act_field)
            warp_elements = c * h * w
        output = tensor.run_suffix(net, dequantize(dense_q88))
        new_state = PipelineState(
            key_frame=state.key_frame,
            key_activation=state.key_activation,
            frames_since_key=state.frames_since_key + 1,
            geometry=geometry,
            search=search,
        )
        prefix_macs = 0

    decision = FrameDecision(
        is_key=is_key, metric_value=_metric_value(policy, mv), vectors=mv
    )
    metrics = FrameMetrics(
        frame_index=-1,  # assigned by run_stream
        is_key=is_key,
        metric_value=decision.metric_value,
        aggregate_error=mv.aggregate_error if mv is not None else 0.0,
        total_magnitude=mv.total_magnitude if mv is not None else 0.0,
        rfbme_ops=mv.ops if mv is not None else 0,
        warp_elements=warp_elements,
        prefix_macs=prefix_macs,
        suffix_macs=costs.suffix_macs(net),
        energy_mj=0.0,
        latency_ms=0.0,
        target_q88=dense_q88,
    )
    return output, decision, new_state, metrics


def run_stream(
    frames,
    net: NetworkDescriptor,
    policy: KeyFramePolicy,
    search: SearchParams | None = None,
    zero_epsilon: float = 0.0,
    params: costs.CostParams = costs.DEFAULT_PARAMS,
    cost_overrides: dict[int, tuple[float, float]] | None = None,
    fps: float | None = None,
    on_frame=None,
) -> StreamReport:
    """Fold process_frame over a frame sequence and attach cost estimates.

    Per-frame energy/latency use measured per-frame op counts; the summary
    CostReport uses the closed-form motion-estimation op count with the
    measured key-frame fraction.
    """
    table = costs.build_cost_table(net, None, params, cost_overrides)
    key_energy = sum(e.energy_mj for e in table)
    key_latency = sum(e.latency_ms for e in table)
    suffix_energy = sum(e.energy_mj for e in table[net.target_layer + 1 :])
    suffix_latency = sum(e.latency_ms for e in table[net.target_layer + 1 :])

    state: PipelineState | None = None
    collected: list[FrameMetrics] = []
    keys = 0
    for index, frame in enumerate(frames):
        output, decision, state, m = process_frame(
            frame, state, net, policy, search, zero_epsilon
        )
        m.frame_index = index
        if fps:
            m.timestamp_s = index / fps
        if m.is_key:
            keys += 1
            m.energy_mj = key_energy
            m.latency_ms = key_latency
        else:
            m.energy_mj = (
                suffix_energy
                + m.rfbme_ops * params.energy_per_me_op_mj
                + m.warp_elements * params.energy_per_warp_element_mj
            )
            m.latency_ms = (
                suffix_latency
                + m.rfbme_ops * params.latency_per_me_op_ms
                + m.warp_elements * params.latency_per_warp_element_ms
            )
        collected.append(m)
        if on_frame is not None:
            on_frame(index, output, decision, m)
        m.target_q88 = None
    if not collected:
        raise ValueError("empty frame sequence")

    key_fraction = keys / len(collected)
    geometry = state.geometry
    search_used = state.search
    map_dims = net.target_shape()[1:]
    report = costs.frame_costs(
        table,
        net,
        key_fraction,
        costs.rfbme_ops(geometry, search_used, map_dims),
        params,
        unoptimized_op_count=costs.unoptimized_ops(geometry, search_used, map_dims),
    )
    return StreamReport(metrics=collected, key_fraction=key_fraction, cost=report)
