"""Key-frame policies, per-frame dispatch, and stream folding."""

import numpy as np
import pytest

from amc import tensor
from amc.fixedpoint import dequantize, quantize
from amc.motion import SearchParams
from amc.pipeline import (
    KeyFramePolicy,
    VideoFrame,
    decide,
    luma_bt601,
    process_frame,
    run_stream,
)
from amc.sparse import rle_decode

from conftest import make_conv


def toy_net(rng, h=32, w=32, with_suffix=False, memoize=False):
    layers = [
        make_conv(rng, 1, 2, stride=2, scale=0.01),
        tensor.relu(2),
    ]
    target = 1
    if with_suffix:
        layers += [tensor.maxpool(2, 2, channels=2), tensor.relu(2)]
    return tensor.NetworkDescriptor(
        layers=layers, target_layer=target, input_shape=(1, h, w), memoization_only=memoize
    )


def gray_frames(rng, n, h=32, w=32):
    return [VideoFrame.from_gray(rng.integers(0, 256, (h, w)).astype(np.uint8)) for _ in range(n)]


class TestDecide:
    def test_first_frame_is_key(self, rng):
        net = toy_net(rng)
        frame = gray_frames(rng, 1)[0]
        _, decision, state, _ = process_frame(frame, None, net, KeyFramePolicy.parse("error:0"))
        assert decision.is_key
        assert decision.vectors is None
        assert state.frames_since_key == 0

    def test_infinite_error_threshold_never_keys(self, rng):
        net = toy_net(rng)
        policy = KeyFramePolicy(kind="error", threshold=float("inf"))
        frames = gray_frames(rng, 4)
        state = None
        for i, f in enumerate(frames):
            _, decision, state, _ = process_frame(f, state, net, policy)
            assert decision.is_key == (i == 0)

    def test_identical_frames_under_motion_threshold(self, rng):
        net = toy_net(rng)
        policy = KeyFramePolicy(kind="motion", threshold=0.5)
        frame = gray_frames(rng, 1)[0]
        _, _, state, _ = process_frame(frame, None, net, policy)
        _, decision, _, m = process_frame(frame, state, net, policy)
        assert not decision.is_key
        assert m.total_magnitude == 0.0

    def test_static_arithmetic(self):
        policy = KeyFramePolicy(kind="static", rate=3)
        assert not decide(None, policy, 0)
        assert not decide(None, policy, 1)
        assert decide(None, policy, 2)

    def test_adaptive_policies_need_metrics(self):
        with pytest.raises(ValueError, match="metrics"):
            decide(None, KeyFramePolicy(kind="error", threshold=1.0), 0)

    def test_parse(self):
        assert KeyFramePolicy.parse("static:4").rate == 4
        assert KeyFramePolicy.parse("error:1.5").threshold == 1.5
        assert KeyFramePolicy.parse("motion:30").kind == "motion"
        assert KeyFramePolicy.parse("always").kind == "always"
        with pytest.raises(ValueError):
            KeyFramePolicy.parse("sometimes")
        with pytest.raises(ValueError):
            KeyFramePolicy.parse("static:0")


class TestProcessFrame:
    def test_always_key_equals_quantized_full_forward(self, rng):
        net = toy_net(rng, with_suffix=True)
        policy = KeyFramePolicy(kind="always")
        state = None
        for frame in gray_frames(rng, 3):
            out, decision, state, _ = process_frame(frame, state, net, policy)
            assert decision.is_key
            reference = tensor.run_suffix(
                net, dequantize(quantize(tensor.run_prefix(net, frame.pixels)))
            )
            assert np.array_equal(out, reference)

    def test_memoization_repeats_key_output(self, rng):
        net = toy_net(rng, with_suffix=True, memoize=True)
        policy = KeyFramePolicy(kind="static", rate=100)
        frame = gray_frames(rng, 1)[0]
        key_out, _, state, _ = process_frame(frame, None, net, policy)
        for _ in range(3):
            out, decision, state, m = process_frame(frame, state, net, policy)
            assert not decision.is_key
            assert m.warp_elements == 0
            assert np.array_equal(out, key_out)

    def test_state_freshness_identity_warp(self, rng):
        # identical frame right after a key: zero field + identity warp
        net = toy_net(rng)
        policy = KeyFramePolicy(kind="static", rate=100)
        frame = gray_frames(rng, 1)[0]
        _, _, state, _ = process_frame(frame, None, net, policy)
        stored = rle_decode(state.key_activation)
        _, decision, _, m = process_frame(frame, state, net, policy)
        assert not decision.is_key
        assert np.array_equal(m.target_q88, stored)

    def test_translating_video_interior_within_one_ulp(self, rng):
        # miniature of the end-to-end fidelity criterion
        h = w = 48
        base = rng.integers(0, 256, (h, w)).astype(np.uint8)
        net = toy_net(rng, h, w)
        from amc.tensor import receptive_field_geometry
        geo = receptive_field_geometry(net, net.target_layer)
        S = geo.stride
        policy = KeyFramePolicy(kind="static", rate=1000)
        search = SearchParams(radius=8 * S, stride=S)
        state = None
        for t in range(5):
            frame = VideoFrame.from_gray(np.roll(base, t * S, axis=1))
            _, _, state, m = process_frame(frame, state, net, policy, search)
            if t == 0:
                continue
            fresh = quantize(tensor.run_prefix(net, frame.pixels))
            _, ny, nx = net.target_shape()
            oy = geo.offset + np.arange(ny) * S
            ox = geo.offset + np.arange(nx) * S
            mask = (
                ((oy >= 0) & (oy + geo.size <= h))[:, None]
                & ((ox - t * S >= 0) & (ox + geo.size <= w))[None, :]
            )
            diff = np.abs(m.target_q88.astype(int) - fresh.astype(int))[:, mask]
            assert diff.max() <= 1

    def test_padded_prefix_negative_offset_grid(self, rng):
        # padding pulls the receptive-field origin outside the image; the
        # motion-field grid must still line up with the activation dims
        w1 = (rng.normal(size=(2, 1, 3, 3)) * 0.02).astype(np.float32)
        w2 = (rng.normal(size=(2, 2, 3, 3)) * 0.05).astype(np.float32)
        layers = [
            tensor.conv(w1, stride=2, padding=1), tensor.relu(2),
            tensor.conv(w2, stride=1, padding=1), tensor.relu(2),
        ]
        net = tensor.NetworkDescriptor(layers=layers, target_layer=3, input_shape=(1, 33, 47))
        from amc.motion import field_grid
        from amc.tensor import receptive_field_geometry
        g = receptive_field_geometry(net, 3)
        assert g.offset < 0
        assert field_grid(g, (33, 47)) == net.target_shape()[1:]
        frames = [
            VideoFrame.from_gray(rng.integers(0, 256, (33, 47)).astype(np.uint8))
            for _ in range(4)
        ]
        report = run_stream(frames, net, KeyFramePolicy.parse("static:2"),
                            SearchParams(radius=4, stride=2))
        assert [m.is_key for m in report.metrics] == [True, False, True, False]

    def test_shape_mismatch_rejected(self, rng):
        net = toy_net(rng)
        frame = VideoFrame.from_gray(np.zeros((16, 16), np.uint8))
        with pytest.raises(ValueError, match="frame shape"):
            process_frame(frame, None, net, KeyFramePolicy(kind="always"))


class TestRunStream:
    def test_single_frame_key_fraction_one(self, rng):
        net = toy_net(rng)
        report = run_stream(gray_frames(rng, 1), net, KeyFramePolicy.parse("error:1"))
        assert report.key_fraction == 1.0
        assert report.metrics[0].is_key

    def test_static_two_over_ten(self, rng):
        net = toy_net(rng)
        report = run_stream(gray_frames(rng, 10), net, KeyFramePolicy.parse("static:2"))
        assert report.key_fraction == 0.5
        assert [m.is_key for m in report.metrics] == [True, False] * 5

    def test_static_exact_key_counts(self, rng):
        net = toy_net(rng)
        frames = gray_frames(rng, 12)
        for n in (1, 3, 5):
            report = run_stream(frames, net, KeyFramePolicy(kind="static", rate=n))
            assert sum(m.is_key for m in report.metrics) == -(-12 // n)

    def test_determinism(self, rng):
        net = toy_net(rng)
        frames = gray_frames(rng, 6)
        policy = KeyFramePolicy(kind="error", threshold=10.0)
        r1 = run_stream(frames, net, policy)
        r2 = run_stream(frames, net, policy)
        assert [m.is_key for m in r1.metrics] == [m.is_key for m in r2.metrics]
        assert [m.metric_value for m in r1.metrics] == [m.metric_value for m in r2.metrics]
        assert [m.energy_mj for m in r1.metrics] == [m.energy_mj for m in r2.metrics]

    def test_threshold_sweep_monotone(self, rng):
        # drifting stream: error metric grows with time since the key frame
        h = w = 32
        base = rng.integers(0, 150, (h, w)).astype(np.uint8)
        frames = [
            VideoFrame.from_gray(np.clip(base.astype(int) + 2 * t, 0, 255).astype(np.uint8))
            for t in range(20)
        ]
        net = toy_net(rng, h, w)
        counts = []
        for theta in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 1e9]:
            report = run_stream(frames, net, KeyFramePolicy(kind="error", threshold=theta))
            counts.append(sum(m.is_key for m in report.metrics))
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 20 and counts[-1] == 1

    def test_empty_stream_rejected(self, rng):
        net = toy_net(rng)
        with pytest.raises(ValueError, match="empty"):
            run_stream([], net, KeyFramePolicy(kind="always"))

    def test_cost_report_attached(self, rng):
        net = toy_net(rng, with_suffix=True)
        report = run_stream(gray_frames(rng, 4), net, KeyFramePolicy.parse("static:2"))
        assert report.cost.key_fraction == 0.5
        key_frames = [m for m in report.metrics if m.is_key]
        assert all(m.energy_mj == report.cost.key_energy_mj for m in key_frames)
        pred = [m for m in report.metrics if not m.is_key]
        assert all(m.energy_mj > 0 for m in pred)
        assert all(m.rfbme_ops > 0 for m in report.metrics[1:])


class TestClassifierSuffix:
    def test_fc_suffix_runs_on_both_paths(self, rng):
        # conv/relu prefix, fc suffix: predicted frames skip the prefix but
        # still produce a classifier-shaped output
        conv_layer = make_conv(rng, 1, 2, stride=4, scale=0.01)
        net_shape = (2, 8, 8)
        w = (rng.normal(size=(3, 128)) * 0.05).astype(np.float32)
        layers = [
            conv_layer,
            tensor.relu(2),
            tensor.fc(w, in_shape=net_shape),
        ]
        net = tensor.NetworkDescriptor(layers=layers, target_layer=1, input_shape=(1, 31, 31))
        assert net.target_shape() == net_shape
        frames = gray_frames(rng, 3, 31, 31)
        report = run_stream(frames, net, KeyFramePolicy(kind="static", rate=100))
        assert [m.is_key for m in report.metrics] == [True, False, False]
        assert report.cost.suffix_macs == 3 * 128
        out, _, state, _ = process_frame(frames[0], None, net, KeyFramePolicy(kind="always"))
        assert out.shape == (3, 1, 1)


class TestColorInput:
    def test_rgb_network_with_luma_motion(self, rng):
        # 3-channel network input; motion estimation runs on BT.601 luma
        w = (rng.normal(size=(2, 3, 3, 3)) * 0.01).astype(np.float32)
        layers = [tensor.conv(w, stride=2), tensor.relu(2)]
        net = tensor.NetworkDescriptor(layers=layers, target_layer=1, input_shape=(3, 32, 32))
        frames = [
            VideoFrame.from_rgb(rng.integers(0, 256, (3, 32, 32)).astype(np.uint8))
            for _ in range(3)
        ]
        report = run_stream(frames, net, KeyFramePolicy.parse("static:2"))
        assert [m.is_key for m in report.metrics] == [True, False, True]
        assert report.metrics[1].rfbme_ops > 0

    def test_padded_pool_suffix(self, rng):
        layers = [
            make_conv(rng, 1, 2, stride=2, scale=0.01),
            tensor.relu(2),
            tensor.maxpool(3, 2, padding=1, channels=2),
        ]
        net = tensor.NetworkDescriptor(layers=layers, target_layer=1, input_shape=(1, 32, 32))
        frames = gray_frames(rng, 2)
        report = run_stream(frames, net, KeyFramePolicy.parse("static:100"))
        assert len(report.metrics) == 2
        out, _, _, _ = process_frame(frames[0], None, net, KeyFramePolicy(kind="always"))
        assert out.shape == (2, 8, 8)


class TestLuma:
    def test_bt601_integer_weights(self):
        rgb = np.zeros((3, 1, 1), np.uint8)
        rgb[0] = 255
        assert luma_bt601(rgb)[0, 0] == (77 * 255) >> 8
        rgb = np.full((3, 2, 2), 255, np.uint8)
        assert (luma_bt601(rgb) == 255).all()

    def test_rgb_frame_channels(self):
        rgb = np.random.default_rng(0).integers(0, 256, (3, 4, 4)).astype(np.uint8)
        f3 = VideoFrame.from_rgb(rgb, network_channels=3)
        assert f3.pixels.shape == (3, 4, 4)
        f1 = VideoFrame.from_rgb(rgb, network_channels=1)
        assert f1.pixels.shape == (1, 4, 4)
        assert np.array_equal(f1.pixels[0], f1.luma.astype(np.float32))
