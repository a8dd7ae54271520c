import numpy as np
import pytest

from amc import tensor


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


def make_conv(rng, in_ch, out_ch, k=3, stride=1, padding=0, scale=0.1):
    w = (rng.normal(size=(out_ch, in_ch, k, k)) * scale).astype(np.float32)
    b = (rng.normal(size=out_ch) * scale).astype(np.float32)
    return tensor.conv(w, b, stride=stride, padding=padding)


def random_conv_relu_prefix(rng, strides, channels=2, k=3, padding=0, scale=0.1):
    """conv/relu stack with the given per-conv strides; target = last relu."""
    layers = []
    in_ch = 1
    for s in strides:
        layers.append(make_conv(rng, in_ch, channels, k=k, stride=s, padding=padding, scale=scale))
        layers.append(tensor.relu(channels))
        in_ch = channels
    return tensor.NetworkDescriptor(
        layers=layers, target_layer=len(layers) - 1, input_shape=(1, 64, 64)
    )
