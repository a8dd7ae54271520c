"""Dense network execution: layers, descriptors, receptive-field geometry.

Activation volumes are channel-major float32 arrays of shape
(channels, height, width).  Layer math runs in 32-bit floats with a pinned
accumulation order (filter positions row-major, then input channels) so that
translated inputs reproduce translated outputs bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

CONV = "conv"
MAXPOOL = "maxpool"
RELU = "relu"
FC = "fc"
SPATIAL_KINDS = (CONV, MAXPOOL, RELU)


def as_tensor3(x) -> np.ndarray:
    """Validate and normalize a (channels, height, width) float32 volume."""
    arr = np.ascontiguousarray(x, dtype=np.float32)
    if arr.ndim != 3:
        raise ValueError(f"expected a 3-d (c, h, w) volume, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"all dimensions must be >= 1, got {arr.shape}")
    return arr


@dataclass
class LayerSpec:
    """One network layer.

    conv/fc layers carry weights of shape (out_channels, in_channels, kh, kw)
    (fc kernels span the entire input extent); maxpool/relu carry none.
    weights may be None for shape-only descriptors used by the cost model.
    """

    kind: str
    kernel: tuple[int, int] = (1, 1)
    stride: int = 1
    padding: int = 0
    in_channels: int = 1
    out_channels: int = 1
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (CONV, MAXPOOL, RELU, FC):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1 or self.padding < 0:
            raise ValueError("stride must be >= 1 and padding >= 0")
        if min(self.kernel) < 1:
            raise ValueError("kernel dims must be >= 1")
        if self.kind == RELU:
            if self.kernel != (1, 1) or self.stride != 1 or self.padding != 0:
                raise ValueError("relu layers must have kernel (1,1), stride 1, padding 0")
        if self.kind in (MAXPOOL, RELU):
            if self.weights is not None or self.bias is not None:
                raise ValueError(f"{self.kind} layers carry no weights")
            return
        kh, kw = self.kernel
        if self.weights is not None:
            self.weights = np.ascontiguousarray(self.weights, dtype=np.float32)
            want = (self.out_channels, self.in_channels, kh, kw)
            if self.weights.shape != want:
                raise ValueError(
                    f"weights shape {self.weights.shape} != expected {want}"
                )
            if self.bias is None:
                self.bias = np.zeros(self.out_channels, dtype=np.float32)
        if self.bias is not None:
            self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
            if self.bias.shape != (self.out_channels,):
                raise ValueError("bias must have one value per output channel")

    @property
    def has_weights(self) -> bool:
        return self.weights is not None


def conv(weights, bias=None, stride=1, padding=0) -> LayerSpec:
    w = np.ascontiguousarray(weights, dtype=np.float32)
    return LayerSpec(
        kind=CONV,
        kernel=(w.shape[2], w.shape[3]),
        stride=stride,
        padding=padding,
        in_channels=w.shape[1],
        out_channels=w.shape[0],
        weights=w,
        bias=bias,
    )


def maxpool(kernel=2, stride=None, padding=0, channels=1) -> LayerSpec:
    k = (kernel, kernel) if isinstance(kernel, int) else tuple(kernel)
    return LayerSpec(
        kind=MAXPOOL,
        kernel=k,
        stride=stride if stride is not None else k[0],
        padding=padding,
        in_channels=channels,
        out_channels=channels,
    )


def relu(channels=1) -> LayerSpec:
    return LayerSpec(kind=RELU, in_channels=channels, out_channels=channels)


def fc(weights, bias=None, in_shape=None) -> LayerSpec:
    """Fully-connected layer; weights (out, flat) with flat = c*h*w of the input."""
    w = np.ascontiguousarray(weights, dtype=np.float32)
    if in_shape is None:
        in_shape = (1, 1, w.shape[1])
    c, h, wd = in_shape
    if c * h * wd != w.shape[1]:
        raise ValueError("fc weight columns must match the flattened input extent")
    return LayerSpec(
        kind=FC,
        kernel=(h, wd),
        stride=1,
        padding=0,
        in_channels=c,
        out_channels=w.shape[0],
        weights=w.reshape(w.shape[0], c, h, wd),
        bias=bias,
    )


def output_shape(layer: LayerSpec, in_shape: tuple[int, int, int]) -> tuple[int, int, int]:
    """Output (c, h, w) of a layer, validating dims along the way."""
    c, h, w = in_shape
    if layer.kind == RELU:
        return in_shape
    if layer.kind == FC:
        kh, kw = layer.kernel
        if (c, h, w) != (layer.in_channels, kh, kw):
            raise ValueError(
                f"fc layer expects input {(layer.in_channels, kh, kw)}, got {in_shape}"
            )
        return (layer.out_channels, 1, 1)
    kh, kw = layer.kernel
    if layer.kind == CONV and c != layer.in_channels:
        raise ValueError(f"conv layer expects {layer.in_channels} channels, got {c}")
    if layer.kind == MAXPOOL and layer.padding >= min(kh, kw):
        raise ValueError("maxpool padding must be smaller than the kernel")
    oh = (h + 2 * layer.padding - kh) // layer.stride + 1
    ow = (w + 2 * layer.padding - kw) // layer.stride + 1
    if oh < 1 or ow < 1:
        raise ValueError(f"non-positive output dimension for kernel {layer.kernel} on {in_shape}")
    oc = layer.out_channels if layer.kind == CONV else c
    return (oc, oh, ow)


@dataclass
class NetworkDescriptor:
    """An ordered layer stack split at ``target_layer``.

    Layers 0..target_layer form the prefix that executes on key frames only;
    the remainder is the suffix that executes on every frame.
    """

    layers: list[LayerSpec]
    target_layer: int
    input_shape: tuple[int, int, int]
    memoization_only: bool = False

    def __post_init__(self):
        if not self.layers:
            raise ValueError("descriptor needs at least one layer")
        if not 0 <= self.target_layer < len(self.layers):
            raise ValueError("target_layer out of range")
        for i, layer in enumerate(self.layers[: self.target_layer + 1]):
            if layer.kind == FC:
                raise ValueError(f"fc layer at index {i} cannot precede the target layer")
        self.input_shape = tuple(int(d) for d in self.input_shape)

    @property
    def prefix(self) -> list[LayerSpec]:
        return self.layers[: self.target_layer + 1]

    @property
    def suffix(self) -> list[LayerSpec]:
        return self.layers[self.target_layer + 1 :]

    def shape_after(self, layer_index: int) -> tuple[int, int, int]:
        shape = self.input_shape
        for layer in self.layers[: layer_index + 1]:
            shape = output_shape(layer, shape)
        return shape

    def target_shape(self) -> tuple[int, int, int]:
        return self.shape_after(self.target_layer)


def conv_forward(input: np.ndarray, layer: LayerSpec) -> np.ndarray:
    if layer.kind != CONV:
        raise ValueError("conv_forward requires a conv layer")
    if layer.weights is None:
        raise ValueError("conv layer has no weights (shape-only descriptor)")
    x = as_tensor3(input)
    output_shape(layer, x.shape)
    return _kernels.conv_forward(x, layer.weights, layer.bias, layer.stride, layer.padding)


def maxpool_forward(input: np.ndarray, layer: LayerSpec) -> np.ndarray:
    if layer.kind != MAXPOOL:
        raise ValueError("maxpool_forward requires a maxpool layer")
    x = as_tensor3(input)
    output_shape(layer, x.shape)
    kh, kw = layer.kernel
    return _kernels.maxpool_forward(x, kh, kw, layer.stride, layer.padding)


def relu_forward(input: np.ndarray) -> np.ndarray:
    x = as_tensor3(input)
    return np.maximum(x, np.float32(0.0))


def fc_forward(input: np.ndarray, layer: LayerSpec) -> np.ndarray:
    if layer.kind != FC:
        raise ValueError("fc_forward requires an fc layer")
    if layer.weights is None:
        raise ValueError("fc layer has no weights (shape-only descriptor)")
    x = as_tensor3(input)
    flat = x.ravel()
    w2 = layer.weights.reshape(layer.out_channels, -1)
    if flat.shape[0] != w2.shape[1]:
        raise ValueError(f"fc input length {flat.shape[0]} != declared {w2.shape[1]}")
    y = w2 @ flat + layer.bias
    return y.reshape(layer.out_channels, 1, 1).astype(np.float32)


def layer_forward(input: np.ndarray, layer: LayerSpec) -> np.ndarray:
    if layer.kind == CONV:
        return conv_forward(input, layer)
    if layer.kind == MAXPOOL:
        return maxpool_forward(input, layer)
    if layer.kind == RELU:
        return relu_forward(input)
    return fc_forward(input, layer)


def run_prefix(net: NetworkDescriptor, frame: np.ndarray) -> np.ndarray:
    """Execute layers 0..target_layer, returning the target activation."""
    x = as_tensor3(frame)
    if x.shape != net.input_shape:
        raise ValueError(f"frame shape {x.shape} != network input {net.input_shape}")
    for layer in net.prefix:
        x = layer_forward(x, layer)
    return x


def run_suffix(net: NetworkDescriptor, target_activation: np.ndarray) -> np.ndarray:
    """Execute the layers after the target layer."""
    x = as_tensor3(target_activation)
    if x.shape != net.target_shape():
        raise ValueError(
            f"activation shape {x.shape} != target-layer output {net.target_shape()}"
        )
    for layer in net.suffix:
        x = layer_forward(x, layer)
    return x


def forward(net: NetworkDescriptor, frame: np.ndarray) -> np.ndarray:
    return run_suffix(net, run_prefix(net, frame))


@dataclass(frozen=True)
class ReceptiveFieldGeometry:
    """Input-pixel footprint of one target-layer activation value.

    size: square side in pixels; stride: pixels between neighboring fields;
    offset: signed position of the first field's origin (negative when
    accumulated padding pulls it outside the image).
    """

    size: int
    stride: int
    offset: int


def receptive_field_geometry(net: NetworkDescriptor, layer_index: int) -> ReceptiveFieldGeometry:
    """Compose per-layer (kernel, stride, padding) into the receptive field.

    size' = size + (k - 1) * jump, jump' = jump * s, offset' = offset - p * jump,
    starting from (size=1, jump=1, offset=0).
    """
    size, jump, offset = 1, 1, 0
    for i, layer in enumerate(net.layers[: layer_index + 1]):
        if layer.kind not in SPATIAL_KINDS:
            raise ValueError(f"non-spatial layer at index {i} in receptive-field range")
        kh, kw = layer.kernel
        if kh != kw:
            raise ValueError("receptive-field composition requires square kernels")
        size += (kh - 1) * jump
        offset -= layer.padding * jump
        jump *= layer.stride
    return ReceptiveFieldGeometry(size=size, stride=jump, offset=offset)


# ---------------------------------------------------------------------------
# Descriptor files: UTF-8 JSON next to raw little-endian float32 weight blobs
# (out-channel major, then in-channel, kernel row, kernel col; no header).

def _read_floats(path: Path, count: int) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    if data.shape[0] != count:
        raise ValueError(f"{path}: expected {count} float32 values, found {data.shape[0]}")
    return data


def load_descriptor(path) -> NetworkDescriptor:
    path = Path(path)
    spec = json.loads(path.read_text())
    base = path.parent
    layers = []
    for entry in spec["layers"]:
        kind = entry["kind"]
        kernel = tuple(entry.get("kernel", [1, 1]))
        ic = int(entry.get("in_channels", 1))
        oc = int(entry.get("out_channels", 1))
        weights = bias = None
        if kind in (CONV, FC) and entry.get("weights"):
            kh, kw = kernel
            flat = _read_floats(base / entry["weights"], oc * ic * kh * kw)
            weights = flat.reshape(oc, ic, kh, kw)
            if entry.get("bias"):
                bias = _read_floats(base / entry["bias"], oc)
        layers.append(
            LayerSpec(
                kind=kind,
                kernel=kernel,
                stride=int(entry.get("stride", 1)),
                padding=int(entry.get("padding", 0)),
                in_channels=ic,
                out_channels=oc,
                weights=weights,
                bias=bias,
            )
        )
    return NetworkDescriptor(
        layers=layers,
        target_layer=int(spec["target_layer"]),
        input_shape=tuple(spec["input_shape"]),
        memoization_only=bool(spec.get("memoization_only", False)),
    )


def save_descriptor(net: NetworkDescriptor, path) -> None:
    """Write the JSON descriptor plus raw weight/bias blobs beside it."""
    path = Path(path)
    base = path.parent
    base.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, layer in enumerate(net.layers):
        entry = {
            "kind": layer.kind,
            "kernel": list(layer.kernel),
            "stride": layer.stride,
            "padding": layer.padding,
            "in_channels": layer.in_channels,
            "out_channels": layer.out_channels,
            "weights": None,
            "bias": None,
        }
        if layer.weights is not None:
            wname = f"{path.stem}_layer{i:02d}_weights.bin"
            layer.weights.astype("<f4").tofile(base / wname)
            entry["weights"] = wname
            bname = f"{path.stem}_layer{i:02d}_bias.bin"
            layer.bias.astype("<f4").tofile(base / bname)
            entry["bias"] = bname
        entries.append(entry)
    doc = {
        "input_shape": list(net.input_shape),
        "target_layer": net.target_layer,
        "memoization_only": net.memoization_only,
        "layers": entries,
    }
    path.write_text(json.dumps(doc, indent=2))
