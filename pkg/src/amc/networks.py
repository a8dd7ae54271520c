"""Stock network descriptors.

Shape-only builders (weights omitted): enough for receptive-field geometry
and the cost model, not for execution.
"""

from __future__ import annotations

from .tensor import CONV, MAXPOOL, RELU, LayerSpec, NetworkDescriptor

_VGG16_BLOCKS = [
    (2, 3, 64),    # conv1_1, conv1_2
    (2, 64, 128),
    (3, 128, 256),
    (3, 256, 512),
    (3, 512, 512),  # conv5_1..conv5_3 (no pool after the last block here)
]


def vgg16_prefix_descriptor(
    height: int = 562, width: int = 1000, include_target_relu: bool = True
) -> NetworkDescriptor:
    """VGG-16 spatial stack through its last 3x3 conv block.

    3x3 convs (stride 1, pad 1) with ReLU, 2x2/2 max pools between blocks.
    The target layer is the final ReLU (or the final conv when
    include_target_relu is False), i.e. the last spatial layer.
    """
    layers: list[LayerSpec] = []
    for block, (convs, in_ch, out_ch) in enumerate(_VGG16_BLOCKS):
        ic = in_ch
        for _ in range(convs):
            layers.append(
                LayerSpec(
                    kind=CONV,
                    kernel=(3, 3),
                    stride=1,
                    padding=1,
                    in_channels=ic,
                    out_channels=out_ch,
                )
            )
            layers.append(LayerSpec(kind=RELU, in_channels=out_ch, out_channels=out_ch))
            ic = out_ch
        if block < len(_VGG16_BLOCKS) - 1:
            layers.append(
                LayerSpec(
                    kind=MAXPOOL,
                    kernel=(2, 2),
                    stride=2,
                    padding=0,
                    in_channels=out_ch,
                    out_channels=out_ch,
                )
            )
    target = len(layers) - 1 if include_target_relu else len(layers) - 2
    return NetworkDescriptor(
        layers=layers, target_layer=target, input_shape=(3, height, width)
    )
