"""First-order cost model.

MAC counts follow the layer dims exactly as propagated through the network;
motion-estimation operation counts follow the closed-form search formulas.
Per-layer energy/latency come from a user-supplied table, with missing
layers falling back to MAC-proportional defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .motion import SearchParams
from .tensor import MAXPOOL, RELU, LayerSpec, NetworkDescriptor, ReceptiveFieldGeometry, output_shape


@dataclass(frozen=True)
class CostParams:
    """Unit costs for the MAC-proportional default model.

    Magnitudes are one-MAC-scale estimates for a 65 nm-class accelerator;
    all of them are knobs, not measurements.
    """

    energy_per_mac_mj: float = 1e-9
    latency_per_mac_ms: float = 3e-11
    energy_per_me_op_mj: float = 1e-10
    latency_per_me_op_ms: float = 3e-12
    energy_per_warp_element_mj: float = 4e-9
    latency_per_warp_element_ms: float = 1.2e-10
    energy_per_act_element_mj: float = 0.0  # pooling/ReLU per-element cost
    latency_per_act_element_ms: float = 0.0


DEFAULT_PARAMS = CostParams()


@dataclass
class LayerCostEntry:
    layer_index: int
    macs: int
    energy_mj: float
    latency_ms: float


@dataclass
class CostReport:
    prefix_macs: int
    suffix_macs: int
    unoptimized_ops: float
    rfbme_ops: float
    key_energy_mj: float
    pred_energy_mj: float
    avg_energy_mj: float
    key_latency_ms: float
    pred_latency_ms: float
    avg_latency_ms: float
    key_fraction: float


def layer_macs(layer: LayerSpec, in_dims: tuple[int, int, int]) -> int:
    """outputs x MACs-per-output for conv/fc; zero for pooling and ReLU."""
    if layer.kind in (MAXPOOL, RELU):
        return 0
    oc, oh, ow = output_shape(layer, in_dims)
    kh, kw = layer.kernel
    return oh * ow * oc * layer.in_channels * kh * kw


def network_macs(net: NetworkDescriptor, input_dims=None) -> list[int]:
    """Per-layer MACs, propagating dims layer to layer."""
    shape = tuple(input_dims) if input_dims is not None else net.input_shape
    macs = []
    for layer in net.layers:
        macs.append(layer_macs(layer, shape))
        shape = output_shape(layer, shape)
    return macs

def prefix_macs(net: NetworkDescriptor, input_dims=None) -> int:
    return sum(network_macs(net, input_dims)[: net.target_layer + 1])


def suffix_macs(net: NetworkDescriptor, input_dims=None) -> int:
    return sum(network_macs(net, input_dims)[net.target_layer + 1 :])


def unoptimized_ops(
    geometry: ReceptiveFieldGeometry, search: SearchParams, map_dims: tuple[int, int]
) -> float:
    """Add count of per-field exhaustive matching without tile reuse.

    Reported verbatim from the formula: radius 0 yields 0 even though one
    offset is still evaluated.
    """
    ny, nx = map_dims
    steps = (2.0 * search.radius) / search.stride
    return float(ny * nx) * steps**2 * float(geometry.size) ** 2


def rfbme_ops(
    geometry: ReceptiveFieldGeometry, search: SearchParams, map_dims: tuple[int, int]
) -> float:
    """First-order add count with tile reuse plus tile-combining cost."""
    ny, nx = map_dims
    combine = float(ny * nx) * (geometry.size / geometry.stride) ** 2
    return unoptimized_ops(geometry, search, map_dims) / geometry.stride**2 + combine


def average_cost(key_cost: float, pred_cost: float, key_fraction: float) -> float:
    """Average per-frame cost: affine in the key-frame fraction."""
    return key_fraction * key_cost + (1.0 - key_fraction) * pred_cost


def backsolve_pred_cost(key_cost: float, avg_cost: float, key_fraction: float) -> float:
    """Invert the average identity for the predicted-frame cost."""
    return (avg_cost - key_fraction * key_cost) / (1.0 - key_fraction)


def build_cost_table(
    net: NetworkDescriptor,
    input_dims=None,
    params: CostParams = DEFAULT_PARAMS,
    overrides: dict[int, tuple[float, float]] | None = None,
) -> list[LayerCostEntry]:
    """Per-layer costs: overrides win, everything else is MAC-proportional."""
    shape = tuple(input_dims) if input_dims is not None else net.input_shape
    table = []
    for i, layer in enumerate(net.layers):
        macs = layer_macs(layer, shape)
        shape = output_shape(layer, shape)
        if overrides and i in overrides:
            energy, latency = overrides[i]
        elif layer.kind in (MAXPOOL, RELU):
            elements = int(np.prod(shape))
            energy = elements * params.energy_per_act_element_mj
            latency = elements * params.latency_per_act_element_ms
        else:
            energy = macs * params.energy_per_mac_mj
            latency = macs * params.latency_per_mac_ms
        table.append(LayerCostEntry(i, macs, energy, latency))
    return table


def load_cost_table_json(path) -> dict[int, tuple[float, float]]:
    """JSON array of {layer_index, energy_mj, latency_ms} -> overrides map."""
    with open(path) as fh:
        entries = json.load(fh)
    return {
        int(e["layer_index"]): (float(e["energy_mj"]), float(e["latency_ms"]))
        for e in entries
    }


def frame_costs(
    table: list[LayerCostEntry],
    net: NetworkDescriptor,
    key_fraction: float,
    rfbme_op_count: float,
    params: CostParams = DEFAULT_PARAMS,
    unoptimized_op_count: float = 0.0,
    warp_elements: int | None = None,
    input_dims=None,
) -> CostReport:
    """Key/predicted/average frame costs.

    Key frames pay for every layer; predicted frames pay for the suffix plus
    motion estimation (rfbme_op_count at per-op cost) and warping (linear in
    the target activation size).
    """
    if not 0.0 <= key_fraction <= 1.0:
        raise ValueError("key_fraction must lie in [0, 1]")
    if len(table) != len(net.layers):
        raise ValueError("cost table must cover every layer")
    shape = tuple(input_dims) if input_dims is not None else net.input_shape
    if warp_elements is None:
        s = shape
        for layer in net.prefix:
            s = output_shape(layer, s)
        warp_elements = int(np.prod(s))
    key_energy = sum(e.energy_mj for e in table)
    key_latency = sum(e.latency_ms for e in table)
    suffix_energy = sum(e.energy_mj for e in table[net.target_layer + 1 :])
    suffix_latency = sum(e.latency_ms for e in table[net.target_layer + 1 :])
    pred_energy = (
        suffix_energy
        + rfbme_op_count * params.energy_per_me_op_mj
        + warp_elements * params.energy_per_warp_element_mj
    )
    pred_latency = (
        suffix_latency
        + rfbme_op_count * params.latency_per_me_op_ms
        + warp_elements * params.latency_per_warp_element_ms
    )
    macs = network_macs(net, shape)
    return CostReport(
        prefix_macs=sum(macs[: net.target_layer + 1]),
        suffix_macs=sum(macs[net.target_layer + 1 :]),
        unoptimized_ops=unoptimized_op_count,
        rfbme_ops=rfbme_op_count,
        key_energy_mj=key_energy,
        pred_energy_mj=pred_energy,
        avg_energy_mj=average_cost(key_energy, pred_energy, key_fraction),
        key_latency_ms=key_latency,
        pred_latency_ms=pred_latency,
        avg_latency_ms=average_cost(key_latency, pred_latency, key_fraction),
        key_fraction=key_fraction,
    )
