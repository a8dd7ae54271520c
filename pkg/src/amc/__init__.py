"""Activation motion compensation for CNN video inference.

Full network execution on key frames; predicted frames reconstruct the
target-layer activation by receptive-field block motion estimation plus
bilinear warping of the stored sparse activation, then run only the network
suffix.  A first-order cost model estimates the savings.
"""

from ._kernels import BACKEND, NATIVE_AVAILABLE
from .costs import (
    CostParams,
    CostReport,
    LayerCostEntry,
    average_cost,
    backsolve_pred_cost,
    frame_costs,
    layer_macs,
    prefix_macs,
    rfbme_ops,
    suffix_macs,
    unoptimized_ops,
)
from .fixedpoint import bilinear_q88, dequantize, quantize
from .motion import (
    NO_MATCH,
    MotionVectorField,
    SearchParams,
    TileDiffTable,
    consume_tile_diffs,
    exhaustive_bme,
    produce_tile_diffs,
    rfbme,
)
from .pipeline import (
    FrameDecision,
    FrameMetrics,
    KeyFramePolicy,
    PipelineState,
    StreamReport,
    VideoFrame,
    decide,
    process_frame,
    run_stream,
)
from .sparse import SparseActivation, lane_decode4, rle_decode, rle_encode
from .tensor import (
    LayerSpec,
    NetworkDescriptor,
    ReceptiveFieldGeometry,
    conv_forward,
    fc_forward,
    forward,
    load_descriptor,
    maxpool_forward,
    receptive_field_geometry,
    relu_forward,
    run_prefix,
    run_suffix,
    save_descriptor,
)
from .warp import ActivationVectorField, scale_vector_field, warp


def backend() -> str:
    """Name of the active kernel backend ('native' or 'fallback')."""
    return BACKEND
