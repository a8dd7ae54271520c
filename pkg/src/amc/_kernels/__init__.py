"""Kernel backend selection.

The compiled extension (``_native``) is preferred when importable; otherwise
the pure-numpy ``fallback`` module serves the same contract.  Set
``AMC_FORCE_FALLBACK=1`` to skip the extension (used by the benchmark and by
the backend-parity tests).
"""

import os

from . import fallback

if os.environ.get("AMC_FORCE_FALLBACK"):
    _active = fallback
else:
    try:
        from . import _native as _active  # type: ignore[no-redef]
    except ImportError:
        _active = fallback

NATIVE_AVAILABLE = _active is not fallback
BACKEND = "native" if NATIVE_AVAILABLE else "fallback"

conv_forward = _active.conv_forward
maxpool_forward = _active.maxpool_forward
tile_sad_table = _active.tile_sad_table
field_sums = _active.field_sums
exhaustive_field_sads = _active.exhaustive_field_sads
warp_bilinear = _active.warp_bilinear
