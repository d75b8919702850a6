"""Backend selection for the sphere-sum kernels.

The compiled extension is used when it imports; setting ``STARLAB_PURE=1``
in the environment forces the numpy fallback.  Both backends expose the
same functions with the same semantics, see ``_kernels_py``.
"""
import os

from . import _kernels_py

if os.environ.get("STARLAB_PURE") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

power_mean_sums = _impl.power_mean_sums
segment_sums = _impl.segment_sums
ball_block_sums = _impl.ball_block_sums
ellipsoid_sums = _impl.ellipsoid_sums
cm_alpha_block_sums = _impl.cm_alpha_block_sums

__all__ = [
    "BACKEND",
    "power_mean_sums",
    "segment_sums",
    "ball_block_sums",
    "ellipsoid_sums",
    "cm_alpha_block_sums",
]
