"""Kernel backend selection.

The compiled extension (``_core``, built from _core.pyx) and the pure-numpy
module implement the same five kernels with bit-identical results. The
compiled one is picked when importable; set VPEVAL_KERNELS=numpy or =cython
to force a backend (forcing cython raises if the extension is missing).
"""

import os

from ..errors import ConfigurationError

_choice = os.environ.get("VPEVAL_KERNELS", "auto").strip().lower()
if _choice not in ("auto", "cython", "numpy"):
    raise ConfigurationError(f"VPEVAL_KERNELS must be auto, cython, or numpy, got {_choice!r}")

if _choice == "numpy":
    from . import numpy_backend as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        from . import numpy_backend as _impl

        BACKEND = "numpy"

paint_ring = _impl.paint_ring
paint_segments = _impl.paint_segments
paint_triangle = _impl.paint_triangle
resize_bicubic = _impl.resize_bicubic
upsample_bilinear = _impl.upsample_bilinear

__all__ = [
    "BACKEND",
    "paint_ring",
    "paint_segments",
    "paint_triangle",
    "resize_bicubic",
    "upsample_bilinear",
]
