"""Hot loops with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``CLSCHROD_NUMBA`` is not set
to ``0``. Both paths honour the same contracts; ``tests/test_kernels.py``
checks them against each other and ``benchmarks/bench_kernels.py`` times them.
"""

from __future__ import annotations

import importlib
import os

from . import numpy_impl

OK, NODE, OUTSIDE = numpy_impl.OK, numpy_impl.NODE, numpy_impl.OUTSIDE

numba_impl = None
if os.environ.get("CLSCHROD_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off"):
    try:
        # importlib, because ``from . import`` would return the None bound above
        numba_impl = importlib.import_module(".numba_impl", __name__)
    except ImportError:  # numba missing or broken
        numba_impl = None

_impl = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if numba_impl is not None else "numpy"

unwrap_line = _impl.unwrap_line
advance_1d = _impl.advance_1d
advance_2d = _impl.advance_2d
wrap_angle = numpy_impl.wrap_angle

__all__ = ["BACKEND", "advance_1d", "advance_2d", "numba_impl", "numpy_impl",
           "unwrap_line", "wrap_angle"]
