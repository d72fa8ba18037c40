"""Backend dispatch for the per-point hot loops.

The jit backend is used when numba imports cleanly.  Set ``TWOVIEW_NUMBA=0``
in the environment (before import) to force the pure-numpy path; the flag is
read once at import time.  ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import numpy_impl

if os.environ.get("TWOVIEW_NUMBA", "1") == "0":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        _impl = numpy_impl
        BACKEND = "numpy"

homography_residuals = _impl.homography_residuals
sampson_residuals = _impl.sampson_residuals
table_interp = _impl.table_interp
rho_loss_sum = _impl.rho_loss_sum
count_below = _impl.count_below
truncated_quadratic_sum = _impl.truncated_quadratic_sum


def backend_name():
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND
