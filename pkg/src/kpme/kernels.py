"""Particle/grid kernels, compiled when available.

Set ``KPME_PURE_PYTHON=1`` to force the numpy fallback.  ``gather`` stays on
numpy even with the compiled module present: its first contraction is a
BLAS matrix product that outruns the scalar loop once ``L`` exceeds about 6
(see ``benchmarks/bench_kernels.py``).
"""

import os

from . import _kernels_py as py_impl

try:
    if os.environ.get("KPME_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as c_impl
except ImportError:
    c_impl = None

_impl = c_impl if c_impl is not None else py_impl
BACKEND = "cython" if c_impl is not None else "python"

lagrange_weights = _impl.lagrange_weights
spread = _impl.spread
gather = py_impl.gather
