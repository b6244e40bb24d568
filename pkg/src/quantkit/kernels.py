"""Backend selection for the compiled kernels.

The Cython extension is used when it imports; otherwise the numpy/scipy
fallback is loaded. Set ``QUANTKIT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("QUANTKIT_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

hp_solve = _impl.hp_solve
payoff_grid = _impl.payoff_grid
pav_decreasing = _impl.pav_decreasing

CALL, PUT, STOCK, CASH = _kernels_py.CALL, _kernels_py.PUT, _kernels_py.STOCK, _kernels_py.CASH
