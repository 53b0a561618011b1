"""Pick the compiled core when it imports, else the numpy implementation.

Set ``ZEROCHAIN_BACKEND=python`` to force the fallback.
"""
import os

import numpy as np

from . import _pycore
from .kernels import GAMMA_TABLE, LAMBDA_MASS


def _load_compiled():
    try:
        from . import _ccore
    except ImportError:
        return None
    _ccore.init_gamma_table(
        GAMMA_TABLE.values, GAMMA_TABLE.slopes, GAMMA_TABLE.lo, GAMMA_TABLE.step, LAMBDA_MASS
    )
    return _ccore


COMPILED = _load_compiled()

if os.environ.get("ZEROCHAIN_BACKEND", "").lower() == "python" or COMPILED is None:
    core = _pycore
else:
    core = COMPILED


def as_rows(x):
    """View ``x`` as a C-contiguous float64 ``(n, T)`` array; report if it was 1-D."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim != 2:
        raise ValueError(f"expected a point or a 2-D batch of points, got shape {arr.shape}")
    return arr, False


def as_mult(m, n):
    return np.ascontiguousarray(np.broadcast_to(np.asarray(m, dtype=np.float64), (n,)))
