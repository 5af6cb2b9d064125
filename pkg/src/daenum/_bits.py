"""Bit helpers shared by the numba kernels.

Columns are packed into uint64 words: bit ``r`` is set iff run ``r`` is at
level +1.
"""

import numba
import numba.extending
import numba.types
import numpy as np

MAX_RUNS = 63


@numba.extending.intrinsic
def _ctpop(tyctx, x):
    if isinstance(x, numba.types.Integer):
        def impl(cgctx, builder, sig, args):
            (val,) = args
            return builder.ctpop(val)
        return x(x), impl


@numba.njit(inline="always")
def popcount(x):
    return _ctpop(x)


def full_mask(n: int) -> int:
    return (1 << n) - 1


def pack_levels(levels: np.ndarray) -> np.ndarray:
    """Pack an N x k array of +-1 levels into k uint64 column words."""
    n = levels.shape[0]
    weights = np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
    plus = (levels > 0).astype(np.uint64)
    return (plus * weights[:, None]).sum(axis=0, dtype=np.uint64)


def unpack_columns(cols: np.ndarray, n: int) -> np.ndarray:
    rows = np.arange(n, dtype=np.uint64)
    bits = (cols[None, :] >> rows[:, None]) & np.uint64(1)
    return np.where(bits == 1, 1, -1).astype(np.int8)
