"""Compiled dot-product kernel underlying every similarity computation.

All dot products run in float64 through one compiled kernel whose
accumulation order is a fixed function of the vector length alone.
Consequences relied on elsewhere:

  * results are bitwise identical for any query/candidate blocking and any
    worker count;
  * the scalar cosine path and the blocked pairwise path agree bitwise.

The kernel unrolls four query rows per pass and tiles candidates to keep
them L2-resident; tail rows fall through to a one-row loop that LLVM
compiles to the same per-pair reduction (covered by tests).
"""
from __future__ import annotations

import numpy as np
from numba import njit

# Queries per parallel task. A pure memory/scheduling knob: results are
# bitwise independent of it (see test suite).
DEFAULT_BLOCK_ROWS = 256

_CAND_TILE = 192  # candidate rows per L2 tile inside the kernel


@njit(
    "void(float64[:,::1], float64[:,::1], float64[:,::1])",
    nogil=True,
    fastmath=True,
    cache=True,
)
def _dot_block(q, c, out):
    m, d = q.shape
    n = c.shape[0]
    for j0 in range(0, n, _CAND_TILE):
        j1 = min(j0 + _CAND_TILE, n)
        i = 0
        while i + 4 <= m:
            for j in range(j0, j1):
                s0 = 0.0
                s1 = 0.0
                s2 = 0.0
                s3 = 0.0
                for k in range(d):
                    ck = c[j, k]
                    s0 += q[i, k] * ck
                    s1 += q[i + 1, k] * ck
                    s2 += q[i + 2, k] * ck
                    s3 += q[i + 3, k] * ck
                out[i, j] = s0
                out[i + 1, j] = s1
                out[i + 2, j] = s2
                out[i + 3, j] = s3
            i += 4
        while i < m:
            for j in range(j0, j1):
                s = 0.0
                for k in range(d):
                    s += q[i, k] * c[j, k]
                out[i, j] = s
            i += 1


def dot_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-by-row dot products of two equally shaped matrices, in float64."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    return np.einsum("ij,ij->i", a, b)
