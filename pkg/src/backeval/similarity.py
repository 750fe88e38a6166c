"""Cosine similarity, deterministic ranking, and pairwise similarity matrices.

Ranking follows one total order everywhere: descending similarity, ties
broken by ascending row index. Similarities are computed in float64 by the
shared kernel and clamped to [-1, 1] before any comparison, so every code
path sees identical values for identical vector pairs.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .errors import DataError
from .store import ZERO_NORM_THRESHOLD, EmbeddingMatrix

TIE_POLICY = "descending similarity, ties by ascending row index"

DEFAULT_BLOCK_ROWS = kernels.DEFAULT_BLOCK_ROWS


def _as_rows(x, name: str) -> np.ndarray:
    """Coerce an EmbeddingMatrix or array-like to a 2-D float64 array."""
    if isinstance(x, EmbeddingMatrix):
        arr = x.data.astype(np.float64)
    else:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
    if arr.ndim != 2:
        raise DataError(f"{name} must be a vector or matrix, got ndim {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def unit_rows(x, name: str = "input") -> np.ndarray:
    """Unit-normalized float64 rows; near-zero rows are an error."""
    arr = _as_rows(x, name)
    norms = np.linalg.norm(arr, axis=1)
    tiny = norms <= ZERO_NORM_THRESHOLD
    if np.any(tiny):
        raise DataError(f"{name} row {int(np.argmax(tiny))} has near-zero norm")
    return arr / norms[:, None]


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[1] != b.shape[1]:
        raise DataError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")


def scores_block(uq: np.ndarray, uc: np.ndarray) -> np.ndarray:
    """Similarities of pre-normalized query rows against candidate rows."""
    out = np.empty((uq.shape[0], uc.shape[0]), dtype=np.float64)
    kernels._dot_block(uq, uc, out)
    np.clip(out, -1.0, 1.0, out=out)
    return out


def for_each_block(
    uq: np.ndarray,
    uc: np.ndarray,
    handle,
    workers: int = 1,
    block_rows: int = DEFAULT_BLOCK_ROWS,
) -> None:
    """Compute similarity blocks of `block_rows` queries and pass each to `handle`.

    `handle(start, stop, block)` receives disjoint query ranges, possibly
    concurrently; it must only write per-query state. Blocking and worker
    count never change the computed values.
    """
    m = uq.shape[0]
    if block_rows < 1:
        block_rows = m or 1

    def work(start: int) -> None:
        stop = min(start + block_rows, m)
        handle(start, stop, scores_block(uq[start:stop], uc))

    starts = list(range(0, m, block_rows))
    if workers <= 1 or len(starts) <= 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, starts))


def cosine(u, v) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    uu = unit_rows(u, "u")
    vv = unit_rows(v, "v")
    if uu.shape[0] != 1 or vv.shape[0] != 1:
        raise DataError("cosine expects single vectors")
    _check_dims(uu, vv)
    return float(scores_block(uu, vv)[0, 0])


def pairwise(
    a,
    b,
    workers: int = 1,
    block_rows: int = DEFAULT_BLOCK_ROWS,
) -> np.ndarray:
    """All-pairs cosine similarities, shape (a.rows, b.rows)."""
    ua = unit_rows(a, "a")
    ub = unit_rows(b, "b")
    _check_dims(ua, ub)
    out = np.empty((ua.shape[0], ub.shape[0]), dtype=np.float64)

    def handle(start, stop, block):
        out[start:stop] = block

    for_each_block(ua, ub, handle, workers=workers, block_rows=block_rows)
    return out


def top1_index(query, candidates) -> int:
    """Index of the most similar candidate row (lowest index wins ties)."""
    uq = unit_rows(query, "query")
    if uq.shape[0] != 1:
        raise DataError("top1_index expects a single query vector")
    uc = unit_rows(candidates, "candidates")
    _check_dims(uq, uc)
    return int(top1_indices_units(uq, uc)[0])


def rank_of(target_index: int, query, candidates) -> int:
    """1-based rank of the target row when candidates are sorted for the query."""
    uq = unit_rows(query, "query")
    if uq.shape[0] != 1:
        raise DataError("rank_of expects a single query vector")
    uc = unit_rows(candidates, "candidates")
    _check_dims(uq, uc)
    n = uc.shape[0]
    if not 0 <= target_index < n:
        raise DataError(f"target index {target_index} out of bounds for {n} rows")
    return rank_in_scores(scores_block(uq, uc)[0], target_index)


def rank_in_scores(scores: np.ndarray, target_index: int) -> int:
    """Rank of one entry in a score vector under the shared tie policy."""
    v = scores[target_index]
    higher = int(np.count_nonzero(scores > v))
    tied_before = int(np.count_nonzero(scores[:target_index] == v))
    return 1 + higher + tied_before


def top1_indices_units(
    uq: np.ndarray,
    uc: np.ndarray,
    workers: int = 1,
    block_rows: int = DEFAULT_BLOCK_ROWS,
) -> np.ndarray:
    """Batched argmax over candidate rows for pre-normalized queries."""
    if uc.shape[0] < 1:
        raise DataError("empty candidate set")
    _check_dims(uq, uc)
    result = np.empty(uq.shape[0], dtype=np.intp)

    def handle(start, stop, block):
        result[start:stop] = np.argmax(block, axis=1)

    for_each_block(uq, uc, handle, workers=workers, block_rows=block_rows)
    return result


def matched_ranks_units(
    uq: np.ndarray,
    uc: np.ndarray,
    workers: int = 1,
    block_rows: int = DEFAULT_BLOCK_ROWS,
) -> np.ndarray:
    """Rank of candidate row i for query row i, for all i (equal row counts)."""
    if uq.shape[0] != uc.shape[0]:
        raise DataError(
            f"matched ranking needs equal row counts, got {uq.shape[0]} and {uc.shape[0]}"
        )
    _check_dims(uq, uc)
    result = np.empty(uq.shape[0], dtype=np.int64)

    def handle(start, stop, block):
        for r, q in enumerate(range(start, stop)):
            result[q] = rank_in_scores(block[r], q)

    for_each_block(uq, uc, handle, workers=workers, block_rows=block_rows)
    return result
