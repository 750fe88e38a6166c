"""Rank statistics over model-indexed metric values.

Spearman uses average ranks for ties. The significance test is a two-sided
paired permutation test on the mean difference: exact over all sign flips
for up to 20 pairs, Monte Carlo with a fixed seed above that.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

EXACT_FLIP_LIMIT = 20
MC_FLIPS = 100_000

# |r| may exceed 1 by float noise; anything past this is a bug.
_OVERSHOOT = 1e-9


def _as_series(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-D")
    if arr.size < 2:
        raise DataError(f"{name} needs at least 2 values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def _check_paired(xs: np.ndarray, ys: np.ndarray) -> None:
    if xs.size != ys.size:
        raise DataError(f"series lengths differ: {xs.size} vs {ys.size}")


def pearson(xs, ys) -> float:
    """Sample Pearson correlation coefficient."""
    x = _as_series(xs, "xs")
    y = _as_series(ys, "ys")
    _check_paired(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.dot(dx, dx))
    sy = np.sqrt(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise DataError("undefined correlation: constant series")
    r = float(np.dot(dx, dy) / (sx * sy))
    if abs(r) > 1.0 + _OVERSHOOT:
        raise AssertionError(f"correlation overshoot: {r}")
    return min(1.0, max(-1.0, r))


def average_ranks(values) -> np.ndarray:
    """1-based ranks with tied values receiving the mean of their positions."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> float:
    """Spearman rank correlation: Pearson over average ranks."""
    x = _as_series(xs, "xs")
    y = _as_series(ys, "ys")
    _check_paired(x, y)
    return pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class SeedAggregate:
    mean: float
    std: float
    stderr: float


def aggregate_seeds(per_seed_values) -> SeedAggregate:
    """Mean, sample std (n-1), and standard error across per-seed values."""
    arr = _as_series(per_seed_values, "per-seed values")
    std = float(arr.std(ddof=1))
    return SeedAggregate(
        mean=float(arr.mean()),
        std=std,
        stderr=std / float(np.sqrt(arr.size)),
    )


def paired_significance(a, b, seed: int = 0) -> float:
    """Two-sided p-value for mean(a - b) != 0 under pairwise sign flips."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise DataError("paired series must be 1-D")
    if x.size != y.size:
        raise DataError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size < 6:
        raise DataError(f"need at least 6 pairs, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("paired series contain non-finite values")
    diffs = x - y
    n = diffs.size
    if n <= EXACT_FLIP_LIMIT:
        return _exact_flip_p(diffs)
    return _monte_carlo_flip_p(diffs, seed)


def _exact_flip_p(diffs: np.ndarray) -> float:
    n = diffs.size
    total = 1 << n
    bits = np.arange(n, dtype=np.int64)
    observed = None
    count = 0
    sums_chunks = []
    for start in range(0, total, 1 << 14):
        stop = min(start + (1 << 14), total)
        codes = np.arange(start, stop, dtype=np.int64)
        signs = (((codes[:, None] >> bits) & 1) * 2 - 1).astype(np.float64)
        sums = np.einsum("ck,k->c", signs, diffs)
        sums_chunks.append(np.abs(sums))
        if start <= total - 1 < stop:
            observed = abs(sums[total - 1 - start])  # all-plus pattern
    # Compare against the observed statistic computed through the same
    # reduction, so the observed pattern always counts itself.
    for chunk in sums_chunks:
        count += int(np.count_nonzero(chunk >= observed))
    return count / total


def _monte_carlo_flip_p(diffs: np.ndarray, seed: int) -> float:
    rng = np.random.default_rng(seed)
    observed = abs(float(np.einsum("k,k->", np.ones_like(diffs), diffs)))
    count = 0
    remaining = MC_FLIPS
    while remaining > 0:
        batch = min(remaining, 1 << 14)
        signs = rng.integers(0, 2, size=(batch, diffs.size)).astype(np.float64) * 2 - 1
        sums = np.einsum("ck,k->c", signs, diffs)
        count += int(np.count_nonzero(np.abs(sums) >= observed))
        remaining -= batch
    return (1 + count) / (MC_FLIPS + 1)
