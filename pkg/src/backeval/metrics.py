"""The three evaluation metrics: XLR, BackRetrieval, and the CORR baseline.

BackRetrieval scores a cross-lingual text embedding without any pairing
between the two datasets, in four steps per source item:

  1. embed all target-language texts;
  2. retrieve the most similar target text for the source text;
  3. rank every source image by similarity to the retrieved item's image;
  4. score the rank of the source item's own image (Recall@k over queries).

XLR is the ground-truth retrieval metric over matched rows; CORR is the
Spearman correlation between cross-dataset text distances and image
distances over the same kind of non-matching sample.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels, similarity
from .errors import DataError, ManifestError
from .store import PairedDataset

DEFAULT_K = 10
DEFAULT_CORR_PAIR_BUDGET = 1_000_000

# Pairs gathered per chunk when the CORR pair set is sampled.
_CORR_CHUNK = 1 << 15


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation knobs: recall cutoff, sample size, seed, CORR pair budget."""

    k: int = DEFAULT_K
    sample_size: int = 1000
    seed: int = 0
    corr_pair_budget: int = DEFAULT_CORR_PAIR_BUDGET

    def __post_init__(self):
        if self.k < 1:
            raise ManifestError(f"k must be >= 1, got {self.k}")
        if self.sample_size < self.k:
            raise ManifestError(
                f"sample_size must be >= k, got {self.sample_size} < {self.k}"
            )
        if self.corr_pair_budget < 1000:
            raise ManifestError(
                f"corr_pair_budget must be >= 1000, got {self.corr_pair_budget}"
            )


@dataclass(frozen=True)
class RetrievalTrace:
    """Audit record for one query: what was retrieved, and the back rank."""

    query_index: int
    retrieved_target_index: int
    back_rank: int


@dataclass(frozen=True)
class ModelScore:
    """Per-model metric triple for one evaluation direction."""

    model_id: str
    direction: tuple[str, str]
    xlr: float
    bkr: float
    corr: float

    def __post_init__(self):
        for name, value, lo, hi in (
            ("xlr", self.xlr, 0.0, 1.0),
            ("bkr", self.bkr, 0.0, 1.0),
            ("corr", self.corr, -1.0, 1.0),
        ):
            if not np.isfinite(value) or not lo <= value <= hi:
                raise DataError(f"{name} out of range for {self.model_id!r}: {value}")


def recall_from_ranks(ranks, k: int) -> float:
    """Proportion of 1-based ranks that are <= k."""
    arr = np.asarray(ranks)
    if arr.size == 0:
        raise DataError("empty rank list")
    if np.any(arr < 1):
        raise DataError("ranks must be >= 1")
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    return float(np.count_nonzero(arr <= k) / arr.size)


def xlr_recall(
    source_text,
    target_text,
    k: int = DEFAULT_K,
    workers: int = 1,
) -> tuple[float, np.ndarray]:
    """Ground-truth retrieval: rank of the matching target row per source row.

    Rows must be matched index-for-index. Returns (Recall@k, per-query ranks).
    """
    uq = similarity.unit_rows(source_text, "source text")
    uc = similarity.unit_rows(target_text, "target text")
    ranks = similarity.matched_ranks_units(uq, uc, workers=workers)
    return recall_from_ranks(ranks, k), ranks


def backretrieval(
    source: PairedDataset,
    target: PairedDataset,
    cfg: EvalConfig,
    workers: int = 1,
) -> tuple[float, list[RetrievalTrace]]:
    """Image-pivoted retrieval score plus per-query traces.

    No pairing between the datasets is assumed or used. The ranked
    candidate set in step 3 is all source images, the query's own included.
    """
    if source.rows == 0 or target.rows == 0:
        raise DataError("backretrieval needs non-empty datasets")
    if source.text.dim != target.text.dim:
        raise DataError(
            f"text dim mismatch: {source.text.dim} vs {target.text.dim}"
        )
    if source.image.dim != target.image.dim:
        raise DataError(
            f"image dim mismatch: {source.image.dim} vs {target.image.dim}"
        )

    u_src_text = similarity.unit_rows(source.text, "source text")
    u_tgt_text = similarity.unit_rows(target.text, "target text")
    u_src_img = similarity.unit_rows(source.image, "source images")
    u_tgt_img = similarity.unit_rows(target.image, "target images")

    retrieved = similarity.top1_indices_units(u_src_text, u_tgt_text, workers=workers)

    # Rank source images once per distinct retrieved pivot.
    pivots, inverse = np.unique(retrieved, return_inverse=True)
    by_pivot = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[by_pivot], np.arange(pivots.size + 1))
    back_ranks = np.empty(source.rows, dtype=np.int64)

    def handle(start, stop, block):
        for r in range(stop - start):
            row = block[r]
            group = by_pivot[bounds[start + r] : bounds[start + r + 1]]
            for q in group:
                back_ranks[q] = similarity.rank_in_scores(row, q)

    similarity.for_each_block(
        np.ascontiguousarray(u_tgt_img[pivots]), u_src_img, handle, workers=workers
    )

    traces = [
        RetrievalTrace(
            query_index=q,
            retrieved_target_index=int(retrieved[q]),
            back_rank=int(back_ranks[q]),
        )
        for q in range(source.rows)
    ]
    return recall_from_ranks(back_ranks, cfg.k), traces


def corr_baseline(
    source: PairedDataset,
    target: PairedDataset,
    cfg: EvalConfig,
    workers: int = 1,
) -> float:
    """Spearman correlation between cross-dataset text and image distances.

    Uses all rows x rows pairs when that count fits cfg.corr_pair_budget,
    otherwise cfg.corr_pair_budget pairs drawn uniformly (with replacement)
    from cfg.seed. Distances are 1 - cosine.
    """
    if source.rows == 0 or target.rows == 0:
        raise DataError("corr_baseline needs non-empty datasets")
    if source.text.dim != target.text.dim:
        raise DataError(
            f"text dim mismatch: {source.text.dim} vs {target.text.dim}"
        )
    if source.image.dim != target.image.dim:
        raise DataError(
            f"image dim mismatch: {source.image.dim} vs {target.image.dim}"
        )

    n_pairs = source.rows * target.rows
    if n_pairs <= cfg.corr_pair_budget:
        text_d = 1.0 - similarity.pairwise(source.text, target.text, workers=workers)
        image_d = 1.0 - similarity.pairwise(source.image, target.image, workers=workers)
        text_list = text_d.ravel()
        image_list = image_d.ravel()
    else:
        rng = np.random.default_rng(cfg.seed)
        ii = rng.integers(0, source.rows, size=cfg.corr_pair_budget)
        jj = rng.integers(0, target.rows, size=cfg.corr_pair_budget)
        u_st = similarity.unit_rows(source.text, "source text")
        u_tt = similarity.unit_rows(target.text, "target text")
        u_si = similarity.unit_rows(source.image, "source images")
        u_ti = similarity.unit_rows(target.image, "target images")
        text_list = _sampled_distances(u_st, u_tt, ii, jj)
        image_list = _sampled_distances(u_si, u_ti, ii, jj)

    from .stats import spearman

    return spearman(text_list, image_list)


def _sampled_distances(ua, ub, ii, jj) -> np.ndarray:
    out = np.empty(ii.size, dtype=np.float64)
    for start in range(0, ii.size, _CORR_CHUNK):
        stop = min(start + _CORR_CHUNK, ii.size)
        dots = kernels.dot_pairs(ua[ii[start:stop]], ub[jj[start:stop]])
        out[start:stop] = 1.0 - np.clip(dots, -1.0, 1.0)
    return out


def export_traces(path, traces, source_ids, target_ids) -> None:
    """Write per-query traces as CSV: query_id, retrieved_target_id, back_rank."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["query_id", "retrieved_target_id", "back_rank"])
        for t in traces:
            writer.writerow(
                [
                    source_ids[t.query_index],
                    target_ids[t.retrieved_target_index],
                    t.back_rank,
                ]
            )
