"""Forward computation of the margin and cross-lingual losses.

The triplet term pulls a body representation toward its own title and away
from a random negative title by a margin. The cross-lingual penalty
compares, per other language, the mean distance to the K nearest titles of
that language against the same-language mean, penalizing the gap. No
training machinery lives here; these are pure forward evaluations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ManifestError
from .similarity import cosine
from .store import EmbeddingMatrix


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.1
    xl_weight: float = 0.01
    neighbor_count: int = 5

    def __post_init__(self):
        if self.margin < 0:
            raise ManifestError("margin must be >= 0")
        if self.xl_weight < 0:
            raise ManifestError("xl_weight must be >= 0")
        if self.neighbor_count < 1:
            raise ManifestError("neighbor_count must be >= 1")


@dataclass
class RecipeBatch:
    """Body and title representations with one language tag per row."""

    body_reps: EmbeddingMatrix
    title_reps: EmbeddingMatrix
    languages: list[str]

    def __post_init__(self):
        if not (self.body_reps.rows == self.title_reps.rows == len(self.languages)):
            raise DataError(
                "batch needs equal row counts for bodies, titles, and language tags"
            )
        if self.body_reps.dim != self.title_reps.dim:
            raise DataError(
                f"body dim {self.body_reps.dim} != title dim {self.title_reps.dim}"
            )
        object.__setattr__(self, "languages", list(self.languages))

    @property
    def rows(self) -> int:
        return self.body_reps.rows


def cosine_distance(u, v) -> float:
    """1 - cosine similarity, in [0, 2]."""
    return 1.0 - cosine(u, v)


def triplet_loss(x_rb, x_rt, x_nt, margin: float) -> float:
    """max(0, d(body, own title) - d(body, negative title) + margin)."""
    if margin < 0:
        raise DataError("margin must be >= 0")
    positive = cosine_distance(x_rb, x_rt)
    negative = cosine_distance(x_rb, x_nt)
    return max(0.0, positive - negative + margin)


def _title_distances(r: int, batch: RecipeBatch) -> np.ndarray:
    body = batch.body_reps.data[r]
    return np.array(
        [cosine_distance(body, batch.title_reps.data[n]) for n in range(batch.rows)]
    )


def language_neighborhoods(
    r: int, batch: RecipeBatch, language: str, k: int
) -> list[int]:
    """Indices of the K language-l rows whose titles are nearest to body r.

    Distances are d(body_reps[r], title_reps[n]); ties break by ascending
    index; r never belongs to its own neighborhood.
    """
    if not 0 <= r < batch.rows:
        raise DataError(f"row {r} out of bounds for batch of {batch.rows}")
    if k < 1:
        raise DataError("neighborhood size must be >= 1")
    members = [
        n for n in range(batch.rows) if batch.languages[n] == language and n != r
    ]
    if len(members) < k:
        raise DataError(
            f"need {k} rows of language {language!r}, found {len(members)}"
        )
    dists = _title_distances(r, batch)
    members.sort(key=lambda n: (dists[n], n))
    return members[:k]


def xl_penalty(r: int, batch: RecipeBatch, k: int) -> float:
    """Summed gaps between other-language and own-language mean neighbor distances."""
    own_language = batch.languages[r]
    dists = _title_distances(r, batch)

    def mean_neighbor_distance(language: str) -> float:
        neighborhood = language_neighborhoods(r, batch, language, k)
        return float(np.mean([dists[n] for n in neighborhood]))

    own_mean = mean_neighbor_distance(own_language)
    penalty = 0.0
    for language in sorted(set(batch.languages)):
        if language == own_language:
            continue
        penalty += abs(mean_neighbor_distance(language) - own_mean)
    return penalty


def combined_loss(
    r: int, batch: RecipeBatch, negative_index: int, cfg: LossConfig
) -> float:
    """Triplet term plus xl_weight times the cross-lingual penalty."""
    if not 0 <= negative_index < batch.rows:
        raise DataError(f"negative index {negative_index} out of bounds")
    triplet = triplet_loss(
        batch.body_reps.data[r],
        batch.title_reps.data[r],
        batch.title_reps.data[negative_index],
        cfg.margin,
    )
    if cfg.xl_weight == 0.0:
        return triplet
    return triplet + cfg.xl_weight * xl_penalty(r, batch, cfg.neighbor_count)
