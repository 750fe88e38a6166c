"""Synthetic bilingual text-image worlds with controllable quality dials.

A world is built from shared latent item vectors on the unit sphere. Image
vectors are the latent plus isotropic per-language noise; a simulated text
model is the latent plus isotropic per-language noise at a chosen level, so
smaller text noise means a better cross-lingual model. Hubness can be
injected by pulling selected rows toward the data centroid.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ManifestError
from .store import EmbeddingMatrix, PairedDataset, save_matrix

SOURCE_LANGUAGE = "src"
TARGET_LANGUAGE = "tgt"


@dataclass(frozen=True)
class SynthConfig:
    n_items: int
    dim: int
    image_noise: float
    model_noises: tuple[float, ...]
    hub_count: int = 0
    hub_strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_items < 10:
            raise ManifestError(f"n_items must be >= 10, got {self.n_items}")
        if self.dim < 2:
            raise ManifestError(f"dim must be >= 2, got {self.dim}")
        if self.image_noise < 0:
            raise ManifestError("image_noise must be >= 0")
        noises = tuple(float(s) for s in self.model_noises)
        if not noises:
            raise ManifestError("model_noises must be non-empty")
        if any(s < 0 for s in noises):
            raise ManifestError("model noise levels must be >= 0")
        object.__setattr__(self, "model_noises", noises)
        if not 0 <= self.hub_count <= self.n_items:
            raise ManifestError(
                f"hub_count must be in [0, n_items], got {self.hub_count}"
            )
        if self.hub_strength < 0:
            raise ManifestError("hub_strength must be >= 0")


@dataclass
class SynthWorld:
    """Ground-truth latents plus two matched-by-index language datasets."""

    latent: EmbeddingMatrix
    source: PairedDataset
    target: PairedDataset

    def __post_init__(self):
        if not (self.latent.rows == self.source.rows == self.target.rows):
            raise DataError("world matrices must share the item count")


def _unitize(rows64: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows64, axis=1)
    if np.any(norms <= 1e-12):
        raise DataError("degenerate near-zero vector during generation")
    return rows64 / norms[:, None]


def _noisy_copy(latent64: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """latent + sigma * standard-normal noise, re-normalized; exact copy at 0."""
    if sigma == 0.0:
        return latent64.copy()
    noisy = latent64 + sigma * rng.standard_normal(latent64.shape)
    return _unitize(noisy)


def _ids(n: int) -> list[str]:
    return [f"item-{i:06d}" for i in range(n)]


def _child_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def generate_world(cfg: SynthConfig) -> SynthWorld:
    """Deterministically build a world from cfg; texts are the perfect model."""
    latent64 = _unitize(
        _child_rng(cfg.seed, 0).standard_normal((cfg.n_items, cfg.dim))
    )
    ids = _ids(cfg.n_items)
    latent = EmbeddingMatrix(latent64.astype(np.float32), ids, unit=True)

    def dataset(language: str, stream: int) -> PairedDataset:
        image64 = _noisy_copy(latent64, cfg.image_noise, _child_rng(cfg.seed, stream))
        return PairedDataset(
            language=language,
            text=EmbeddingMatrix(latent.data.copy(), ids, unit=True),
            image=EmbeddingMatrix(image64.astype(np.float32), ids, unit=True),
        )

    return SynthWorld(
        latent=latent,
        source=dataset(SOURCE_LANGUAGE, 1),
        target=dataset(TARGET_LANGUAGE, 2),
    )


def simulate_model(
    world: SynthWorld, noise: float, seed: int
) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    """Text embeddings of a simulated model at the given noise level.

    Source and target noise draws are independent, mirroring independently
    written descriptions per language.
    """
    if noise < 0:
        raise ManifestError("model noise must be >= 0")
    latent64 = world.latent.data.astype(np.float64)
    ids = world.latent.ids
    src64 = _noisy_copy(latent64, noise, _child_rng(seed, 0))
    tgt64 = _noisy_copy(latent64, noise, _child_rng(seed, 1))
    return (
        EmbeddingMatrix(src64.astype(np.float32), ids, unit=True),
        EmbeddingMatrix(tgt64.astype(np.float32), ids, unit=True),
    )


def inject_hubs(
    matrix: EmbeddingMatrix, hub_count: int, hub_strength: float, seed: int
) -> EmbeddingMatrix:
    """Pull randomly chosen rows toward the data centroid and re-normalize them.

    The centroid is taken over the original rows; unselected rows are
    untouched bitwise.
    """
    if hub_count > matrix.rows:
        raise DataError(f"hub_count {hub_count} exceeds {matrix.rows} rows")
    if hub_count < 0 or hub_strength < 0:
        raise DataError("hub_count and hub_strength must be >= 0")
    if hub_count == 0:
        return matrix
    data64 = matrix.data.astype(np.float64)
    centroid = data64.mean(axis=0)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(matrix.rows, size=hub_count, replace=False)
    pulled = (1.0 - hub_strength) * data64[chosen] + hub_strength * centroid
    out = matrix.data.copy()
    out[chosen] = _unitize(pulled).astype(np.float32)
    return EmbeddingMatrix(out, matrix.ids, unit=matrix.unit)


def export_world(world: SynthWorld, out_dir) -> dict[str, Path]:
    """Write the world's datasets in the on-disk formats the CLI consumes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for role, dataset in (("source", world.source), ("target", world.target)):
        text_path = out_dir / f"{role}_text.emb"
        image_path = out_dir / f"{role}_image.emb"
        save_matrix(dataset.text, text_path)
        save_matrix(dataset.image, image_path)
        manifest = out_dir / f"{role}_dataset.json"
        manifest.write_text(
            json.dumps(
                {
                    "language": dataset.language,
                    "text_matrix": text_path.name,
                    "image_matrix": image_path.name,
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        paths[role] = manifest
    latent_path = out_dir / "latent.emb"
    save_matrix(world.latent, latent_path)
    paths["latent"] = latent_path
    return paths
