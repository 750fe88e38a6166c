import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from backeval.store import EmbeddingMatrix, PairedDataset


def make_matrix(rows, dim, seed=0, ids=None, unit=False):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((rows, dim)).astype(np.float32)
    if unit:
        data = (data.astype(np.float64) / np.linalg.norm(data, axis=1)[:, None]).astype(
            np.float32
        )
    if ids is None:
        ids = [f"r{i}" for i in range(rows)]
    return EmbeddingMatrix(data, ids, unit=unit)


def make_dataset(rows, text_dim, image_dim, seed=0, language="en"):
    return PairedDataset(
        language=language,
        text=make_matrix(rows, text_dim, seed=seed),
        image=make_matrix(rows, image_dim, seed=seed + 1),
    )


@pytest.fixture
def tmp_matrix_path(tmp_path):
    return tmp_path / "matrix.emb"
