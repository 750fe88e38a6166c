"""Loading, saving, validation, and subsampling of embedding matrices.

Matrix file layout (little-endian throughout):

    magic   4 bytes  b"EMB1"
    version u32      1
    rows    u32
    dim     u32
    data    rows*dim float32, row-major
    ids     per row: u32 byte length, then that many UTF-8 bytes

Matrices are immutable after construction (the backing array is marked
read-only), so they can be shared freely across threads.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, ManifestError

MAGIC = b"EMB1"
VERSION = 1
ZERO_NORM_THRESHOLD = 1e-12
UNIT_NORM_TOLERANCE = 1e-4

_HEADER = struct.Struct("<4sIII")


@dataclass
class EmbeddingMatrix:
    """A dense float32 matrix with one opaque string id per row."""

    data: np.ndarray
    ids: list[str]
    unit: bool = False

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise DataError("matrix dim must be >= 1")
        if len(self.ids) != arr.shape[0]:
            raise DataError(
                f"row/id count mismatch: {arr.shape[0]} rows, {len(self.ids)} ids"
            )
        if arr.size and not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
            raise DataError(f"non-finite values in matrix (first bad row {bad})")
        if self.unit and arr.size:
            norms = np.linalg.norm(arr.astype(np.float64), axis=1)
            off = np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE
            if np.any(off):
                bad = int(np.argmax(off))
                raise DataError(
                    f"row {self.ids[bad]!r} flagged unit-normalized but has norm {norms[bad]:.6g}"
                )
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "ids", list(self.ids))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def take(self, indices: np.ndarray) -> "EmbeddingMatrix":
        """Row subset (or reordering) preserving id alignment."""
        idx = np.asarray(indices, dtype=np.intp)
        return EmbeddingMatrix(
            data=self.data[idx],
            ids=[self.ids[i] for i in idx],
            unit=self.unit,
        )


@dataclass
class PairedDataset:
    """Per-language aligned text/image matrices; row i of text describes image i."""

    language: str
    text: EmbeddingMatrix
    image: EmbeddingMatrix

    def __post_init__(self):
        if self.text.rows != self.image.rows:
            raise DataError(
                f"dataset {self.language!r}: text has {self.text.rows} rows "
                f"but image has {self.image.rows}"
            )
        for name, matrix in (("text", self.text), ("image", self.image)):
            if len(set(matrix.ids)) != len(matrix.ids):
                dup = _first_duplicate(matrix.ids)
                raise DataError(
                    f"dataset {self.language!r}: duplicate id {dup!r} in {name} matrix"
                )

    @property
    def rows(self) -> int:
        return self.text.rows

    def take(self, indices: np.ndarray) -> "PairedDataset":
        return PairedDataset(
            language=self.language,
            text=self.text.take(indices),
            image=self.image.take(indices),
        )


def _first_duplicate(ids: list[str]) -> str:
    seen = set()
    for i in ids:
        if i in seen:
            return i
        seen.add(i)
    return ""


def save_matrix(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write a matrix in the EMB1 binary format; round-trips bit-exactly."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, matrix.rows, matrix.dim))
        f.write(np.ascontiguousarray(matrix.data, dtype="<f4").tobytes())
        for rid in matrix.ids:
            raw = rid.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)


def load_matrix(path: str | Path) -> EmbeddingMatrix:
    """Read an EMB1 matrix file, validating structure and values."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: malformed header (file too short)")
    magic, version, rows, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: malformed header (bad magic {magic!r})")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if dim < 1:
        raise FormatError(f"{path}: malformed header (dim must be >= 1, got {dim})")

    offset = _HEADER.size
    payload_len = rows * dim * 4
    if len(blob) - offset < payload_len:
        raise FormatError(
            f"{path}: truncated payload (need {payload_len} bytes, have {len(blob) - offset})"
        )
    data = np.frombuffer(blob, dtype="<f4", count=rows * dim, offset=offset)
    data = data.reshape(rows, dim)
    offset += payload_len

    ids = []
    for row in range(rows):
        if len(blob) - offset < 4:
            raise FormatError(
                f"{path}: row/id count mismatch ({row} of {rows} ids present)"
            )
        (id_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if len(blob) - offset < id_len:
            raise FormatError(f"{path}: truncated id for row {row}")
        ids.append(blob[offset : offset + id_len].decode("utf-8"))
        offset += id_len
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes after ids")

    if rows * dim and not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values in payload")
    return EmbeddingMatrix(data=data.copy(), ids=ids)


def normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Rescale every row to unit L2 norm, preserving direction."""
    data64 = matrix.data.astype(np.float64)
    norms = np.linalg.norm(data64, axis=1)
    tiny = norms <= ZERO_NORM_THRESHOLD
    if np.any(tiny):
        bad = int(np.argmax(tiny))
        raise DataError(f"cannot normalize near-zero row {matrix.ids[bad]!r}")
    out = (data64 / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(data=out, ids=matrix.ids, unit=True)


def load_dataset(manifest_path: str | Path) -> PairedDataset:
    """Load a text/image pair of matrices described by a JSON manifest.

    Manifest keys: language, text_matrix, image_matrix. Matrix paths are
    resolved relative to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    try:
        spec = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"dataset manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as e:
        raise ManifestError(f"{manifest_path}: invalid JSON ({e})") from None
    if not isinstance(spec, dict):
        raise ManifestError(f"{manifest_path}: manifest must be a JSON object")
    for key in ("language", "text_matrix", "image_matrix"):
        if key not in spec:
            raise ManifestError(f"{manifest_path}: missing key {key!r}")

    base = manifest_path.parent
    matrices = {}
    for key in ("text_matrix", "image_matrix"):
        mpath = base / spec[key]
        if not mpath.exists():
            raise DataError(f"{manifest_path}: referenced file missing: {mpath}")
        matrices[key] = load_matrix(mpath)
    return PairedDataset(
        language=str(spec["language"]),
        text=matrices["text_matrix"],
        image=matrices["image_matrix"],
    )


def subsample(dataset: PairedDataset, n: int, seed: int) -> PairedDataset:
    """Draw n rows uniformly without replacement; deterministic given seed."""
    if n > dataset.rows:
        raise DataError(f"cannot sample {n} rows from {dataset.rows}")
    if n < 0:
        raise DataError("sample size must be non-negative")
    rng = np.random.default_rng(seed)
    idx = rng.choice(dataset.rows, size=n, replace=False)
    return dataset.take(idx)
