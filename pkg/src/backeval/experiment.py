"""End-to-end experiment runs: the seed protocol and the correlation layer.

Per seed, every model is scored three ways on freshly drawn samples:

  * XLR on a matched subset (rows aligned index-for-index);
  * BackRetrieval and CORR on two disjoint, independently shuffled subsets,
    so that code path can never see the matched pairing;

then the per-seed (XLR, BkR) and (XLR, CORR) series across models are
correlated, and the per-seed correlations are aggregated with a paired
significance test of BkR against CORR.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics, stats, synth
from .errors import DataError, ManifestError
from .metrics import EvalConfig, ModelScore
from .similarity import TIE_POLICY
from .store import EmbeddingMatrix, PairedDataset, load_dataset, load_matrix

SCHEMA_VERSION = 1
DEFAULT_SEEDS = tuple(range(25))

# Child-seed streams drawn per run seed.
_STREAM_MATCHED = 0
_STREAM_SPLIT = 1
_STREAM_CORR = 2
_SIGNIFICANCE_SEED = 1729

CORRELATION_KEYS = (
    "pearson_xlr_bkr",
    "spearman_xlr_bkr",
    "pearson_xlr_corr",
    "spearman_xlr_corr",
)


def child_seed(seed: int, stream: int) -> int:
    """Independent integer seed derived from (seed, stream), platform-stable."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return int(ss.generate_state(1)[0])


@dataclass
class ModelEntry:
    model_id: str
    source_text: EmbeddingMatrix
    target_text: EmbeddingMatrix


@dataclass
class ExperimentManifest:
    """Validated experiment description (synthetic or on-disk datasets)."""

    eval_config: EvalConfig
    seeds: list[int]
    synth_config: synth.SynthConfig | None
    dataset_paths: dict[str, Path] | None
    model_specs: list[dict] | None
    raw: dict

    @classmethod
    def from_file(cls, path) -> "ExperimentManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ManifestError(f"manifest not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(raw, base_dir=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "ExperimentManifest":
        if not isinstance(raw, dict):
            raise ManifestError("manifest must be a JSON object")
        base_dir = Path(base_dir)

        eval_spec = raw.get("eval", {})
        if not isinstance(eval_spec, dict):
            raise ManifestError("manifest key 'eval' must be an object")
        try:
            eval_config = EvalConfig(
                k=int(eval_spec.get("k", metrics.DEFAULT_K)),
                sample_size=int(eval_spec.get("sample_size", 1000)),
                corr_pair_budget=int(
                    eval_spec.get("corr_pair_budget", metrics.DEFAULT_CORR_PAIR_BUDGET)
                ),
            )
        except (TypeError, ValueError) as e:
            raise ManifestError(f"invalid eval config: {e}") from None

        seeds = raw.get("seeds", list(DEFAULT_SEEDS))
        if not isinstance(seeds, list) or not seeds:
            raise ManifestError("manifest needs a non-empty 'seeds' list")
        try:
            seeds = [int(s) for s in seeds]
        except (TypeError, ValueError):
            raise ManifestError("seeds must be integers") from None

        has_synth = "synth" in raw
        has_data = "datasets" in raw or "models" in raw
        if has_synth == has_data:
            raise ManifestError(
                "manifest must define either 'synth' or 'datasets'+'models'"
            )

        synth_config = None
        dataset_paths = None
        model_specs = None
        if has_synth:
            spec = raw["synth"]
            if not isinstance(spec, dict):
                raise ManifestError("manifest key 'synth' must be an object")
            try:
                synth_config = synth.SynthConfig(
                    n_items=int(spec.get("n_items", 1000)),
                    dim=int(spec.get("dim", 64)),
                    image_noise=float(spec.get("image_noise", 0.15)),
                    model_noises=tuple(spec.get("model_noises", ())),
                    hub_count=int(spec.get("hub_count", 0)),
                    hub_strength=float(spec.get("hub_strength", 0.0)),
                    seed=int(spec.get("seed", 0)),
                )
            except (TypeError, ValueError) as e:
                raise ManifestError(f"invalid synth config: {e}") from None
        else:
            datasets = raw.get("datasets")
            if not isinstance(datasets, dict) or set(datasets) != {"source", "target"}:
                raise ManifestError(
                    "manifest key 'datasets' must map 'source' and 'target' to paths"
                )
            dataset_paths = {
                role: base_dir / str(p) for role, p in sorted(datasets.items())
            }
            for role, p in dataset_paths.items():
                if not p.exists():
                    raise ManifestError(f"{role} dataset manifest not found: {p}")

            models = raw.get("models")
            if not isinstance(models, list) or not models:
                raise ManifestError("manifest needs a non-empty 'models' list")
            model_specs = []
            seen_ids = set()
            for entry in models:
                if not isinstance(entry, dict) or "model_id" not in entry:
                    raise ManifestError("each model entry needs a 'model_id'")
                model_id = str(entry["model_id"])
                if model_id in seen_ids:
                    raise ManifestError(f"duplicate model_id {model_id!r}")
                seen_ids.add(model_id)
                text_matrices = entry.get("text_matrices")
                if not isinstance(text_matrices, dict) or not text_matrices:
                    raise ManifestError(
                        f"model {model_id!r} needs a 'text_matrices' mapping"
                    )
                resolved = {
                    lang: base_dir / str(p) for lang, p in sorted(text_matrices.items())
                }
                for lang, p in resolved.items():
                    if not p.exists():
                        raise ManifestError(
                            f"model {model_id!r} text matrix for {lang!r} not found: {p}"
                        )
                model_specs.append({"model_id": model_id, "text_matrices": resolved})

        return cls(
            eval_config=eval_config,
            seeds=seeds,
            synth_config=synth_config,
            dataset_paths=dataset_paths,
            model_specs=model_specs,
            raw=raw,
        )

    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _load_real_inputs(manifest: ExperimentManifest):
    source = load_dataset(manifest.dataset_paths["source"])
    target = load_dataset(manifest.dataset_paths["target"])
    if source.rows != target.rows:
        raise DataError(
            f"source and target datasets must be row-aligned for XLR, "
            f"got {source.rows} vs {target.rows} rows"
        )
    entries = []
    for spec in manifest.model_specs:
        model_id = spec["model_id"]
        texts = {}
        for role, dataset in (("source", source), ("target", target)):
            lang = dataset.language
            if lang not in spec["text_matrices"]:
                raise ManifestError(
                    f"model {model_id!r} has no text matrix for language {lang!r}"
                )
            matrix = load_matrix(spec["text_matrices"][lang])
            if matrix.rows != dataset.rows:
                raise DataError(
                    f"model {model_id!r} {role} text matrix has {matrix.rows} rows, "
                    f"dataset has {dataset.rows}"
                )
            if matrix.ids != dataset.text.ids:
                raise DataError(
                    f"model {model_id!r} {role} text matrix ids do not match the dataset"
                )
            texts[role] = matrix
        entries.append(ModelEntry(model_id, texts["source"], texts["target"]))
    return source, target, entries


def _build_synth_inputs(manifest: ExperimentManifest):
    cfg = manifest.synth_config
    world = synth.generate_world(cfg)
    entries = []
    for i, noise in enumerate(cfg.model_noises):
        src_text, tgt_text = simulate_roster_model(world, cfg, i)
        entries.append(ModelEntry(f"model-{i:02d}-noise-{noise:g}", src_text, tgt_text))
    return world.source, world.target, entries


def simulate_roster_model(
    world: synth.SynthWorld, cfg: synth.SynthConfig, index: int
) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    """Simulated model `index` of the roster, with optional hub injection."""
    noise = cfg.model_noises[index]
    src_text, tgt_text = synth.simulate_model(
        world, noise, child_seed(cfg.seed, 100 + index)
    )
    if cfg.hub_count > 0:
        tgt_text = synth.inject_hubs(
            tgt_text, cfg.hub_count, cfg.hub_strength, child_seed(cfg.seed, 500 + index)
        )
    return src_text, tgt_text


def _with_text(dataset: PairedDataset, text: EmbeddingMatrix) -> PairedDataset:
    return PairedDataset(language=dataset.language, text=text, image=dataset.image)


def nonmatching_split(rows: int, sample_size: int, seed: int):
    """Two disjoint, independently shuffled index subsets of equal size."""
    half = min(sample_size, rows // 2)
    if half < 1:
        raise DataError(f"cannot split {rows} rows into two non-empty subsets")
    perm = np.random.default_rng(seed).permutation(rows)
    return perm[:half], perm[half : 2 * half]


def run_experiment(manifest: ExperimentManifest, workers: int = 1) -> dict:
    """Run the full seed protocol and return the report as a plain dict."""
    if manifest.synth_config is not None:
        source, target, entries = _build_synth_inputs(manifest)
    else:
        source, target, entries = _load_real_inputs(manifest)

    cfg = manifest.eval_config
    rows = source.rows
    if min(cfg.sample_size, rows // 2) < cfg.k:
        raise DataError(
            f"non-matching sample of {min(cfg.sample_size, rows // 2)} rows "
            f"is smaller than k={cfg.k}"
        )

    per_seed = []
    correlation_series: dict[str, list[float]] = {key: [] for key in CORRELATION_KEYS}
    score_series: dict[str, dict[str, list[float]]] = {
        e.model_id: {"xlr": [], "bkr": [], "corr": []} for e in entries
    }
    direction = (source.language, target.language)

    for seed in manifest.seeds:
        matched_n = min(cfg.sample_size, rows)
        matched_idx = np.random.default_rng(child_seed(seed, _STREAM_MATCHED)).choice(
            rows, size=matched_n, replace=False
        )
        src_idx, tgt_idx = nonmatching_split(
            rows, cfg.sample_size, child_seed(seed, _STREAM_SPLIT)
        )
        run_cfg = EvalConfig(
            k=cfg.k,
            sample_size=cfg.sample_size,
            seed=child_seed(seed, _STREAM_CORR),
            corr_pair_budget=cfg.corr_pair_budget,
        )

        scores = []
        for entry in entries:
            try:
                xlr, _ = metrics.xlr_recall(
                    entry.source_text.take(matched_idx),
                    entry.target_text.take(matched_idx),
                    k=cfg.k,
                    workers=workers,
                )
                src_eval = _with_text(
                    source.take(src_idx), entry.source_text.take(src_idx)
                )
                tgt_eval = _with_text(
                    target.take(tgt_idx), entry.target_text.take(tgt_idx)
                )
                bkr, _ = metrics.backretrieval(
                    src_eval, tgt_eval, run_cfg, workers=workers
                )
                corr = metrics.corr_baseline(src_eval, tgt_eval, run_cfg, workers=workers)
            except DataError as e:
                raise DataError(
                    f"model {entry.model_id!r} "
                    f"({direction[0]}->{direction[1]}, seed {seed}): {e}"
                ) from e
            scores.append(ModelScore(entry.model_id, direction, xlr, bkr, corr))
            series = score_series[entry.model_id]
            series["xlr"].append(xlr)
            series["bkr"].append(bkr)
            series["corr"].append(corr)

        correlations = _seed_correlations(scores)
        for key in CORRELATION_KEYS:
            if correlations.get(key) is not None:
                correlation_series[key].append(correlations[key])
        per_seed.append(
            {
                "seed": seed,
                "scores": [
                    {
                        "model_id": s.model_id,
                        "xlr": s.xlr,
                        "bkr": s.bkr,
                        "corr": s.corr,
                    }
                    for s in scores
                ],
                "correlations": correlations,
            }
        )

    aggregate = _aggregate(correlation_series, score_series, len(manifest.seeds))
    n_pairs_per_eval = (min(cfg.sample_size, rows // 2)) ** 2
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "experiment",
        "manifest_digest": manifest.digest(),
        "direction": {"source": direction[0], "target": direction[1]},
        "k": cfg.k,
        "sample_size": cfg.sample_size,
        "matched_sample_rows": min(cfg.sample_size, rows),
        "nonmatching_sample_rows": min(cfg.sample_size, rows // 2),
        "seeds": list(manifest.seeds),
        "models": [e.model_id for e in entries],
        "per_seed": per_seed,
        "aggregate": aggregate,
        "decisions": {
            "corr_pair_budget": cfg.corr_pair_budget,
            "corr_pairs_mode": "exact"
            if n_pairs_per_eval <= cfg.corr_pair_budget
            else "sampled",
            "tie_policy": TIE_POLICY,
            "dispersion_labels": ["std", "stderr"],
            "nonmatching_sampling": "disjoint independently shuffled row subsets",
        },
    }
    return report


def _seed_correlations(scores: list[ModelScore]) -> dict:
    if len(scores) < 2:
        return {key: None for key in CORRELATION_KEYS}
    xlrs = [s.xlr for s in scores]
    bkrs = [s.bkr for s in scores]
    corrs = [s.corr for s in scores]
    out = {}
    for key, fn, ys in (
        ("pearson_xlr_bkr", stats.pearson, bkrs),
        ("spearman_xlr_bkr", stats.spearman, bkrs),
        ("pearson_xlr_corr", stats.pearson, corrs),
        ("spearman_xlr_corr", stats.spearman, corrs),
    ):
        try:
            out[key] = fn(xlrs, ys)
        except DataError:
            out[key] = None  # constant series in this seed
    return out


def _dispersion(values: list[float]) -> dict:
    if len(values) >= 2:
        agg = stats.aggregate_seeds(values)
        return {"mean": agg.mean, "std": agg.std, "stderr": agg.stderr}
    if len(values) == 1:
        return {"mean": values[0], "std": None, "stderr": None}
    return {"mean": None, "std": None, "stderr": None}


def _aggregate(correlation_series, score_series, n_seeds: int) -> dict:
    aggregate = {
        "correlations": {
            key: _dispersion(values) for key, values in correlation_series.items()
        },
        "model_means": [
            {
                "model_id": model_id,
                "xlr": _dispersion(series["xlr"]),
                "bkr": _dispersion(series["bkr"]),
                "corr": _dispersion(series["corr"]),
            }
            for model_id, series in score_series.items()
        ],
    }
    significance = {}
    for metric_name in ("pearson", "spearman"):
        a = correlation_series[f"{metric_name}_xlr_bkr"]
        b = correlation_series[f"{metric_name}_xlr_corr"]
        if len(a) == len(b) == n_seeds and n_seeds >= 6:
            significance[f"{metric_name}_bkr_vs_corr_p"] = stats.paired_significance(
                a, b, seed=_SIGNIFICANCE_SEED
            )
        else:
            significance[f"{metric_name}_bkr_vs_corr_p"] = None
    aggregate["significance"] = significance
    return aggregate
