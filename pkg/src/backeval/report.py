"""Report serialization, merging, and re-correlation of stored score tables.

JSON reports are emitted exactly as structured by the experiment layer (the
schema is versioned); CSV flattens the per-seed, per-model score table with
fixed columns. Serialization is deterministic: emitting the same report
twice yields byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from . import stats
from .errors import DataError, ManifestError
from .experiment import CORRELATION_KEYS, SCHEMA_VERSION, _dispersion

SCORE_COLUMNS = (
    "seed",
    "model_id",
    "source_language",
    "target_language",
    "xlr",
    "bkr",
    "corr",
)

CORRELATION_COLUMNS = ("seed", "source_language", "target_language") + CORRELATION_KEYS

_SIGNIFICANCE_SEED = 1729


def report_emit(report: dict, path, format: str = "json") -> None:
    """Serialize a report to disk as JSON or CSV."""
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    elif format == "csv":
        path.write_text(render_csv(report), encoding="utf-8")
    else:
        raise ManifestError(f"unknown report format {format!r}")


def render_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    kind = report.get("kind")
    if kind == "experiment":
        writer.writerow(SCORE_COLUMNS)
        _write_score_rows(writer, report)
    elif kind == "merged":
        writer.writerow(SCORE_COLUMNS)
        for sub in report["reports"]:
            _write_score_rows(writer, sub)
    elif kind == "correlation":
        writer.writerow(CORRELATION_COLUMNS)
        for result in report["results"]:
            direction = result["direction"]
            for block in result["per_seed"]:
                writer.writerow(
                    [block["seed"], direction["source"], direction["target"]]
                    + [block["correlations"].get(key) for key in CORRELATION_KEYS]
                )
    else:
        raise DataError(f"cannot render CSV for report kind {kind!r}")
    return buf.getvalue()


def _write_score_rows(writer, report: dict) -> None:
    direction = report["direction"]
    for block in report["per_seed"]:
        for score in block["scores"]:
            writer.writerow(
                [
                    block["seed"],
                    score["model_id"],
                    direction["source"],
                    direction["target"],
                    score["xlr"],
                    score["bkr"],
                    score["corr"],
                ]
            )


def load_report(path) -> dict:
    path = Path(path)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"report not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid report JSON ({e})") from None
    if not isinstance(report, dict) or "schema_version" not in report:
        raise DataError(f"{path}: not a report file")
    if report["schema_version"] != SCHEMA_VERSION:
        raise DataError(
            f"{path}: unsupported schema_version {report['schema_version']}"
        )
    return report


def _require_experiment(report: dict, label: str) -> None:
    if report.get("kind") != "experiment":
        raise DataError(f"{label}: expected an experiment report")


def correlate_scores(report: dict) -> dict:
    """Rebuild the correlation layer from a report's stored score table."""
    _require_experiment(report, report.get("manifest_digest", "report"))
    per_seed = []
    series = {key: [] for key in CORRELATION_KEYS}
    for block in report["per_seed"]:
        scores = block["scores"]
        correlations = {}
        for key, fn, column in (
            ("pearson_xlr_bkr", stats.pearson, "bkr"),
            ("spearman_xlr_bkr", stats.spearman, "bkr"),
            ("pearson_xlr_corr", stats.pearson, "corr"),
            ("spearman_xlr_corr", stats.spearman, "corr"),
        ):
            xs = [s["xlr"] for s in scores]
            ys = [s[column] for s in scores]
            try:
                value = fn(xs, ys)
            except DataError:
                value = None
            correlations[key] = value
            if value is not None:
                series[key].append(value)
        per_seed.append({"seed": block["seed"], "correlations": correlations})

    n_seeds = len(report["per_seed"])
    significance = {}
    for metric_name in ("pearson", "spearman"):
        a = series[f"{metric_name}_xlr_bkr"]
        b = series[f"{metric_name}_xlr_corr"]
        if len(a) == len(b) == n_seeds and n_seeds >= 6:
            significance[f"{metric_name}_bkr_vs_corr_p"] = stats.paired_significance(
                a, b, seed=_SIGNIFICANCE_SEED
            )
        else:
            significance[f"{metric_name}_bkr_vs_corr_p"] = None

    return {
        "manifest_digest": report["manifest_digest"],
        "direction": report["direction"],
        "per_seed": per_seed,
        "aggregate": {
            "correlations": {key: _dispersion(series[key]) for key in CORRELATION_KEYS},
            "significance": significance,
        },
    }


def correlate_reports(reports: list[dict]) -> dict:
    """Correlation report across one or more stored experiment reports."""
    if not reports:
        raise ManifestError("need at least one report")
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "correlation",
        "inputs": [r.get("manifest_digest") for r in reports],
        "results": [correlate_scores(r) for r in reports],
    }


def merge_reports(reports: list[dict]) -> dict:
    """Combine experiment reports (e.g. directions) into one summary report."""
    if not reports:
        raise ManifestError("need at least one report")
    for i, r in enumerate(reports):
        _require_experiment(r, f"input {i}")
    sub_reports = []
    overall_series = {key: [] for key in CORRELATION_KEYS}
    for r in reports:
        recomputed = correlate_scores(r)
        sub_reports.append(
            {
                "manifest_digest": r["manifest_digest"],
                "direction": r["direction"],
                "per_seed": r["per_seed"],
                "aggregate": recomputed["aggregate"],
            }
        )
        for key in CORRELATION_KEYS:
            mean = recomputed["aggregate"]["correlations"][key]["mean"]
            if mean is not None:
                overall_series[key].append(mean)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "merged",
        "inputs": [r["manifest_digest"] for r in reports],
        "reports": sub_reports,
        "overall": {
            "correlations": {
                key: _dispersion(values) for key, values in overall_series.items()
            }
        },
    }
