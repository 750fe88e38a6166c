"""Command-line entry points.

Subcommands:
  eval    score a roster of models on on-disk datasets
  synth   generate a synthetic world and score its simulated roster
  corr    recompute metric correlations from prior reports
  report  merge prior reports into one summary

Exit codes: 0 success, 2 manifest/validation error, 3 data error,
4 internal invariant violation.
"""
from __future__ import annotations

import argparse
import sys

from .errors import DataError, ManifestError
from .experiment import ExperimentManifest, run_experiment
from .report import correlate_reports, load_report, merge_reports, report_emit

EXIT_OK = 0
EXIT_MANIFEST = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def _parse_seed_list(text: str) -> list[int]:
    try:
        seeds = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ManifestError(f"invalid --seed-list {text!r}") from None
    if not seeds:
        raise ManifestError("--seed-list must contain at least one seed")
    return seeds


def _add_output_flags(sub) -> None:
    sub.add_argument("--out", required=True, help="output report path")
    sub.add_argument(
        "--format", choices=("json", "csv"), default="json", help="report format"
    )


def _add_run_flags(sub) -> None:
    sub.add_argument("--manifest", required=True, help="experiment manifest path")
    _add_output_flags(sub)
    sub.add_argument("--workers", type=int, default=1, help="parallel workers")
    sub.add_argument("--k", type=int, default=None, help="override recall cutoff")
    sub.add_argument(
        "--seed-list", default=None, help="override seeds, comma-separated"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backeval",
        description="Image-pivoted evaluation of cross-lingual text embeddings",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for verb, kind in (("eval", "datasets"), ("synth", "synth")):
        sub = subs.add_parser(
            verb,
            help="run the seed protocol on "
            + ("on-disk datasets" if kind == "datasets" else "a synthetic world"),
        )
        _add_run_flags(sub)
        sub.set_defaults(func=_run_verb, expected=kind)

    sub = subs.add_parser("corr", help="correlate metric columns of prior reports")
    sub.add_argument("--report", required=True, nargs="+", help="input report paths")
    _add_output_flags(sub)
    sub.set_defaults(func=_corr_verb)

    sub = subs.add_parser("report", help="merge prior reports into one summary")
    sub.add_argument("--report", required=True, nargs="+", help="input report paths")
    _add_output_flags(sub)
    sub.set_defaults(func=_report_verb)

    return parser


def _load_manifest(args) -> ExperimentManifest:
    manifest = ExperimentManifest.from_file(args.manifest)
    raw = dict(manifest.raw)
    changed = False
    if args.k is not None:
        raw["eval"] = dict(raw.get("eval", {}), k=args.k)
        changed = True
    if args.seed_list is not None:
        raw["seeds"] = _parse_seed_list(args.seed_list)
        changed = True
    if changed:
        from pathlib import Path

        manifest = ExperimentManifest.from_dict(raw, base_dir=Path(args.manifest).parent)
    return manifest


def _run_verb(args) -> int:
    manifest = _load_manifest(args)
    if args.expected == "synth" and manifest.synth_config is None:
        raise ManifestError("'synth' needs a manifest with a synth section")
    if args.expected == "datasets" and manifest.synth_config is not None:
        raise ManifestError("'eval' needs a manifest with datasets and models")
    if args.workers < 1:
        raise ManifestError(f"--workers must be >= 1, got {args.workers}")
    report = run_experiment(manifest, workers=args.workers)
    report_emit(report, args.out, args.format)
    agg = report["aggregate"]["correlations"]
    print(
        f"wrote {args.out} "
        f"({report['direction']['source']}->{report['direction']['target']}, "
        f"{len(report['models'])} models, {len(report['seeds'])} seeds)"
    )
    mean = agg["pearson_xlr_bkr"]["mean"]
    if mean is not None:
        print(
            "mean correlation with ground truth: "
            f"pearson bkr {mean:.4f}, corr {agg['pearson_xlr_corr']['mean']:.4f}"
        )
    return EXIT_OK


def _corr_verb(args) -> int:
    reports = [load_report(p) for p in args.report]
    out = correlate_reports(reports)
    report_emit(out, args.out, args.format)
    print(f"wrote {args.out} ({len(reports)} input reports)")
    return EXIT_OK


def _report_verb(args) -> int:
    reports = [load_report(p) for p in args.report]
    out = merge_reports(reports)
    report_emit(out, args.out, args.format)
    print(f"wrote {args.out} ({len(reports)} input reports)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ManifestError as e:
        print(f"manifest error: {e}", file=sys.stderr)
        return EXIT_MANIFEST
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001 - invariant violations map to exit 4
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
