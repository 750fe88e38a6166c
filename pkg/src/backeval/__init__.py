"""Image-pivoted evaluation of cross-lingual text embeddings.

Scores embedding models without parallel corpora by pivoting retrieval
through per-language text-image pairs, alongside the matched-pair ground
truth metric, a distance-correlation baseline, the seed-protocol
correlation analysis, and a synthetic harness for validating the metric.
"""

from .errors import DataError, FormatError, ManifestError
from .experiment import ExperimentManifest, child_seed, run_experiment
from .losses import (
    LossConfig,
    RecipeBatch,
    combined_loss,
    cosine_distance,
    language_neighborhoods,
    triplet_loss,
    xl_penalty,
)
from .metrics import (
    EvalConfig,
    ModelScore,
    RetrievalTrace,
    backretrieval,
    corr_baseline,
    export_traces,
    recall_from_ranks,
    xlr_recall,
)
from .report import correlate_reports, merge_reports, report_emit
from .similarity import TIE_POLICY, cosine, pairwise, rank_of, top1_index
from .stats import (
    SeedAggregate,
    aggregate_seeds,
    average_ranks,
    paired_significance,
    pearson,
    spearman,
)
from .store import (
    EmbeddingMatrix,
    PairedDataset,
    load_dataset,
    load_matrix,
    normalize,
    save_matrix,
    subsample,
)
from .synth import (
    SynthConfig,
    SynthWorld,
    export_world,
    generate_world,
    inject_hubs,
    simulate_model,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "FormatError",
    "ManifestError",
    "EmbeddingMatrix",
    "PairedDataset",
    "load_matrix",
    "save_matrix",
    "normalize",
    "load_dataset",
    "subsample",
    "TIE_POLICY",
    "cosine",
    "pairwise",
    "top1_index",
    "rank_of",
    "EvalConfig",
    "RetrievalTrace",
    "ModelScore",
    "recall_from_ranks",
    "xlr_recall",
    "backretrieval",
    "corr_baseline",
    "export_traces",
    "pearson",
    "spearman",
    "average_ranks",
    "aggregate_seeds",
    "paired_significance",
    "SeedAggregate",
    "SynthConfig",
    "SynthWorld",
    "generate_world",
    "simulate_model",
    "inject_hubs",
    "export_world",
    "LossConfig",
    "RecipeBatch",
    "cosine_distance",
    "triplet_loss",
    "language_neighborhoods",
    "xl_penalty",
    "combined_loss",
    "ExperimentManifest",
    "run_experiment",
    "child_seed",
    "report_emit",
    "merge_reports",
    "correlate_reports",
    "__version__",
]
