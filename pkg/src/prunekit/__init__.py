"""prunekit: two-stage visual token pruning.

Stage 1 keeps the visual tokens best aligned with the textual set (negated
mean L2 distance as the default alignment score); stage 2 greedily maximizes
the mean pairwise cosine dissimilarity of the kept set. Exact and baseline
selectors, synthetic data, and benchmarking live alongside the pipeline.
"""

from .alignment import AlignmentScores, score_cosine, score_knn_mi, score_l2, select_top
from .errors import (
    BadMagicError,
    DimMismatchError,
    DimTooSmallError,
    DuplicateIndexError,
    EmptyTextError,
    InvalidMatrixError,
    KeepOutOfRangeError,
    MalformedSelectionError,
    NonFiniteEntryError,
    PruneKitError,
    TooFewTokensError,
    TooLargeError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
    ZeroNormTokenError,
)
from .pipeline import PruneReport, StageOrder, Timings, cross_scores, prune, prune_ablation, resolve_n1
from .repmax import (
    GreedyState,
    SimilarityMatrix,
    build_similarity,
    cosine_dissim,
    exact_solve,
    greedy_repmax,
    greedy_trace,
    l2_dissim_variant,
    maxmin_baseline,
    objective,
    random_baseline,
)
from .synth import IsotropyReport, SynthSpec, diagnose_isotropy, generate
from .tokenset import (
    CrossMetric,
    FileFormat,
    IntraMetric,
    Modality,
    PruneConfig,
    Selection,
    TieBreak,
    TokenMatrix,
    ValidationResult,
    ensure_valid,
    read_selection,
    read_token_file,
    validate,
    write_selection,
    write_token_file,
)

__version__ = "0.1.0"
