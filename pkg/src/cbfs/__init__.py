"""Feature selection by consistent biclustering.

Given a labeled feature x sample matrix, find a large set of features under
which classifying features by sample centroids and samples back by feature
centroids reproduces the known sample classes.
"""

__version__ = "0.1.0"

from .core import (
    ConsistencyMode,
    FeatureAssignment,
    classify_features,
    classify_samples,
    feature_centroids,
    g_evaluate,
    is_consistent,
    sample_centroids,
)
from .dataset import (
    DataMatrix,
    LabeledDataset,
    SampleClassification,
    generate_planted,
    load_dataset,
    load_labels,
    load_matrix,
)
from .evaluation import brute_force_max_consistent, classify_validation, margin_report
from .heuristic import HeuristicConfig, SolveResult, run, run_single
from .lp import LinearProgram, build_inner, round_selection, solve
