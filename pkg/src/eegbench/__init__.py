"""Multi-dimensional efficiency benchmark harness for EEG models.

Covers EDF ingestion, preprocessing, montage protocols, budget-stratified
sampling, linear probing of frozen embeddings, classification metrics, and
parameter/sample efficiency scoring with significance tests.
"""

from .edf import EdfHeader, Recording, SignalSpec, parse_edf, write_edf
from .efficiency import (
    CellResult,
    EfficiencyReport,
    aggregate,
    parameter_efficiency,
    sample_efficiency,
)
from .metrics import (
    MetricReport,
    auroc,
    balanced_accuracy,
    chance_level,
    cohens_kappa,
    confusion_matrix,
    f1_macro,
)
from .montage import classify_channels, select_lobe_restricted, select_sparse
from .preprocess import (
    Epoch,
    EpochSet,
    PipelineSpec,
    PRESETS,
    bandpass,
    common_average_reref,
    normalize,
    notch,
    resample,
    run_pipeline,
    windowize,
)
from .probe import EmbeddingSet, LinearProbe, ProbeModel, predict_proba, train_probe
from .sampling import BudgetSpec, FoldSpec, make_folds, sample_budget

__version__ = "0.1.0"
