"""Anomaly detection for solar thermal systems.

Day traces are 1440 x F arrays (one row per minute). Scores follow the
convention that a day is flagged when its score is strictly above the
threshold.
"""

from ._core import (
    CheckpointError,
    DatasetSplit,
    DayTrace,
    LookupError,
    MetricError,
    ModelCheckpoint,
    NormStats,
    ParameterError,
    ParseError,
    PcaDetector,
    PcaModel,
    Schema,
    SchemaError,
    ShapeError,
    StsadError,
    TrainConfig,
    apply_normalizer,
    auc_pr,
    auc_roc,
    bnll_loss,
    detokenize,
    evaluate_csv,
    fit_normalizer,
    fit_pca,
    fit_pca_detector,
    gaussian_nll,
    generate_synthetic,
    kfold_f1,
    kl_divergence,
    load_days,
    optimal_f1,
    score_pca,
    score_vae,
    split_days,
    system_wise_f1,
    tokenize,
    train,
)

__version__ = "0.1.0"


def load_dataset(root):
    """Loads a dataset directory written by ``stsad synth`` or ``stsad ingest``.

    Returns ``(days, split)``.
    """
    from pathlib import Path

    root = Path(root)
    schema = Schema.load(root / "schema.txt") if (root / "schema.txt").exists() else Schema.solar_thermal()
    split = DatasetSplit.load(root / "split.txt") if (root / "split.txt").exists() else DatasetSplit.reference()
    systems = root / "systems" if (root / "systems").is_dir() else root
    return load_days(systems, schema), split
