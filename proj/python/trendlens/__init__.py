"""Caption-feature influence scoring and sales-class prediction."""

from ._trendlens import (
    Catalog,
    ForestModel,
    MissingArtifactError,
    Product,
    QuantileThresholds,
    TransportError,
    ValidationError,
    assign_class,
    assign_classes,
    clean_caption,
    cluster_phrases,
    command_names,
    estimate_jaccard,
    evaluate_accuracy,
    exact_jaccard,
    fit_thresholds,
    influence_scores,
    kendall_tau_triple,
    load_catalog,
    load_model,
    make_catalog,
    minhash,
    parse_catalog_csv,
    parse_catalog_jsonl,
    prediction_score,
    run_command,
    shingle,
    synth_catalog,
    train_forest,
)

__all__ = [name for name in dir() if not name.startswith("_")]
