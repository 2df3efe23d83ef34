"""QUBO-based feature selection for recommender models.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports its public surface.
"""

from ._core import (  # noqa: F401
    ConfigError,
    CorpusManifest,
    CounterfactualProfile,
    DataError,
    DatasetBundle,
    EvalResult,
    InteractionMatrix,
    ItemFeatureMatrix,
    ItemKnnMaskedEvaluator,
    ItemKnnModel,
    LabeledSample,
    MetricSpec,
    QuboProblem,
    QuboValidationReport,
    SolveResult,
    SolverConfig,
    SolverKind,
    SolverError,
    SplitResult,
    SplitSpec,
    StabilityReport,
    SymMatrix,
    SynthParams,
    build_boosting,
    build_coqubo,
    build_miqubo,
    build_pdqubo,
    compute_baseline,
    compute_profile,
    energy,
    energy_vs_performance,
    evaluate,
    evaluate_with_mask,
    format_wire_request,
    load_interactions,
    load_matrix_json,
    load_profile,
    negative_sample,
    parse_wire_response,
    recommend,
    run_pipeline,
    sample_stability,
    save_matrix_json,
    save_matrix_triplets,
    save_profile,
    single_feature_sign_predictions,
    solve,
    solve_exhaustive,
    spearman_correlation,
    split,
    synthesize_corpus,
    train_item_knn,
    validate_q,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
