"""Bootstrap-corrected debiased Lasso inference for single coefficients."""

from .bootstrap import (
    BootstrapDistribution,
    PivotValues,
    bootstrap_debiased,
    bootstrap_debiased_many,
    ddb_estimate,
    ddb_plugin_ci,
    empirical_quantile,
    lower_median,
    percentile_ci,
    pivots,
)
from .core import (
    ConfidenceInterval,
    RegressionData,
    SeedSpec,
    destandardize_coefficients,
    gaussian_stream,
    read_csv,
    standardize,
)
from .debias import (
    DebiasArtifacts,
    DebiasedEstimate,
    debias,
    estimate_sigma,
    nodewise_direction,
    plugin_ci,
)
from .diagnostics import (
    ConditionReport,
    ErrorDecomposition,
    condition_report,
    decompose_error,
    oracle_estimator,
    population_condition_report,
)
from .lasso import (
    LassoFit,
    SolverConfig,
    fit_lasso,
    fit_lasso_pipeline,
    kkt_gap,
    universal_lambda,
)
from .simharness import (
    SimConfig,
    SimulationReport,
    aggregate,
    emit_report,
    generate_instance,
    run_replication,
    run_simulation,
)

__version__ = "0.1.0"
