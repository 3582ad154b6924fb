"""Transfer learning for regression via transformation functions.

Learn a source regression from plentiful source data, relabel the scarce
target sample into an easier auxiliary regression through a user-chosen
transformation G(a, b), fit that, and compose. Includes Nadaraya-Watson
kernel smoothing and kernel ridge regression subroutines, validation-risk
selection over quantized transformation families, and a reproducible
benchmark CLI.
"""

__version__ = "0.1.0"

from .data import (
    CsvError,
    Dataset,
    DomainTag,
    SyntheticSpec,
    doppler,
    doppler_fn,
    doppler_offset_spec,
    doppler_scale_spec,
    generate_synthetic,
    kin_analog_spec,
    load_csv,
    save_csv,
    split,
    subsample,
    uniform_sampler,
)
from .evaluation import (
    DegenerateLabelsError,
    MetricReport,
    RateFit,
    StabilityBoundViolation,
    default_query_grid,
    excess_risk_mc,
    metric_report,
    mse,
    r_squared,
    rate_slope,
    stability_probe,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    grid_search_cv,
    load_config,
    parse_config,
    register_baseline,
    run_experiment,
)
from .pipeline import (
    BandwidthRule,
    HTLPredictor,
    KRRSpec,
    KSSpec,
    LambdaRule,
    SelectionResult,
    construct_auxiliary,
    direct_estimator_factory,
    htl_fit,
    htl_predict,
    select_transformation,
)
from .ridge import (
    ConditioningError,
    KRRPredictor,
    RKHSKernel,
    StabilityUndefinedError,
    gram,
    krr_fit,
    krr_lambda_rule,
    krr_stability_coeffs,
    linear_kernel,
    median_heuristic,
    polynomial_kernel,
    rbf_kernel,
)
from .smoothing import KSPredictor, SmoothingKernel, ks_bandwidth_rule, ks_fit
from .transform import (
    AuxiliaryEstimator,
    EstimatorConfigError,
    EstimatorMode,
    Family,
    InsufficientReplicatesError,
    QuantizedFamily,
    SingularityError,
    TransformationFunction,
    apply_H,
    auxiliary_truth,
    estimate_sigma2,
    eval_G,
    inverse_G,
    loglinear,
    non_transfer,
    offset,
    quantize_offset_family,
    scale,
)
