"""Constructive ReLU convolutional networks for additive ridge functions.

Builders turn a ridge target into a network whose error on the unit ball
is certified; the estimator fits the final coefficients by least squares
and sweeps sample sizes to measure learning-rate slopes; the minimax
module generates the matching hard instance families; the bounds module
evaluates every constant in closed form.
"""

from .bounds import (
    BoundReport,
    bound_report,
    choose_resolution,
    covering_constants,
    covering_log_bound,
    filter_magnitude_bound,
    oracle_failure_prob,
    param_count,
    rate_predictions,
)
from .estimator import (
    ConvRidgeRegressor,
    Dataset,
    DivergenceError,
    ExperimentConfig,
    RateExperimentResult,
    SingularSystemError,
    clip,
    empirical_risk,
    feature_map,
    fit_coefficients,
    fit_full_gd,
    l2_error,
    model_parameters,
    rate_csv_text,
    rate_experiment,
    risk_gradient,
    sample_dataset,
    with_parameters,
)
from .filters import (
    FilterSequence,
    RootFindingError,
    cauchy_bound,
    convolve,
    convolve_all,
    factorize_filter,
    find_roots,
)
from .minimax import (
    PackingFamily,
    PackingSearchError,
    TwoPointKl,
    as_ridge_spec,
    bump,
    bump_l2_norm_sq,
    cell_bump,
    cell_centers,
    conditional_masses,
    family_from_dict,
    family_to_json,
    hamming,
    kl_two_point,
    lebesgue_l2_sq,
    make_family,
    pattern_function,
    pattern_values,
    suggested_cell_count,
    varshamov_gilbert_code,
)
from .network import (
    ConstraintCheck,
    ConvLayer,
    ConvNetModel,
    MembershipReport,
    forward,
    forward_batch,
    load_model,
    model_from_dict,
    model_to_json,
    perturbation_drift_constant,
    save_model,
    toeplitz_apply,
    toeplitz_matrix,
    validate_membership,
)
from .ridge import (
    RidgeComponent,
    RidgeSpec,
    build_biases,
    build_feature_network,
    build_network,
    certified_bound,
    feature_offset,
    interleave_directions,
    load_spec,
    spec_from_dict,
    sup_error,
)
from .sampling import sample_unit_ball
from .spline import SplineGrid, hat, quasi_interpolate, second_difference

__version__ = "0.1.0"
