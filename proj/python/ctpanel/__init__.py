"""Behavior feature panels and multiple-group continuous-time latent-variable fits."""

from ._ctpanel import (  # noqa: F401
    CHANNELS,
    SCHEMA_VERSION,
    ConfigError,
    DataError,
    DegenerateInputError,
    NumericalError,
    __version__,
    aic,
    best_rater_subset,
    build_slice_grid,
    discretize_dynamics,
    dominant_affect,
    evaluate_rules,
    featurize_dir,
    filter_raters_by_time,
    fit_panels,
    head_motion_variance,
    icc,
    inverse_bias_correct,
    kalman_loglik,
    krippendorff_alpha,
    simulate_design,
    stationary_covariance,
    turn_metrics,
)
