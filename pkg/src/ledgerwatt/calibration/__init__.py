"""Statistical calibration of the Filecoin model constants."""

from .pipeline import (
    CalibrationResult,
    calibrate,
    evp_estimates,
    interview_estimates,
    online_pue_estimate,
    survey_estimates,
)
from .sources import (
    EvpMonthlyRecord,
    IqrFence,
    ManualOutliers,
    SourceEstimate,
    WeightsConfig,
    apply_weights,
    combine_quantity,
    combine_sources,
    flag_outliers,
    read_outlier_flags,
    read_sources,
    read_weights,
    weighted_mean,
)
from .stats import (
    PairedObservations,
    RegressionFit,
    ols_fit,
    ols_fit_two,
    pearson_r,
    student_t_sf,
    two_sided_p,
)

__all__ = [
    "CalibrationResult",
    "calibrate",
    "evp_estimates",
    "interview_estimates",
    "online_pue_estimate",
    "survey_estimates",
    "EvpMonthlyRecord",
    "IqrFence",
    "ManualOutliers",
    "SourceEstimate",
    "WeightsConfig",
    "apply_weights",
    "combine_quantity",
    "combine_sources",
    "flag_outliers",
    "read_outlier_flags",
    "read_sources",
    "read_weights",
    "weighted_mean",
    "PairedObservations",
    "RegressionFit",
    "ols_fit",
    "ols_fit_two",
    "pearson_r",
    "student_t_sf",
    "two_sided_p",
]
