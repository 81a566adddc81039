//! Forecast accuracy metrics and the nonparametric comparison of models.

mod metrics;
mod stats;

pub use metrics::{
    aggregate, evaluate_forecasts, mase, smape, Aggregates, MetricResult, SeriesMetrics,
    DEFAULT_SMAPE_EPSILON,
};
pub use stats::{
    chi_square_sf, friedman_test, holm_adjust, stat_test_report, wilcoxon_signed_rank,
    FriedmanResult, PairwiseTest, StatTestReport, WilcoxonMethod, WilcoxonResult,
    EXACT_WILCOXON_MAX,
};
