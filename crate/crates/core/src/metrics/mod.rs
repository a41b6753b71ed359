//! Error metrics, daily extremum windows, one-step and multi-step evaluation
//! with monthly grouping, and adjoint-vs-plain comparison tables.

pub mod errors;
pub mod evaluate;
pub mod extremum;
pub mod report;

pub use errors::{error_all, ErrorAccum, ErrorStats};
pub use evaluate::{
    evaluate, evaluate_both, window_seed, EvalConfig, EvalMode, EvaluationReport, PeriodMetrics,
    StepMetrics, REPORT_FORMAT, REPORT_VERSION,
};
pub use extremum::{error_extremum, extremum_windows, window_members, ExtremumKind, ExtremumWindow, EXTREMUM_RADIUS};
pub use report::{comparison_csv, compare, coverage_csv, metric_values, monthly_csv, Comparison, ComparisonRow};
