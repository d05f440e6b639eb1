//! Consistency-accuracy metrics for multiple-choice model evaluation.
//!
//! Responses to the M reordered (or otherwise perturbed) variants of each
//! question form a divergence set. From those sets the crate computes
//! classical accuracy metrics (MCQA, MCQA+, majority vote), the
//! minimum-consistency accuracy MCA(c), CAR curves over a threshold grid,
//! their trapezoidal area (AUCAR), a DTW similarity to the ideal curve
//! normalized by the worst case, and the CORE index combining the two.
//!
//! ```
//! use cat_core::{metric_report, simulate_run, BiasedModelSpec, ThresholdGrid};
//!
//! let run = simulate_run(&BiasedModelSpec::chance(4, 200, 10, 7)).unwrap();
//! let report = metric_report(&run, &ThresholdGrid::default()).unwrap();
//! assert!(report.core <= report.aucar);
//! ```

pub mod baseline;
pub mod car;
pub mod dtw;
pub mod error;
pub mod growth;
pub mod perturb;
pub mod plot;
pub mod record;
pub mod report;
pub mod softscore;
pub mod synthetic;

pub use baseline::{mcqa, mcqa_plus, mv, mv_with, rc, rc_values, ScalarMetric, TieRule};
pub use car::{
    aucar, car_curve, car_curve_of, core_index, mca, mca_of, CarCurve, CoreBreakdown,
    ThresholdGrid, THRESHOLD_TOLERANCE,
};
pub use dtw::dtw_distance;
pub use error::{CatError, Result};
pub use growth::{growth, slopes, Growth, MetricKind, ReportBundle};
pub use perturb::{
    depermute, make_variants, parse_answer, permute, render_prompt, McQuestion, ParseRule,
    ParsedAnswer, Permutation, VariantPlan,
};
pub use record::{
    emit_run, ingest_run, read_run, validate_run, AnswerRecord, DivergenceSet, EvaluationRun,
    ValidationSummary,
};
pub use report::{metric_report, metric_report_with, MetricReport, NamedCurve};
pub use softscore::{
    soft_metric_report, soft_rc, token_overlap_scorer, ExactMatchScorer, SimilarityScorer,
    SoftDivergenceSet, SoftRcMode, SoftRun, TokenOverlapScorer,
};
pub use synthetic::{
    bias_sweep, chance_baseline, simulate_run, BiasedModelSpec, ChanceBaselineSpec,
};
