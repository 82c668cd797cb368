//! Dataset manifests, the evaluation runner, ranking and reports.

pub mod manifest;
pub mod names;
pub mod protocol;
pub mod report;
pub mod runner;

pub use manifest::{Manifest, ManifestRecord, PredictionEntry};
pub use names::{direction_of, image_metric_map, Direction};
pub use protocol::{Protocol, Suites};
pub use report::{
    dense_ranks, emit_report, rank_methods, render_csv, render_json, render_markdown, round_sig6,
    Failure, ImageResult, MethodSummary, MetricReport, RankEntry, Ranking, ReportFormat, RANK_KEYS,
};
pub use runner::{build_report, evaluate_pair, run_evaluation, PairEvaluation};
