//! Ranking metrics, cross-validation, and reports.

mod cv;
mod metrics;
mod report;

pub use cv::{cross_validate, outer_folds, CrosswalkModel, CvOptions, FoldStrategy, NoneMode, Params, Tuning};
pub use metrics::{apply_none_threshold, fleiss_kappa, mean_reciprocal_rank, recall_at_k, AnnotationTable, Kappa};
pub use report::{EvaluationReport, FoldRecord, ModelReport};
