//! Cross-validation plans, classification metrics, intraclass correlation
//! and the experiment runner that ties the pipeline together.

pub mod experiment;
pub mod folds;
pub mod icc;
pub mod metrics;

pub use experiment::{
    build_fold_plan, class_histogram, run_experiment, run_experiment_with, train_on_dataset, DatasetSummary, ExperimentReport,
    ExperimentSpec, FoldError, FoldReport, IccBlock, MeanMetrics, Timings, WindowConfig,
};
pub use folds::{make_loso, make_lsio, make_lsso, Fold, FoldPlan, FoldScheme, FoldUnits, InstanceKey};
pub use icc::{icc_two_way_mixed_absolute, IccResult};
pub use metrics::{confusion, metrics, ClassMetrics, ConfusionMatrix, MetricsReport};
