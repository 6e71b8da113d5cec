//! Online threshold monitor, spectral-feature classifier and detection metrics.

mod classifier;
mod dataset;
mod metrics;
mod monitor;

pub use classifier::{classify, sigmoid, train_classifier, LogisticModel, TrainConfig, TrainReport};
pub use dataset::{
    ablate_threshold, read_labeled_jsonl, stratified_split, write_labeled_jsonl, AblationRow, LabeledTrace, TraceSource,
};
pub use metrics::{compute_metrics, DetectionMetrics};
pub use monitor::{
    guarded_generate, monitor_all, monitor_step, monitor_trace, Decision, GuardConfig, GuardVerdict, GuardedRun,
    RhoWindow,
};
