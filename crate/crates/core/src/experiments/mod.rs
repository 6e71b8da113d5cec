//! Clamp interventions, recall and retention benchmarks, phase grids and
//! labeled trace generation.

mod clamp;
mod datasets;
mod recall;
mod retention;
mod validate;

pub use clamp::{clamp_operator, run_with_clamp, run_with_clamp_from, ClampMode, ClampProtocol};
pub use datasets::{gen_labeled_traces, synthetic_monitor_traces, AdversarialSource, TraceGenConfig};
pub use recall::{gen_recall_dataset, gen_recall_task, RecallConfig, RecallTask};
pub use retention::{
    empirical_horizon, phase_transition_grid, retention_curve, retention_probe, PhaseGrid, DEFAULT_DISTANCES,
    DEFAULT_EPSILON, DEFAULT_RHO_LEVELS,
};
pub use validate::{validate_power_method, validate_spectral, PowerValidation};
