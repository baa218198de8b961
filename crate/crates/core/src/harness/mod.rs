//! Synthetic ground-truth scenarios and the comparison experiments built on them.

mod experiment;
mod scenario;

pub use experiment::{
    bench_methods, default_initials, evaluate_run, ground_truth_losses, is_slippery,
    matched_config, replay, run_identification_experiment, sweep_initials, sweep_rho, BenchReport,
    BenchRow, MethodSummary, RhoPoint, RunMetrics, CONVERGENCE_TOLERANCE,
};

pub use scenario::{
    run_scenario, GroundTruth, ModelKind, ScenarioConfig, ScenarioKind, ScenarioRun, Segment,
    TerrainSchedule, NON_SLIPPERY_MU, SLIPPERY_MU,
};
