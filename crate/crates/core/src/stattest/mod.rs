//! Monte-Carlo probes of the Markov property.
//!
//! A process is observed at `(ε, 1, 2)`. Samples of the value at 2 are
//! collected under a shared window at 1 and two different windows at `ε`;
//! a two-sample KS test compares them. For a Markov process the two laws
//! agree up to window bias.

pub mod ks;
pub mod process;
pub mod report;

pub use ks::{
    dkw_bound, ks_distance_to, ks_one_sample, ks_statistic, ks_two_sample, TestReport, Verdict,
};
pub use process::{
    cmx_path, conditional_sample, conditional_sample_arms, sample_z_process, BesqSum, Cmx,
    ConditionalSample, ConditioningWindow, ModelParams, ProcessModel, ProcessRegistry, RunningMax,
    SamplingBudget, SkeletonSampler,
};
pub use report::{
    markov_discrepancy_report, repeat_cell, run_cell, CSummary, CellReport, CellSpec, MarkovReport,
    MarkovTestConfig, RepetitionSummary,
};
