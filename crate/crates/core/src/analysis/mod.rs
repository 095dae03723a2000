//! Closed-form moment oracles, exact one-step expectations and the Monte
//! Carlo drift harness.

mod contraction;
mod drift;
mod moments;

pub use contraction::{
    contraction_sweep, expected_onestep_sq_error, expected_onestep_via_identity, SweepRow,
    SweepTable,
};
pub use drift::{run_drift_experiment, synthetic_init, DriftConfig, DriftReport};
pub use moments::{
    estimate_moment, fourth_moment_exact, mismatch_prob_exact, second_moment_exact, MomentEstimate,
    MomentKind,
};
