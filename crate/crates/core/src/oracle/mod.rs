//! Independent checks on the closed forms: exact propagation of the
//! classical `(n, m)` chain and seeded Monte Carlo trajectories.
//!
//! Diagonal states evolve under both jump superoperators as a classical
//! death process in the photon number with a counter for registered clicks,
//! so the counting statistics can be recomputed without any of the
//! generating-function algebra. Everything here is `f64`.

mod markov;
mod montecarlo;

pub use markov::{markov_counts, markov_counts_series, markov_joint, JointState, MARKOV_TOL};
pub use montecarlo::{
    chi_square_gof, mc_trajectories, mc_waiting_time, trajectory_rng, ChiSquare, ClickKind,
    ClickRecord, McCounts, WtEstimate, MC_SAMPLE_RECORDS, WT_BIN_WIDTH,
};
