//! Numeric defaults shared by every module.
//!
//! Everything that is a threshold lives here so the CLI can expose a single
//! override surface.

use serde::{Deserialize, Serialize};

/// Row sums of kernels and policies must equal 1 within this.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// An entry counts as structurally positive iff it exceeds this.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Default detailed-balance and stationarity tolerance.
pub const BALANCE_TOL: f64 = 1e-9;

/// Default tolerance when checking that block-normalized transition
/// ratios agree across actions.
pub const RATIO_TOL: f64 = 1e-9;

/// An improvement step is accepted only if its gap exceeds this.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

/// Values within this of a maximum are treated as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Default cap on the number of enumerated deterministic policies.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Default z threshold for the statistical Ray-Knight comparisons.
pub const RAY_KNIGHT_Z: f64 = 4.0;

/// Default lower bound of the hold-probability complement drawn by the
/// instance generator.
pub const GENERATOR_RHO_MIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub stochastic: f64,
    pub support: f64,
    pub balance: f64,
    pub ratio: f64,
    pub improvement: f64,
    pub tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stochastic: STOCHASTIC_TOL,
            support: SUPPORT_THRESHOLD,
            balance: BALANCE_TOL,
            ratio: RATIO_TOL,
            improvement: IMPROVEMENT_TOL,
            tie: TIE_TOL,
        }
    }
}
