//! Average-reward evaluation and policy iteration.
//!
//! Three improvement rules are provided. The standard rule needs the bias
//! `h` and works for any irreducible MDP. On reversible MDPs the gain alone
//! suffices: on a biconnected canonical graph at every state, and in general
//! at states that are not articulation points. The hybrid loop takes
//! gain-only steps while it can and falls back to bias steps otherwise.

mod iterate;
mod poisson;

pub use iterate::{
    biconnected_gain, brute_force_optimal, improve_biconnected, improve_nonarticulation,
    policy_iterate_biconnected, policy_iterate_hybrid, policy_iterate_standard, BruteForceOptimum,
    PolicyIterationTrace, StepRecord, StepRule, Variant,
};
pub use poisson::{
    dp_check, dp_check_with_bias, fundamental_matrix, gain, poisson_solve, q_values,
    BiasNormalization, FundamentalMatrix, OptimalityReport, PoissonSolution, StateOptimality,
};
