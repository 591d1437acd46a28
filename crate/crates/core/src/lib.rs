//! Reversible Markov decision processes.
//!
//! An MDP is reversible when every stationary policy yields an irreducible
//! chain satisfying detailed balance. This crate decides that property,
//! exposes the block structure and factorization it forces on the kernels,
//! solves the average-reward problem with full and gain-only policy
//! iteration, and works with the Gaussian free field of a controlled chain.

pub mod config;
pub mod error;
pub mod factorize;
pub mod fixtures;
pub mod generate;
pub mod gff;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod rng;
pub mod solve;
pub mod structure;

pub use config::Tolerances;
pub use error::{Result, RmdpError};
pub use factorize::{BiconnectedFactors, Factorization};
pub use generate::{generate_instance, GeneratorConfig, GeneratorMode};
pub use mdp::{is_rmdp, MdpInstance, Policy, RmdpCheckOptions, RmdpVerdict};
pub use structure::{BlockStructure, CanonicalGraph};
