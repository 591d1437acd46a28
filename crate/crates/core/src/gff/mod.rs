//! Gaussian free field of a reversible controlled chain.
//!
//! The field `V` has covariance `c_ij = z_ij / pi_j`. It is only defined up
//! to an additive constant, so it is handled through pinned coordinates
//! `V^[k] = V - V_k`, whose covariance is the Green function of the chain
//! with jump rates `pi_i p_ij` killed at `k`.

mod local_time;
mod ray_knight;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::config;
use crate::error::{Result, RmdpError};
use crate::linalg;
use crate::mdp::{self, MdpInstance, Policy};
use crate::rng::{stream, StreamDomain};
use crate::solve::fundamental_matrix;

pub use local_time::{occupation_excess, simulate_local_times, Clock, LocalTimeField, OccupationEstimate};
pub use ray_knight::{ray_knight_check, RayKnightReport, RayKnightStateStats};

/// Relative symmetry tolerance of the covariance.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative lower bound on the smallest covariance eigenvalue.
pub const PSD_TOL: f64 = 1e-9;
/// Relative agreement between the two pinned Green function routes.
pub const GREEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GffCovariance {
    pub c: DMatrix<f64>,
    pub pi: DVector<f64>,
    pub asymmetry: f64,
    pub min_eigenvalue: f64,
}

fn scale(m: &DMatrix<f64>) -> f64 {
    linalg::max_abs(m).max(1.0)
}

fn reversible_kernel(inst: &MdpInstance, pol: &Policy) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let p = mdp::controlled_kernel(inst, pol)?;
    let pi = mdp::stationary_distribution(&p)?;
    let (i, j, gap) = mdp::balance_gap(&p, &pi);
    if gap > config::BALANCE_TOL {
        return Err(RmdpError::NotReversible { i, j, gap });
    }
    Ok((p, pi))
}

/// `c_ij = z_ij / pi_j`, checked symmetric, positive semidefinite and
/// annihilated by `pi` on both sides.
pub fn gff_covariance(inst: &MdpInstance, pol: &Policy) -> Result<GffCovariance> {
    let (p, _) = reversible_kernel(inst, pol)?;
    covariance_of_kernel(&p)
}

pub fn covariance_of_kernel(p: &DMatrix<f64>) -> Result<GffCovariance> {
    let fm = fundamental_matrix(p)?;
    let n = p.nrows();
    let c = DMatrix::from_fn(n, n, |i, j| fm.z[(i, j)] / fm.pi[j]);
    let size = scale(&c);
    let asymmetry = linalg::asymmetry(&c);
    if asymmetry > SYMMETRY_TOL * size {
        let (mut wi, mut wj) = (0, 0);
        for i in 0..n {
            for j in 0..n {
                if (c[(i, j)] - c[(j, i)]).abs() > (c[(wi, wj)] - c[(wj, wi)]).abs() {
                    (wi, wj) = (i, j);
                }
            }
        }
        return Err(RmdpError::NotReversible {
            i: wi.min(wj),
            j: wi.max(wj),
            gap: asymmetry,
        });
    }
    let min_eigenvalue = linalg::min_symmetric_eigenvalue(&c);
    if min_eigenvalue < -PSD_TOL * size {
        return Err(RmdpError::NotPsd(min_eigenvalue));
    }
    let quad = (fm.pi.transpose() * &c * &fm.pi)[(0, 0)];
    if quad.abs() > SYMMETRY_TOL * size {
        return Err(RmdpError::Inconsistent(format!("pi^T C pi = {quad:e}")));
    }
    Ok(GffCovariance {
        c,
        pi: fm.pi,
        asymmetry,
        min_eigenvalue,
    })
}

/// Covariance of `V_i - V_k` over the states other than `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedGreen {
    pub pin: usize,
    /// States indexing the rows of `g`, ascending.
    pub states: Vec<usize>,
    pub g: DMatrix<f64>,
    /// Largest deviation from `c_ij - c_ik - c_kj + c_kk`.
    pub cross_check_gap: f64,
}

impl PinnedGreen {
    pub fn n_states(&self) -> usize {
        self.states.len() + 1
    }

    /// `n x n` embedding with a zero row and column at the pin.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.n_states();
        let mut out = DMatrix::zeros(n, n);
        for (a, &i) in self.states.iter().enumerate() {
            for (b, &j) in self.states.iter().enumerate() {
                out[(i, j)] = self.g[(a, b)];
            }
        }
        out
    }

    /// `g_ii` for every state, zero at the pin.
    pub fn diagonal(&self) -> Vec<f64> {
        let full = self.full();
        (0..self.n_states()).map(|i| full[(i, i)]).collect()
    }
}

/// Inverts `D_pi (I - P)` with row and column `k` removed and cross-checks
/// the result against the covariance.
pub fn pinned_green(inst: &MdpInstance, pol: &Policy, k: usize) -> Result<PinnedGreen> {
    let (p, _) = reversible_kernel(inst, pol)?;
    pinned_green_of_kernel(&p, k)
}

pub fn pinned_green_of_kernel(p: &DMatrix<f64>, k: usize) -> Result<PinnedGreen> {
    let n = p.nrows();
    if k >= n {
        return Err(RmdpError::DimensionMismatch(format!("pin {k} out of range for {n} states")));
    }
    let cov = covariance_of_kernel(p)?;
    let pi = &cov.pi;
    let states: Vec<usize> = (0..n).filter(|&i| i != k).collect();
    let rates = DMatrix::from_fn(n - 1, n - 1, |a, b| {
        let (i, j) = (states[a], states[b]);
        pi[i] * (if i == j { 1.0 } else { 0.0 } - p[(i, j)])
    });
    let g = linalg::solve(&rates, &DMatrix::identity(n - 1, n - 1))?;
    let c = &cov.c;
    let formula = DMatrix::from_fn(n - 1, n - 1, |a, b| {
        let (i, j) = (states[a], states[b]);
        c[(i, j)] - c[(i, k)] - c[(k, j)] + c[(k, k)]
    });
    let cross_check_gap = linalg::max_abs(&(&g - &formula));
    if cross_check_gap > GREEN_TOL * scale(&g) {
        return Err(RmdpError::Inconsistent(format!(
            "pinned Green function disagrees with covariance by {cross_check_gap:e}"
        )));
    }
    Ok(PinnedGreen {
        pin: k,
        states,
        g,
        cross_check_gap,
    })
}

fn cholesky(g: &PinnedGreen) -> Result<DMatrix<f64>> {
    Cholesky::new(g.g.clone())
        .map(|ch| ch.l())
        .ok_or_else(|| RmdpError::FactorizationFailure("pinned Green function is not positive definite".into()))
}

pub(crate) fn sample_field_with(
    g: &PinnedGreen,
    count: usize,
    seed: u64,
    domain: StreamDomain,
) -> Result<Vec<Vec<f64>>> {
    let l = cholesky(g)?;
    let d = g.states.len();
    let n = g.n_states();
    Ok((0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, domain, t as u64);
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let v = &l * z;
            let mut full = vec![0.0; n];
            for (a, &i) in g.states.iter().enumerate() {
                full[i] = v[a];
            }
            full
        })
        .collect())
}

/// `count` draws of the pinned field; sample `t` depends only on
/// `(seed, t)` and has an exact zero at the pin.
pub fn sample_pinned_field(g: &PinnedGreen, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    sample_field_with(g, count, seed, StreamDomain::PinnedField)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_chain_covariance() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let cov = covariance_of_kernel(&p).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((cov.c - want).amax() < 1e-15);
    }

    #[test]
    fn two_state_green() {
        let p = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.8, 0.2]);
        let g = pinned_green_of_kernel(&p, 1).unwrap();
        let pi1 = 0.8 / 1.2;
        assert!((g.g[(0, 0)] - 1.0 / (pi1 * 0.4)).abs() < 1e-12);
        assert_eq!(g.diagonal()[1], 0.0);
    }

    #[test]
    fn non_reversible_chain_is_rejected() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 0.9, 0.1, 0.1, 0.0, 0.9, 0.9, 0.1, 0.0]);
        assert!(matches!(covariance_of_kernel(&p), Err(RmdpError::NotReversible { .. })));
    }

    #[test]
    fn pin_out_of_range() {
        let p = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.8, 0.2]);
        assert!(pinned_green_of_kernel(&p, 2).is_err());
    }
}
