use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, RmdpError};
use crate::linalg;
use crate::mdp::{self, MdpInstance, Policy};

/// `Z = sum_k (P^k - 1 pi^T)` in the Cesàro sense, with the chain's
/// stationary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    pub z: DMatrix<f64>,
    pub pi: DVector<f64>,
}

impl FundamentalMatrix {
    /// Largest violation of `Z 1 = 0`, `pi^T Z = 0` and
    /// `(I - P) Z = I - 1 pi^T` against `p`.
    pub fn residual(&self, p: &DMatrix<f64>) -> f64 {
        let n = self.z.nrows();
        let ones = DVector::from_element(n, 1.0);
        let rows = (&self.z * &ones).amax();
        let cols = (self.pi.transpose() * &self.z).amax();
        let centered = DMatrix::identity(n, n) - &ones * self.pi.transpose();
        let eq = linalg::max_abs(&((DMatrix::identity(n, n) - p) * &self.z - centered));
        rows.max(cols).max(eq)
    }
}

/// Solves `(I - P + 1 pi^T) Z = I - 1 pi^T`, which is exact for periodic
/// chains too.
pub fn fundamental_matrix(p: &DMatrix<f64>) -> Result<FundamentalMatrix> {
    let pi = mdp::stationary_distribution(p)?;
    let n = p.nrows();
    let ones = DVector::from_element(n, 1.0);
    let projector = &ones * pi.transpose();
    let a = DMatrix::identity(n, n) - p + &projector;
    let z = linalg::solve(&a, &(DMatrix::identity(n, n) - projector))?;
    Ok(FundamentalMatrix { z, pi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasNormalization {
    /// `sum_i pi_i h_i = 0`, as produced by `h = Z r`.
    StationaryMeanZero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonSolution {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub stationary: Vec<f64>,
    pub normalization: BiasNormalization,
    /// `max_i |beta + h_i - r_i - (P h)_i|`.
    pub residual: f64,
}

/// Gain `pi^T r` and bias `Z r` of a policy.
pub fn poisson_solve(inst: &MdpInstance, pol: &Policy) -> Result<PoissonSolution> {
    let p = mdp::controlled_kernel(inst, pol)?;
    let r = mdp::policy_rewards(inst, pol)?;
    let fm = fundamental_matrix(&p)?;
    let gain = fm.pi.dot(&r);
    let h = &fm.z * &r;
    let lhs = DVector::from_element(r.len(), gain) + &h;
    let rhs = &r + &p * &h;
    let residual = (lhs - rhs).amax();
    Ok(PoissonSolution {
        gain,
        bias: h.iter().copied().collect(),
        stationary: fm.pi.iter().copied().collect(),
        normalization: BiasNormalization::StationaryMeanZero,
        residual,
    })
}

/// Long-run average reward of a deterministic policy.
pub fn gain(inst: &MdpInstance, actions: &[usize]) -> Result<f64> {
    let p = mdp::deterministic_kernel(inst, actions);
    let pi = mdp::stationary_distribution(&p)?;
    Ok((0..inst.n_states()).map(|i| pi[i] * inst.reward(i, actions[i])).sum())
}

/// `q(i, v) = r(i, v) + sum_j p_ij(v) (h_j - h_i)`.
pub fn q_values(inst: &MdpInstance, bias: &[f64]) -> DMatrix<f64> {
    let n = inst.n_states();
    DMatrix::from_fn(n, inst.n_actions(), |i, v| {
        inst.reward(i, v) + (0..n).map(|j| inst.p(i, j, v) * (bias[j] - bias[i])).sum::<f64>()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateOptimality {
    pub state: usize,
    pub q: Vec<f64>,
    pub max: f64,
    /// Actions within the tolerance of `max`.
    pub maximizers: Vec<usize>,
    /// Every action the policy uses attains the maximum.
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub gain: f64,
    pub states: Vec<StateOptimality>,
    pub violations: Vec<usize>,
    pub optimal: bool,
}

/// Average-reward optimality test of `pol` given its bias.
pub fn dp_check_with_bias(inst: &MdpInstance, pol: &Policy, gain: f64, bias: &[f64], tol: f64) -> Result<OptimalityReport> {
    if bias.len() != inst.n_states() || pol.n_states() != inst.n_states() || pol.n_actions() != inst.n_actions() {
        return Err(RmdpError::DimensionMismatch("policy or bias does not match instance".into()));
    }
    let q = q_values(inst, bias);
    let states: Vec<StateOptimality> = (0..inst.n_states())
        .map(|i| {
            let row: Vec<f64> = q.row(i).iter().copied().collect();
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let maximizers = (0..row.len()).filter(|&v| row[v] >= max - tol).collect();
            let satisfied = (0..row.len()).all(|u| pol.weight(i, u) == 0.0 || row[u] >= max - tol);
            StateOptimality {
                state: i,
                q: row,
                max,
                maximizers,
                satisfied,
            }
        })
        .collect();
    let violations: Vec<usize> = states.iter().filter(|s| !s.satisfied).map(|s| s.state).collect();
    Ok(OptimalityReport {
        gain,
        optimal: violations.is_empty(),
        states,
        violations,
    })
}

pub fn dp_check(inst: &MdpInstance, pol: &Policy, tol: f64) -> Result<OptimalityReport> {
    let sol = poisson_solve(inst, pol)?;
    dp_check_with_bias(inst, pol, sol.gain, &sol.bias, tol)
}
