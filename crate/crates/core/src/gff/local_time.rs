use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use super::reversible_kernel;
use crate::error::{Result, RmdpError};
use crate::mdp::{MdpInstance, Policy};
use crate::rng::{stream, StreamDomain};

/// Time scale of the continuous-time chain built on a kernel `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Jump rates `p_ij`; stationary law `pi`.
    Unit,
    /// Jump rates `pi_i p_ij`; stationary law uniform.
    Speed,
}

/// Holding rates and cumulative jump distributions over `j != i`.
pub(crate) struct JumpChain {
    rates: Vec<f64>,
    jumps: Vec<Vec<(usize, f64)>>,
}

impl JumpChain {
    pub(crate) fn new(p: &DMatrix<f64>, pi: &DVector<f64>, clock: Clock) -> Self {
        let n = p.nrows();
        let mut rates = Vec::with_capacity(n);
        let mut jumps = Vec::with_capacity(n);
        for i in 0..n {
            let leave: f64 = (0..n).filter(|&j| j != i).map(|j| p[(i, j)]).sum();
            let mut acc = 0.0;
            let table = (0..n)
                .filter(|&j| j != i && p[(i, j)] > 0.0)
                .map(|j| {
                    acc += p[(i, j)] / leave;
                    (j, acc)
                })
                .collect();
            rates.push(match clock {
                Clock::Unit => leave,
                Clock::Speed => pi[i] * leave,
            });
            jumps.push(table);
        }
        Self { rates, jumps }
    }

    fn holding_time(&self, x: usize, rng: &mut ChaCha8Rng) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / self.rates[x]
    }

    fn jump(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let table = &self.jumps[x];
        table
            .iter()
            .find(|&&(_, c)| u < c)
            .unwrap_or(table.last().expect("non-absorbing state"))
            .0
    }
}

/// Local times `L_{i, Gamma_{k,s}}` of the speed-clock chain started at `k`
/// and stopped when its time at `k` reaches `s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalTimeField {
    pub pin: usize,
    pub level: f64,
    pub count: usize,
    pub seed: u64,
    /// One row per trajectory; `samples[t][pin] == level`.
    pub samples: Vec<Vec<f64>>,
}

pub(crate) fn local_times_of_kernel(
    p: &DMatrix<f64>,
    pi: &DVector<f64>,
    k: usize,
    s: f64,
    count: usize,
    seed: u64,
) -> Result<LocalTimeField> {
    if !(s.is_finite() && s > 0.0) {
        return Err(RmdpError::InvalidLevel(s));
    }
    let n = p.nrows();
    if k >= n {
        return Err(RmdpError::DimensionMismatch(format!("pin {k} out of range for {n} states")));
    }
    let chain = JumpChain::new(p, pi, Clock::Speed);
    let samples = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, StreamDomain::LocalTime, t as u64);
            let mut local = vec![0.0; n];
            let mut x = k;
            loop {
                let hold = chain.holding_time(x, &mut rng);
                if x == k && local[k] + hold >= s {
                    local[k] = s;
                    break;
                }
                local[x] += hold;
                x = chain.jump(x, &mut rng);
            }
            local
        })
        .collect();
    Ok(LocalTimeField {
        pin: k,
        level: s,
        count,
        seed,
        samples,
    })
}

/// Simulates `count` independent trajectories; trajectory `t` uses only
/// the stream `(seed, t)`.
pub fn simulate_local_times(
    inst: &MdpInstance,
    pol: &Policy,
    k: usize,
    s: f64,
    count: usize,
    seed: u64,
) -> Result<LocalTimeField> {
    if !(s.is_finite() && s > 0.0) {
        return Err(RmdpError::InvalidLevel(s));
    }
    let (p, pi) = reversible_kernel(inst, pol)?;
    local_times_of_kernel(&p, &pi, k, s, count, seed)
}

/// Monte Carlo occupation times up to a horizon, with their centered form:
/// `occupation_j / pi_j - T` on the unit clock and `occupation_j - T / n`
/// on the speed clock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationEstimate {
    pub start: usize,
    pub horizon: f64,
    pub clock: Clock,
    pub count: usize,
    pub occupation_mean: Vec<f64>,
    pub occupation_se: Vec<f64>,
    pub centered_mean: Vec<f64>,
    pub centered_se: Vec<f64>,
}

pub fn occupation_excess(
    inst: &MdpInstance,
    pol: &Policy,
    start: usize,
    horizon: f64,
    clock: Clock,
    count: usize,
    seed: u64,
) -> Result<OccupationEstimate> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(RmdpError::InvalidLevel(horizon));
    }
    let (p, pi) = reversible_kernel(inst, pol)?;
    let n = p.nrows();
    if start >= n {
        return Err(RmdpError::DimensionMismatch(format!("start {start} out of range for {n} states")));
    }
    if count < 2 {
        return Err(RmdpError::InvalidConfig("need at least 2 runs".into()));
    }
    let chain = JumpChain::new(&p, &pi, clock);
    let runs: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, StreamDomain::Occupation, t as u64);
            let mut occ = vec![0.0; n];
            let (mut x, mut now) = (start, 0.0);
            loop {
                let hold = chain.holding_time(x, &mut rng);
                if now + hold >= horizon {
                    occ[x] += horizon - now;
                    break;
                }
                occ[x] += hold;
                now += hold;
                x = chain.jump(x, &mut rng);
            }
            occ
        })
        .collect();
    let mut mean = vec![0.0; n];
    let mut se = vec![0.0; n];
    for j in 0..n {
        let m = runs.iter().map(|r| r[j]).sum::<f64>() / count as f64;
        let var = runs.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (count - 1) as f64;
        mean[j] = m;
        se[j] = (var / count as f64).sqrt();
    }
    let (centered_mean, centered_se) = match clock {
        Clock::Unit => (
            (0..n).map(|j| mean[j] / pi[j] - horizon).collect(),
            (0..n).map(|j| se[j] / pi[j]).collect(),
        ),
        Clock::Speed => ((0..n).map(|j| mean[j] - horizon / n as f64).collect(), se.clone()),
    };
    Ok(OccupationEstimate {
        start,
        horizon,
        clock,
        count,
        occupation_mean: mean,
        occupation_se: se,
        centered_mean,
        centered_se,
    })
}
