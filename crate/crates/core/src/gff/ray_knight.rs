use serde::Serialize;

use super::local_time::local_times_of_kernel;
use super::{pinned_green_of_kernel, reversible_kernel, sample_field_with};
use crate::error::{Result, RmdpError};
use crate::mdp::{MdpInstance, Policy};
use crate::rng::StreamDomain;

/// Differences below this count as exact agreement; at the pin both sides
/// equal `s` up to rounding and their standard errors vanish.
const EXACT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayKnightStateStats {
    pub state: usize,
    pub g_ii: f64,
    /// `g_ii / 2 + s`.
    pub analytic_mean: f64,
    /// `g_ii^2 / 2 + 2 s g_ii`.
    pub analytic_variance: f64,
    pub local_time_mean: f64,
    pub local_time_se: f64,
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub lhs_variance: f64,
    pub lhs_variance_se: f64,
    pub rhs_mean: f64,
    pub rhs_se: f64,
    pub rhs_variance: f64,
    pub rhs_variance_se: f64,
    /// `E[L_i]` against `s`.
    pub z_local_time: f64,
    /// LHS mean against the analytic mean.
    pub z_lhs_analytic: f64,
    /// LHS mean against RHS mean.
    pub z_mean: f64,
    /// LHS variance against RHS variance.
    pub z_variance: f64,
    /// Two-sample Kolmogorov-Smirnov distance, reported only.
    pub ks_statistic: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayKnightReport {
    pub pin: usize,
    pub level: f64,
    pub count: usize,
    pub seed: u64,
    pub z_threshold: f64,
    pub states: Vec<RayKnightStateStats>,
    pub pass: bool,
}

struct Moments {
    mean: f64,
    se: f64,
    variance: f64,
    variance_se: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0);
    Moments {
        mean,
        se: (variance / n).sqrt(),
        variance,
        variance_se: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if diff.abs() <= EXACT_SLACK {
        0.0
    } else if se > 0.0 {
        diff.abs() / se
    } else {
        f64::INFINITY
    }
}

fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

/// Compares `L + V^2 / 2` with `(V' + sqrt(2 s))^2 / 2` state by state,
/// using independent pinned fields `V`, `V'` and local times `L` at
/// `Gamma_{k,s}`.
pub fn ray_knight_check(
    inst: &MdpInstance,
    pol: &Policy,
    k: usize,
    s: f64,
    count: usize,
    seed: u64,
    z_threshold: f64,
) -> Result<RayKnightReport> {
    if count < 2 {
        return Err(RmdpError::InvalidConfig("need at least 2 trajectories".into()));
    }
    let (p, pi) = reversible_kernel(inst, pol)?;
    let local = local_times_of_kernel(&p, &pi, k, s, count, seed)?;
    let green = pinned_green_of_kernel(&p, k)?;
    let left = sample_field_with(&green, count, seed, StreamDomain::RayKnightLeft)?;
    let right = sample_field_with(&green, count, seed, StreamDomain::RayKnightRight)?;
    let shift = (2.0 * s).sqrt();
    let diag = green.diagonal();

    let states: Vec<RayKnightStateStats> = (0..p.nrows())
        .map(|i| {
            let l: Vec<f64> = local.samples.iter().map(|row| row[i]).collect();
            let lhs: Vec<f64> = l.iter().zip(&left).map(|(li, v)| li + 0.5 * v[i] * v[i]).collect();
            let rhs: Vec<f64> = right.iter().map(|v| 0.5 * (v[i] + shift).powi(2)).collect();
            let (lm, a, b) = (moments(&l), moments(&lhs), moments(&rhs));
            let g = diag[i];
            let analytic_mean = 0.5 * g + s;
            let z_local_time = z_score(lm.mean - s, lm.se);
            let z_lhs_analytic = z_score(a.mean - analytic_mean, a.se);
            let z_mean = z_score(a.mean - b.mean, a.se.hypot(b.se));
            let z_variance = z_score(a.variance - b.variance, a.variance_se.hypot(b.variance_se));
            let pass = [z_local_time, z_lhs_analytic, z_mean, z_variance]
                .iter()
                .all(|z| *z <= z_threshold);
            RayKnightStateStats {
                state: i,
                g_ii: g,
                analytic_mean,
                analytic_variance: 0.5 * g * g + 2.0 * s * g,
                local_time_mean: lm.mean,
                local_time_se: lm.se,
                lhs_mean: a.mean,
                lhs_se: a.se,
                lhs_variance: a.variance,
                lhs_variance_se: a.variance_se,
                rhs_mean: b.mean,
                rhs_se: b.se,
                rhs_variance: b.variance,
                rhs_variance_se: b.variance_se,
                z_local_time,
                z_lhs_analytic,
                z_mean,
                z_variance,
                ks_statistic: ks_distance(&lhs, &rhs),
                pass,
            }
        })
        .collect();
    Ok(RayKnightReport {
        pin: k,
        level: s,
        count,
        seed,
        z_threshold,
        pass: states.iter().all(|st| st.pass),
        states,
    })
}
