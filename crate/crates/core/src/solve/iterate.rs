use std::collections::HashSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::poisson::{self, dp_check, poisson_solve, q_values};
use crate::config::Tolerances;
use crate::error::{Result, RmdpError};
use crate::factorize::{self, BiconnectedFactors, Factorization};
use crate::mdp::{DeterministicPolicies, MdpInstance, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Standard,
    Biconnected,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Argmax of `r + P h` using the bias.
    Bias,
    /// Argmax of `(r - beta) / rho` using the gain only.
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub state: usize,
    pub from: usize,
    pub to: usize,
    pub rule: StepRule,
    pub gain_before: f64,
    pub gain_after: f64,
    /// Policy after the step.
    pub policy: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyIterationTrace {
    pub variant: Variant,
    pub start: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub terminal: Vec<usize>,
    pub gain: f64,
    /// Outcome of the optimality test on `terminal`.
    pub optimal: bool,
}

fn check_actions(inst: &MdpInstance, actions: &[usize]) -> Result<()> {
    if actions.len() != inst.n_states() {
        return Err(RmdpError::DimensionMismatch(format!(
            "policy has {} states, instance has {}",
            actions.len(),
            inst.n_states()
        )));
    }
    if let Some(&a) = actions.iter().find(|&&a| a >= inst.n_actions()) {
        return Err(RmdpError::DimensionMismatch(format!("action index {a} out of range")));
    }
    Ok(())
}

/// Lowest-index action within `tie` of the row maximum, if the maximum
/// beats `current` by more than `improvement`.
fn improving_action(values: impl Iterator<Item = f64> + Clone, current: f64, tol: &Tolerances) -> Option<usize> {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max > current + tol.improvement {
        values.enumerate().find(|&(_, v)| v >= max - tol.tie).map(|(a, _)| a)
    } else {
        None
    }
}

struct Tracer<'a> {
    inst: &'a MdpInstance,
    variant: Variant,
    start: Vec<usize>,
    current: Vec<usize>,
    gain: f64,
    steps: Vec<StepRecord>,
    seen: HashSet<Vec<usize>>,
}

impl<'a> Tracer<'a> {
    fn new(inst: &'a MdpInstance, variant: Variant, start: &[usize]) -> Result<Self> {
        check_actions(inst, start)?;
        Ok(Self {
            inst,
            variant,
            start: start.to_vec(),
            current: start.to_vec(),
            gain: poisson::gain(inst, start)?,
            steps: Vec::new(),
            seen: HashSet::from([start.to_vec()]),
        })
    }

    fn step(&mut self, state: usize, to: usize, rule: StepRule) -> Result<()> {
        let from = self.current[state];
        self.current[state] = to;
        if !self.seen.insert(self.current.clone()) {
            return Err(RmdpError::CycleDetected { steps: self.steps.len() + 1 });
        }
        let gain_after = poisson::gain(self.inst, &self.current)?;
        self.steps.push(StepRecord {
            state,
            from,
            to,
            rule,
            gain_before: self.gain,
            gain_after,
            policy: self.current.clone(),
        });
        self.gain = gain_after;
        Ok(())
    }

    fn finish(self, tol: &Tolerances) -> Result<PolicyIterationTrace> {
        let m = self.inst.n_actions();
        let report = dp_check(self.inst, &Policy::deterministic(&self.current, m), tol.improvement)?;
        Ok(PolicyIterationTrace {
            variant: self.variant,
            start: self.start,
            steps: self.steps,
            terminal: self.current,
            gain: self.gain,
            optimal: report.optimal,
        })
    }
}

/// Lowest state (optionally restricted by `allowed`) admitting a bias
/// improvement, with its new action.
fn bias_improvement(
    inst: &MdpInstance,
    actions: &[usize],
    tol: &Tolerances,
    allowed: impl Fn(usize) -> bool,
) -> Result<Option<(usize, usize)>> {
    let sol = poisson_solve(inst, &Policy::deterministic(actions, inst.n_actions()))?;
    let q = q_values(inst, &sol.bias);
    Ok((0..inst.n_states()).filter(|&i| allowed(i)).find_map(|i| {
        improving_action(q.row(i).iter().copied(), q[(i, actions[i])], tol).map(|v| (i, v))
    }))
}

/// Policy iteration with single-state updates chosen from the bias.
pub fn policy_iterate_standard(inst: &MdpInstance, start: &[usize], tol: &Tolerances) -> Result<PolicyIterationTrace> {
    let mut tracer = Tracer::new(inst, Variant::Standard, start)?;
    while let Some((i, v)) = bias_improvement(inst, &tracer.current, tol, |_| true)? {
        tracer.step(i, v, StepRule::Bias)?;
    }
    tracer.finish(tol)
}

/// Lowest candidate state where `(r(i, v) - beta) / rho(i, v)` beats the
/// current action, with the lowest maximizing action.
fn ratio_improvement(
    inst: &MdpInstance,
    rho: &DMatrix<f64>,
    beta: f64,
    actions: &[usize],
    tol: &Tolerances,
    candidates: impl Iterator<Item = usize>,
) -> Option<(usize, usize)> {
    let ratio = |i: usize, v: usize| (inst.reward(i, v) - beta) / rho[(i, v)];
    candidates
        .into_iter()
        .find_map(|i| improving_action((0..inst.n_actions()).map(move |v| ratio(i, v)), ratio(i, actions[i]), tol).map(|v| (i, v)))
}

fn check_rho(inst: &MdpInstance, rho: &DMatrix<f64>) -> Result<()> {
    if rho.shape() != (inst.n_states(), inst.n_actions()) {
        return Err(RmdpError::DimensionMismatch("move probabilities do not match instance".into()));
    }
    Ok(())
}

/// Gain of a deterministic policy on a biconnected instance from the
/// reference stationary vector alone: `pi_i` is proportional to
/// `pi0_i / rho(i, mu(i))`.
pub fn biconnected_gain(inst: &MdpInstance, factors: &BiconnectedFactors, actions: &[usize]) -> Result<f64> {
    check_rho(inst, &factors.rho)?;
    check_actions(inst, actions)?;
    let weights: Vec<f64> = (0..inst.n_states())
        .map(|i| factors.pi0[i] / factors.rho[(i, actions[i])])
        .collect();
    let total: f64 = weights.iter().sum();
    Ok((0..inst.n_states())
        .map(|i| weights[i] * inst.reward(i, actions[i]))
        .sum::<f64>()
        / total)
}

/// One gain-only improvement step on a biconnected instance, or `None` when
/// the policy is optimal.
pub fn improve_biconnected(
    inst: &MdpInstance,
    factors: &BiconnectedFactors,
    actions: &[usize],
    tol: &Tolerances,
) -> Result<Option<Vec<usize>>> {
    let beta = biconnected_gain(inst, factors, actions)?;
    Ok(
        ratio_improvement(inst, &factors.rho, beta, actions, tol, 0..inst.n_states()).map(|(i, v)| {
            let mut next = actions.to_vec();
            next[i] = v;
            next
        }),
    )
}

pub fn policy_iterate_biconnected(
    inst: &MdpInstance,
    factors: &BiconnectedFactors,
    start: &[usize],
    tol: &Tolerances,
) -> Result<PolicyIterationTrace> {
    let mut tracer = Tracer::new(inst, Variant::Biconnected, start)?;
    while let Some(next) = improve_biconnected(inst, factors, &tracer.current, tol)? {
        let i = (0..next.len()).find(|&i| next[i] != tracer.current[i]).expect("one state changes");
        tracer.step(i, next[i], StepRule::Ratio)?;
    }
    tracer.finish(tol)
}

fn glued_gain(inst: &MdpInstance, f: &Factorization, actions: &[usize]) -> Result<f64> {
    let gamma = factorize::glue_stationary(f, &Policy::deterministic(actions, inst.n_actions()))?;
    Ok((0..inst.n_states()).map(|i| gamma[i] * inst.reward(i, actions[i])).sum())
}

/// The gain-only improvement rule restricted to states that are not
/// articulation points.
pub fn improve_nonarticulation(
    inst: &MdpInstance,
    f: &Factorization,
    actions: &[usize],
    tol: &Tolerances,
) -> Result<Option<Vec<usize>>> {
    check_rho(inst, &f.rho)?;
    check_actions(inst, actions)?;
    let beta = glued_gain(inst, f, actions)?;
    let candidates = (0..inst.n_states()).filter(|&i| !f.structure.is_articulation(i));
    Ok(ratio_improvement(inst, &f.rho, beta, actions, tol, candidates).map(|(i, v)| {
        let mut next = actions.to_vec();
        next[i] = v;
        next
    }))
}

/// Gain-only steps until none applies, then one bias step (articulation
/// points first), repeated until the bias test finds nothing.
pub fn policy_iterate_hybrid(
    inst: &MdpInstance,
    f: &Factorization,
    start: &[usize],
    tol: &Tolerances,
) -> Result<PolicyIterationTrace> {
    let mut tracer = Tracer::new(inst, Variant::Hybrid, start)?;
    loop {
        while let Some(next) = improve_nonarticulation(inst, f, &tracer.current, tol)? {
            let i = (0..next.len()).find(|&i| next[i] != tracer.current[i]).expect("one state changes");
            tracer.step(i, next[i], StepRule::Ratio)?;
        }
        let step = match bias_improvement(inst, &tracer.current, tol, |i| f.structure.is_articulation(i))? {
            Some(step) => Some(step),
            None => bias_improvement(inst, &tracer.current, tol, |_| true)?,
        };
        match step {
            Some((i, v)) => tracer.step(i, v, StepRule::Bias)?,
            None => break,
        }
    }
    tracer.finish(tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteForceOptimum {
    pub policy: Vec<usize>,
    pub gain: f64,
    pub policies_checked: u64,
}

/// Best deterministic policy by exhaustive evaluation; among gains within
/// `tol.tie` of the best, the lexicographically first policy wins.
pub fn brute_force_optimal(inst: &MdpInstance, cap: u64, tol: &Tolerances) -> Result<BruteForceOptimum> {
    let count = inst.deterministic_policy_count();
    if count > cap as u128 {
        return Err(RmdpError::ExplosionGuard { count, cap });
    }
    let count = count as u64;
    let (n, m) = (inst.n_states(), inst.n_actions());
    let gains: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|idx| poisson::gain(inst, &DeterministicPolicies::decode(idx, n, m)))
        .collect::<Result<_>>()?;
    let best = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let idx = gains.iter().position(|&g| g >= best - tol.tie).expect("non-empty enumeration");
    Ok(BruteForceOptimum {
        policy: DeterministicPolicies::decode(idx as u64, n, m),
        gain: gains[idx],
        policies_checked: count,
    })
}
