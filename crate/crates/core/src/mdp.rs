//! Finite MDP data model, stationary analysis and the reversibility test.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, Tolerances};
use crate::error::{Result, RmdpError};
use crate::linalg;

/// Unvalidated instance contents, kernels ordered like `actions`.
#[derive(Debug, Clone)]
pub struct RawInstance {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub kernels: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

/// A validated finite-state, finite-action MDP.
///
/// Every kernel is row-stochastic, no row is absorbing, and there are at
/// least two states and two actions.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpInstance {
    states: Vec<String>,
    actions: Vec<String>,
    kernels: Vec<DMatrix<f64>>,
    rewards: DMatrix<f64>,
}

impl MdpInstance {
    pub fn new(
        states: Vec<String>,
        actions: Vec<String>,
        kernels: Vec<DMatrix<f64>>,
        rewards: DMatrix<f64>,
    ) -> Result<Self> {
        let n = states.len();
        let m = actions.len();
        if n < 2 {
            return Err(RmdpError::TooFewStates(n));
        }
        if m < 2 {
            return Err(RmdpError::TooFewActions(m));
        }
        if kernels.len() != m {
            return Err(RmdpError::DimensionMismatch(format!(
                "{} kernels for {m} actions",
                kernels.len()
            )));
        }
        if rewards.shape() != (n, m) {
            return Err(RmdpError::DimensionMismatch(format!(
                "rewards are {:?}, expected ({n}, {m})",
                rewards.shape()
            )));
        }
        for (a, k) in kernels.iter().enumerate() {
            if k.shape() != (n, n) {
                return Err(RmdpError::DimensionMismatch(format!(
                    "kernel {a} is {:?}, expected ({n}, {n})",
                    k.shape()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    let v = k[(i, j)];
                    if !v.is_finite() {
                        return Err(RmdpError::NonFinite {
                            location: format!("kernel {a} entry ({i}, {j})"),
                            value: v,
                        });
                    }
                    if v < 0.0 {
                        return Err(RmdpError::NegativeEntry {
                            action: a,
                            state: i,
                            target: j,
                            value: v,
                        });
                    }
                }
                let sum: f64 = k.row(i).iter().sum();
                if (sum - 1.0).abs() > config::STOCHASTIC_TOL {
                    return Err(RmdpError::RowNotStochastic {
                        action: a,
                        state: i,
                        sum,
                    });
                }
                if 1.0 - k[(i, i)] <= config::SUPPORT_THRESHOLD {
                    return Err(RmdpError::AbsorbingState { action: a, state: i });
                }
            }
        }
        if let Some(v) = rewards.iter().find(|v| !v.is_finite()) {
            return Err(RmdpError::NonFinite {
                location: "rewards".into(),
                value: *v,
            });
        }
        let mut unique = states.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != n {
            return Err(RmdpError::DimensionMismatch("duplicate state label".into()));
        }
        let mut unique = actions.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != m {
            return Err(RmdpError::DimensionMismatch("duplicate action label".into()));
        }
        Ok(Self {
            states,
            actions,
            kernels,
            rewards,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn kernels(&self) -> &[DMatrix<f64>] {
        &self.kernels
    }

    pub fn kernel(&self, action: usize) -> &DMatrix<f64> {
        &self.kernels[action]
    }

    /// `p_ij(u)`.
    pub fn p(&self, i: usize, j: usize, u: usize) -> f64 {
        self.kernels[u][(i, j)]
    }

    /// `n x m` reward table `r(i, u)`.
    pub fn rewards(&self) -> &DMatrix<f64> {
        &self.rewards
    }

    pub fn reward(&self, i: usize, u: usize) -> f64 {
        self.rewards[(i, u)]
    }

    pub fn with_rewards(&self, rewards: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.actions.clone(),
            self.kernels.clone(),
            rewards,
        )
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| RmdpError::UnknownLabel(label.to_string()))
    }

    pub fn action_index(&self, label: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| RmdpError::UnknownLabel(label.to_string()))
    }

    /// Number of deterministic policies, `m^n`, saturating at `u128::MAX`.
    pub fn deterministic_policy_count(&self) -> u128 {
        (self.n_actions() as u128)
            .checked_pow(self.n_states() as u32)
            .unwrap_or(u128::MAX)
    }
}

/// Checks every instance invariant and builds the validated instance.
pub fn validate_instance(raw: &RawInstance) -> Result<MdpInstance> {
    let n = raw.states.len();
    if n < 2 {
        return Err(RmdpError::TooFewStates(n));
    }
    if raw.actions.len() < 2 {
        return Err(RmdpError::TooFewActions(raw.actions.len()));
    }
    if raw.rewards.len() != n {
        return Err(RmdpError::DimensionMismatch(format!(
            "rewards have {} rows, expected {n}",
            raw.rewards.len()
        )));
    }
    let kernels = raw
        .kernels
        .iter()
        .map(|k| {
            if k.len() != n {
                return Err(RmdpError::DimensionMismatch(format!(
                    "kernel has {} rows, expected {n}",
                    k.len()
                )));
            }
            linalg::from_rows(k, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let rewards = linalg::from_rows(&raw.rewards, raw.actions.len())?;
    MdpInstance::new(raw.states.clone(), raw.actions.clone(), kernels, rewards)
}

/// A stationary randomized Markov strategy, row `i` holding `mu(.|i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    weights: DMatrix<f64>,
}

impl Policy {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        for i in 0..weights.nrows() {
            let row = weights.row(i);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|w| !w.is_finite() || *w < 0.0)
                || (sum - 1.0).abs() > config::STOCHASTIC_TOL
            {
                return Err(RmdpError::InvalidPolicy { state: i, sum });
            }
        }
        Ok(Self { weights })
    }

    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let mut weights = DMatrix::zeros(actions.len(), n_actions);
        for (i, &u) in actions.iter().enumerate() {
            weights[(i, u)] = 1.0;
        }
        Self { weights }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            weights: DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64),
        }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// `mu(u|i)`.
    pub fn weight(&self, i: usize, u: usize) -> f64 {
        self.weights[(i, u)]
    }

    pub fn n_states(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_deterministic(&self) -> bool {
        self.weights.iter().all(|w| *w == 0.0 || *w == 1.0)
    }

    /// The chosen action per state, if the policy is deterministic.
    pub fn as_actions(&self) -> Option<Vec<usize>> {
        if !self.is_deterministic() {
            return None;
        }
        (0..self.n_states())
            .map(|i| self.weights.row(i).iter().position(|w| *w == 1.0))
            .collect()
    }

    fn check_dims(&self, inst: &MdpInstance) -> Result<()> {
        if self.weights.shape() != (inst.n_states(), inst.n_actions()) {
            return Err(RmdpError::DimensionMismatch(format!(
                "policy is {:?}, instance is ({}, {})",
                self.weights.shape(),
                inst.n_states(),
                inst.n_actions()
            )));
        }
        Ok(())
    }
}

/// `P(mu)` with entries `sum_u p_ij(u) mu(u|i)`.
pub fn controlled_kernel(inst: &MdpInstance, pol: &Policy) -> Result<DMatrix<f64>> {
    pol.check_dims(inst)?;
    let n = inst.n_states();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for u in 0..inst.n_actions() {
            let w = pol.weight(i, u);
            if w == 0.0 {
                continue;
            }
            for j in 0..n {
                p[(i, j)] += w * inst.p(i, j, u);
            }
        }
    }
    Ok(p)
}

/// `P(mu)` for a deterministic policy given as one action index per state.
pub fn deterministic_kernel(inst: &MdpInstance, actions: &[usize]) -> DMatrix<f64> {
    let n = inst.n_states();
    DMatrix::from_fn(n, n, |i, j| inst.p(i, j, actions[i]))
}

/// Reward vector `r(i, mu)` of a policy.
pub fn policy_rewards(inst: &MdpInstance, pol: &Policy) -> Result<DVector<f64>> {
    pol.check_dims(inst)?;
    Ok(DVector::from_fn(inst.n_states(), |i, _| {
        (0..inst.n_actions())
            .map(|u| inst.reward(i, u) * pol.weight(i, u))
            .sum()
    }))
}

fn reachable(p: &DMatrix<f64>, transpose: bool) -> usize {
    let n = p.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            let w = if transpose { p[(j, i)] } else { p[(i, j)] };
            if !seen[j] && w > config::SUPPORT_THRESHOLD {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count
}

/// True iff the directed support graph of `p` is strongly connected.
pub fn check_irreducible(p: &DMatrix<f64>) -> bool {
    let n = p.nrows();
    n > 0 && reachable(p, false) == n && reachable(p, true) == n
}

/// The unique stationary vector of an irreducible stochastic matrix.
///
/// Solved directly: one equation of `pi^T (P - I) = 0` is replaced by the
/// normalization, so periodic chains need no special handling.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !check_irreducible(p) {
        return Err(RmdpError::NotIrreducible);
    }
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = linalg::solve_vec(&a, &b)?;
    if pi.iter().any(|v| *v <= 0.0) {
        return Err(RmdpError::SingularSolve(
            "stationary vector has non-positive entries".into(),
        ));
    }
    let total = pi.sum();
    Ok(pi / total)
}

/// Occupation measure `pi_i p_ij`.
pub fn occupation_measure(p: &DMatrix<f64>, pi: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| pi[i] * p[(i, j)])
}

/// Largest detailed-balance violation `|pi_i p_ij - pi_j p_ji|` and where.
pub fn balance_gap(p: &DMatrix<f64>, pi: &DVector<f64>) -> (usize, usize, f64) {
    let n = p.nrows();
    let mut worst = (0, 0, 0.0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs();
            if gap > worst.2 {
                worst = (i, j, gap);
            }
        }
    }
    worst
}

pub fn check_reversible(p: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let pi = stationary_distribution(p)?;
    Ok(balance_gap(p, &pi).2 <= tol)
}

/// Stationary analysis of one transition matrix.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub transition: DMatrix<f64>,
    /// `None` when the chain is reducible.
    pub stationary: Option<DVector<f64>>,
    pub occupation: Option<DMatrix<f64>>,
    pub irreducible: bool,
    pub reversible: bool,
}

impl ChainAnalysis {
    pub fn new(transition: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !check_irreducible(&transition) {
            return Ok(Self {
                transition,
                stationary: None,
                occupation: None,
                irreducible: false,
                reversible: false,
            });
        }
        let pi = stationary_distribution(&transition)?;
        let occupation = occupation_measure(&transition, &pi);
        let reversible = linalg::asymmetry(&occupation) <= tol;
        Ok(Self {
            transition,
            stationary: Some(pi),
            occupation: Some(occupation),
            irreducible: true,
            reversible,
        })
    }

    pub fn of_policy(inst: &MdpInstance, pol: &Policy, tol: f64) -> Result<Self> {
        Self::new(controlled_kernel(inst, pol)?, tol)
    }
}

/// Odometer over deterministic policies, state 0 most significant, in
/// lexicographic order of action indices.
#[derive(Debug, Clone)]
pub struct DeterministicPolicies {
    n_actions: usize,
    next: Option<Vec<usize>>,
}

impl DeterministicPolicies {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            next: (n_actions > 0).then(|| vec![0; n_states]),
        }
    }

    /// The policy at position `index` of the enumeration.
    pub fn decode(index: u64, n_states: usize, n_actions: usize) -> Vec<usize> {
        let mut actions = vec![0; n_states];
        let mut rest = index;
        for slot in actions.iter_mut().rev() {
            *slot = (rest % n_actions as u64) as usize;
            rest /= n_actions as u64;
        }
        actions
    }
}

impl Iterator for DeterministicPolicies {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut pos = succ.len();
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            succ[pos] += 1;
            if succ[pos] < self.n_actions {
                self.next = Some(succ);
                break;
            }
            succ[pos] = 0;
        }
        Some(current)
    }
}

fn guarded_count(inst: &MdpInstance, cap: u64) -> Result<u64> {
    let count = inst.deterministic_policy_count();
    if count > cap as u128 {
        return Err(RmdpError::ExplosionGuard { count, cap });
    }
    Ok(count as u64)
}

/// All `m^n` deterministic policies, each exactly once.
pub fn enumerate_deterministic_policies(
    inst: &MdpInstance,
    cap: u64,
) -> Result<impl Iterator<Item = Policy> + '_> {
    guarded_count(inst, cap)?;
    let m = inst.n_actions();
    Ok(DeterministicPolicies::new(inst.n_states(), m).map(move |a| Policy::deterministic(&a, m)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    NotIrreducible,
    NotReversible { i: usize, j: usize, gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub policy: Vec<usize>,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmdpVerdict {
    pub rmdp: bool,
    pub policies_checked: u64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Copy)]
pub struct RmdpCheckOptions {
    pub tolerances: Tolerances,
    pub cap: u64,
}

impl Default for RmdpCheckOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            cap: config::ENUMERATION_CAP,
        }
    }
}

fn deterministic_violation(inst: &MdpInstance, actions: &[usize], tol: f64) -> Option<Violation> {
    let p = deterministic_kernel(inst, actions);
    match stationary_distribution(&p) {
        Ok(pi) => {
            let (i, j, gap) = balance_gap(&p, &pi);
            (gap > tol).then_some(Violation::NotReversible { i, j, gap })
        }
        Err(_) => Some(Violation::NotIrreducible),
    }
}

/// Decides whether every stationary policy yields an irreducible reversible
/// chain by checking all deterministic policies. On failure the witness is
/// the first violating policy in enumeration order.
pub fn is_rmdp(inst: &MdpInstance, opts: &RmdpCheckOptions) -> Result<RmdpVerdict> {
    let count = guarded_count(inst, opts.cap)?;
    let (n, m) = (inst.n_states(), inst.n_actions());
    let tol = opts.tolerances.balance;
    let found = (0..count).into_par_iter().find_map_first(|idx| {
        let actions = DeterministicPolicies::decode(idx, n, m);
        deterministic_violation(inst, &actions, tol).map(|violation| (idx, actions, violation))
    });
    Ok(match found {
        None => RmdpVerdict {
            rmdp: true,
            policies_checked: count,
            witness: None,
        },
        Some((idx, policy, violation)) => RmdpVerdict {
            rmdp: false,
            policies_checked: idx + 1,
            witness: Some(Witness { policy, violation }),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use std::collections::HashSet;

    fn two_by_two() -> RawInstance {
        RawInstance {
            states: vec!["a".into(), "b".into()],
            actions: vec!["x".into(), "y".into()],
            kernels: vec![
                vec![vec![0.5, 0.5], vec![0.2, 0.8]],
                vec![vec![0.1, 0.9], vec![0.6, 0.4]],
            ],
            rewards: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    #[test]
    fn accepts_valid_instance() {
        let inst = validate_instance(&two_by_two()).unwrap();
        assert_eq!(inst.n_states(), 2);
        assert_eq!(inst.n_actions(), 2);
    }

    #[test]
    fn rejects_short_row() {
        let mut raw = two_by_two();
        raw.kernels[1][0] = vec![0.3, 0.6];
        match validate_instance(&raw) {
            Err(RmdpError::RowNotStochastic { action, state, sum }) => {
                assert_eq!((action, state), (1, 0));
                assert!((sum - 0.9).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_single_state_and_action() {
        let raw = RawInstance {
            states: vec!["a".into()],
            actions: vec!["x".into(), "y".into()],
            kernels: vec![vec![vec![1.0]], vec![vec![1.0]]],
            rewards: vec![vec![0.0, 0.0]],
        };
        assert_eq!(validate_instance(&raw), Err(RmdpError::TooFewStates(1)));
        let mut raw = two_by_two();
        raw.actions.truncate(1);
        raw.kernels.truncate(1);
        assert_eq!(validate_instance(&raw), Err(RmdpError::TooFewActions(1)));
    }

    #[test]
    fn rejects_negative_and_absorbing() {
        let mut raw = two_by_two();
        raw.kernels[0][0] = vec![1.1, -0.1];
        assert!(matches!(
            validate_instance(&raw),
            Err(RmdpError::NegativeEntry { .. })
        ));
        let mut raw = two_by_two();
        raw.kernels[0][1] = vec![0.0, 1.0];
        assert_eq!(
            validate_instance(&raw),
            Err(RmdpError::AbsorbingState { action: 0, state: 1 })
        );
    }

    #[test]
    fn deterministic_policy_kernel_is_action_kernel() {
        let inst = fixtures::two_leaf_star(0.3, 0.7);
        for u in 0..2 {
            let p = controlled_kernel(&inst, &Policy::deterministic(&[u, u, u], 2)).unwrap();
            assert_eq!(&p, inst.kernel(u));
        }
    }

    #[test]
    fn mixed_policy_on_two_leaf_star() {
        let (a, b, lambda) = (0.3, 0.7, 0.25);
        let inst = fixtures::two_leaf_star(a, b);
        let w = DMatrix::from_row_slice(3, 2, &[lambda, 1.0 - lambda, 0.5, 0.5, 1.0, 0.0]);
        let p = controlled_kernel(&inst, &Policy::new(w).unwrap()).unwrap();
        let expected = [
            0.0,
            lambda * a + (1.0 - lambda) * b,
            lambda * (1.0 - a) + (1.0 - lambda) * (1.0 - b),
        ];
        for j in 0..3 {
            assert!((p[(0, j)] - expected[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_mix_of_identical_kernels() {
        let k = vec![vec![0.2, 0.8], vec![0.5, 0.5]];
        let raw = RawInstance {
            states: vec!["a".into(), "b".into()],
            actions: vec!["x".into(), "y".into()],
            kernels: vec![k.clone(), k],
            rewards: vec![vec![0.0; 2]; 2],
        };
        let inst = validate_instance(&raw).unwrap();
        let p = controlled_kernel(&inst, &Policy::uniform(2, 2)).unwrap();
        assert!((p - inst.kernel(0)).abs().max() < 1e-15);
    }

    #[test]
    fn flip_flop_stationary_and_irreducibility() {
        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let pi = stationary_distribution(&flip).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);
        assert!(check_irreducible(&flip));
        let id = DMatrix::<f64>::identity(2, 2);
        assert!(!check_irreducible(&id));
        assert_eq!(stationary_distribution(&id), Err(RmdpError::NotIrreducible));
    }

    #[test]
    fn two_leaf_star_stationary() {
        let inst = fixtures::two_leaf_star(0.3, 0.7);
        let pi = stationary_distribution(inst.kernel(0)).unwrap();
        for (got, want) in pi.iter().zip([0.5, 0.15, 0.35]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!(check_irreducible(inst.kernel(0)) && check_irreducible(inst.kernel(1)));
    }

    #[test]
    fn reversibility_examples() {
        let sym = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.5, 0.1, 0.4, 0.3, 0.4, 0.3]);
        assert!(check_reversible(&sym, 1e-9).unwrap());
        let cycle = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(!check_reversible(&cycle, 1e-9).unwrap());
        let analysis = ChainAnalysis::new(cycle, 1e-9).unwrap();
        assert!(analysis.irreducible && !analysis.reversible);
    }

    #[test]
    fn is_rmdp_on_two_leaf_star() {
        let v = is_rmdp(&fixtures::two_leaf_star(0.3, 0.7), &RmdpCheckOptions::default()).unwrap();
        assert!(v.rmdp);
        assert_eq!(v.policies_checked, 8);
        assert!(v.witness.is_none());
    }

    #[test]
    fn is_rmdp_finds_directed_cycle_witness() {
        let raw = RawInstance {
            states: vec!["1".into(), "2".into(), "3".into()],
            actions: vec!["a".into(), "b".into()],
            kernels: vec![
                vec![
                    vec![0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                    vec![1.0, 0.0, 0.0],
                ],
                vec![
                    vec![0.0, 0.5, 0.5],
                    vec![0.5, 0.0, 0.5],
                    vec![0.5, 0.5, 0.0],
                ],
            ],
            rewards: vec![vec![0.0; 2]; 3],
        };
        let inst = validate_instance(&raw).unwrap();
        let v = is_rmdp(&inst, &RmdpCheckOptions::default()).unwrap();
        assert!(!v.rmdp);
        let w = v.witness.unwrap();
        assert_eq!(w.policy, vec![0, 0, 0]);
        assert!(matches!(w.violation, Violation::NotReversible { .. }));
    }

    #[test]
    fn explosion_guard() {
        let inst = fixtures::two_leaf_star(0.3, 0.7);
        let opts = RmdpCheckOptions {
            cap: 7,
            ..Default::default()
        };
        assert_eq!(
            is_rmdp(&inst, &opts),
            Err(RmdpError::ExplosionGuard { count: 8, cap: 7 })
        );
        assert!(enumerate_deterministic_policies(&inst, 7).is_err());
    }

    #[test]
    fn policy_enumeration_counts() {
        for (n, m, expected) in [(2usize, 2usize, 4usize), (3, 2, 8), (4, 3, 81)] {
            let all: Vec<Vec<usize>> = DeterministicPolicies::new(n, m).collect();
            assert_eq!(all.len(), expected);
            let set: HashSet<_> = all.iter().cloned().collect();
            assert_eq!(set.len(), expected);
            let mut sorted = all.clone();
            sorted.sort();
            assert_eq!(sorted, all, "lexicographic order");
            for (idx, a) in all.iter().enumerate() {
                assert_eq!(&DeterministicPolicies::decode(idx as u64, n, m), a);
            }
        }
    }

    #[test]
    fn deterministic_roundtrip() {
        let p = Policy::deterministic(&[1, 0, 1], 2);
        assert!(p.is_deterministic());
        assert_eq!(p.as_actions(), Some(vec![1, 0, 1]));
        assert_eq!(Policy::uniform(3, 2).as_actions(), None);
    }
}
