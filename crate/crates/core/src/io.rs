//! JSON interchange formats.
//!
//! Instance file:
//!
//! ```json
//! {
//!   "states": ["1", "2"],
//!   "actions": ["a", "b"],
//!   "kernels": {"a": [[0.5, 0.5], [0.2, 0.8]], "b": [[0.1, 0.9], [0.6, 0.4]]},
//!   "rewards": [[1.0, 0.0], [0.0, 1.0]]
//! }
//! ```
//!
//! `rewards` has one row per state and one column per action. A policy file
//! holds either `{"weights": [[...], ...]}` (one row per state) or
//! `{"deterministic": ["a", "b"]}` (one action label per state).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmdpError};
use crate::linalg;
use crate::mdp::{validate_instance, MdpInstance, Policy, RawInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub kernels: BTreeMap<String, Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PolicyFile {
    Weights(Vec<Vec<f64>>),
    Deterministic(Vec<String>),
}

fn malformed(e: serde_json::Error) -> RmdpError {
    RmdpError::Malformed(e.to_string())
}

impl InstanceFile {
    pub fn from_instance(inst: &MdpInstance) -> Self {
        Self {
            states: inst.states().to_vec(),
            actions: inst.actions().to_vec(),
            kernels: inst
                .actions()
                .iter()
                .zip(inst.kernels())
                .map(|(a, k)| (a.clone(), linalg::to_rows(k)))
                .collect(),
            rewards: linalg::to_rows(inst.rewards()),
        }
    }

    pub fn into_instance(mut self) -> Result<MdpInstance> {
        let kernels = self
            .actions
            .iter()
            .map(|a| {
                self.kernels
                    .remove(a)
                    .ok_or_else(|| RmdpError::DimensionMismatch(format!("no kernel for action {a:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = self.kernels.keys().next() {
            return Err(RmdpError::UnknownLabel(extra.clone()));
        }
        validate_instance(&RawInstance {
            states: self.states,
            actions: self.actions,
            kernels,
            rewards: self.rewards,
        })
    }
}

pub fn parse_instance(text: &str) -> Result<MdpInstance> {
    serde_json::from_str::<InstanceFile>(text)
        .map_err(malformed)?
        .into_instance()
}

pub fn instance_to_json(inst: &MdpInstance) -> String {
    to_json(&InstanceFile::from_instance(inst))
}

impl PolicyFile {
    pub fn into_policy(self, inst: &MdpInstance) -> Result<Policy> {
        let n = inst.n_states();
        match self {
            PolicyFile::Weights(rows) => {
                if rows.len() != n {
                    return Err(RmdpError::DimensionMismatch(format!(
                        "policy has {} rows, instance has {n} states",
                        rows.len()
                    )));
                }
                Policy::new(linalg::from_rows(&rows, inst.n_actions())?)
            }
            PolicyFile::Deterministic(labels) => {
                if labels.len() != n {
                    return Err(RmdpError::DimensionMismatch(format!(
                        "policy has {} entries, instance has {n} states",
                        labels.len()
                    )));
                }
                let actions = labels
                    .iter()
                    .map(|l| inst.action_index(l))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Policy::deterministic(&actions, inst.n_actions()))
            }
        }
    }

    /// Deterministic policies are written as labels, others as weights.
    pub fn from_policy(pol: &Policy, inst: &MdpInstance) -> Self {
        match pol.as_actions() {
            Some(actions) => PolicyFile::Deterministic(actions.iter().map(|&a| inst.actions()[a].clone()).collect()),
            None => PolicyFile::Weights(linalg::to_rows(pol.weights())),
        }
    }
}

pub fn parse_policy(text: &str, inst: &MdpInstance) -> Result<Policy> {
    serde_json::from_str::<PolicyFile>(text)
        .map_err(malformed)?
        .into_policy(inst)
}

/// Pretty JSON with a trailing newline. Floats use the shortest decimal
/// form that parses back to the same value.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn instance_roundtrip() {
        let inst = fixtures::two_leaf_star(0.3, 0.7);
        let text = instance_to_json(&inst);
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }

    #[test]
    fn kernels_are_matched_by_label() {
        let text = r#"{"states": ["x", "y"], "actions": ["b", "a"],
            "kernels": {"a": [[0.5, 0.5], [0.5, 0.5]], "b": [[0.1, 0.9], [0.9, 0.1]]},
            "rewards": [[0, 1], [2, 3]]}"#;
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.p(0, 1, 0), 0.9);
        assert_eq!(inst.reward(1, 0), 2.0);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_instance("{"), Err(RmdpError::Malformed(_))));
        let missing = r#"{"states": ["x", "y"], "actions": ["a", "b"],
            "kernels": {"a": [[0.5, 0.5], [0.5, 0.5]]}, "rewards": [[0, 1], [2, 3]]}"#;
        assert!(matches!(parse_instance(missing), Err(RmdpError::DimensionMismatch(_))));
        let extra = r#"{"states": ["x", "y"], "actions": ["a", "b"],
            "kernels": {"a": [[0.5, 0.5], [0.5, 0.5]], "b": [[0.5, 0.5], [0.5, 0.5]], "c": []},
            "rewards": [[0, 1], [2, 3]]}"#;
        assert!(matches!(parse_instance(extra), Err(RmdpError::UnknownLabel(_))));
        let short = r#"{"states": ["x", "y"], "actions": ["a", "b"],
            "kernels": {"a": [[0.5, 0.4], [0.5, 0.5]], "b": [[0.5, 0.5], [0.5, 0.5]]},
            "rewards": [[0, 1], [2, 3]]}"#;
        assert!(matches!(parse_instance(short), Err(RmdpError::RowNotStochastic { .. })));
    }

    #[test]
    fn policy_formats() {
        let inst = fixtures::two_leaf_star(0.3, 0.7);
        let det = parse_policy(r#"{"deterministic": ["2", "1", "1"]}"#, &inst).unwrap();
        assert_eq!(det.as_actions(), Some(vec![1, 0, 0]));
        let w = parse_policy(r#"{"weights": [[0.5, 0.5], [1, 0], [0, 1]]}"#, &inst).unwrap();
        assert!(!w.is_deterministic());
        assert!(matches!(
            parse_policy(r#"{"deterministic": ["3", "1", "1"]}"#, &inst),
            Err(RmdpError::UnknownLabel(_))
        ));
        assert!(matches!(
            parse_policy(r#"{"weights": [[0.5, 0.6], [1, 0], [0, 1]]}"#, &inst),
            Err(RmdpError::InvalidPolicy { state: 0, .. })
        ));
        let text = to_json(&PolicyFile::from_policy(&det, &inst));
        assert_eq!(parse_policy(&text, &inst).unwrap(), det);
    }

    #[test]
    fn floats_roundtrip_exactly() {
        for x in [0.5, 0.1, 1.0 / 3.0, 1e-17, 123456.789] {
            let text = to_json(&x);
            assert_eq!(text.trim().parse::<f64>().unwrap(), x);
        }
        assert_eq!(to_json(&0.5), "0.5\n");
    }
}
