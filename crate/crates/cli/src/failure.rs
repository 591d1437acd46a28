use std::path::Path;

use rmdp_core::RmdpError;
use serde::Serialize;

/// The object written to stderr on any non-zero exit.
#[derive(Debug, Serialize)]
pub struct Failure {
    pub kind: String,
    pub detail: String,
    pub location: Option<String>,
    #[serde(skip)]
    pub code: u8,
}

impl Failure {
    pub fn io(path: &Path, err: std::io::Error, code: u8) -> Self {
        Self {
            kind: "IoFailure".into(),
            detail: err.to_string(),
            location: Some(path.display().to_string()),
            code,
        }
    }

    pub fn at(mut self, location: impl Into<String>) -> Self {
        self.location = Some(location.into());
        self
    }
}

impl From<RmdpError> for Failure {
    fn from(e: RmdpError) -> Self {
        Self {
            kind: e.kind().into(),
            detail: e.to_string(),
            location: None,
            code: if e.is_input_error() { 2 } else { 1 },
        }
    }
}

/// Attaches a location inside `file` derived from the indices an error
/// carries. `states` and `actions` label the instance.
pub fn locate(e: RmdpError, file: &Path, states: &[String], actions: &[String]) -> Failure {
    let label = |labels: &[String], i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
    let pointer = match &e {
        RmdpError::RowNotStochastic { action, state, .. } | RmdpError::AbsorbingState { action, state } => {
            Some(format!("/kernels/{}/{state}", label(actions, *action)))
        }
        RmdpError::NegativeEntry { action, state, target, .. } => {
            Some(format!("/kernels/{}/{state}/{target}", label(actions, *action)))
        }
        RmdpError::InvalidPolicy { state, .. } => Some(format!("/weights/{state}")),
        RmdpError::NonFinite { location, .. } => Some(location.clone()),
        RmdpError::NotReversible { i, j, .. } => {
            Some(format!("states {} and {}", label(states, *i), label(states, *j)))
        }
        RmdpError::AsymmetricSupport { from, to } => {
            Some(format!("states {} and {}", label(states, *from), label(states, *to)))
        }
        _ => None,
    };
    let file = file.display();
    let location = match pointer {
        Some(p) if p.starts_with('/') => format!("{file}#{p}"),
        Some(p) => format!("{file}: {p}"),
        None => file.to_string(),
    };
    Failure::from(e).at(location)
}
