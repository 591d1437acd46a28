//! Output shapes. States and actions appear by label; field order is fixed
//! by declaration order.

use serde::Serialize;

#[derive(Serialize)]
pub struct ValidateReport {
    pub rmdp: bool,
    pub policies_checked: u64,
}

#[derive(Serialize)]
pub struct DecomposeReport {
    pub edges: Vec<[String; 2]>,
    pub blocks: Vec<Vec<String>>,
    pub articulation_points: Vec<String>,
    pub biconnected: bool,
    pub tree: bool,
}

#[derive(Serialize)]
pub struct BlockReport {
    pub states: Vec<String>,
    pub kernel: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
}

#[derive(Serialize)]
pub struct SplitReport {
    pub state: String,
    /// Indices into `blocks`.
    pub blocks: Vec<usize>,
    /// One row per action, one column per entry of `blocks`.
    pub weights: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct FactorizeReport {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub blocks: Vec<BlockReport>,
    pub articulation_points: Vec<String>,
    pub rho: Vec<Vec<f64>>,
    pub nu: Vec<SplitReport>,
}

#[derive(Serialize)]
pub struct SolveReport {
    pub variant: &'static str,
    pub states: Vec<String>,
    pub policy: Vec<String>,
    pub gain: f64,
    pub bias: Vec<f64>,
    pub stationary: Vec<f64>,
    pub optimal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policies_checked: Option<u64>,
}

#[derive(Serialize)]
pub struct StepReport {
    pub state: String,
    pub from: String,
    pub to: String,
    pub rule: &'static str,
    pub gain_before: f64,
    pub gain_after: f64,
}

#[derive(Serialize)]
pub struct TraceReport {
    pub variant: &'static str,
    pub start: Vec<String>,
    pub steps: Vec<StepReport>,
    pub terminal: Vec<String>,
    pub gain: f64,
}

#[derive(Serialize)]
pub struct GreenReport {
    pub pin: String,
    /// Full `n x n` matrix with a zero row and column at the pin.
    pub matrix: Vec<Vec<f64>>,
    pub cross_check_gap: f64,
}

#[derive(Serialize)]
pub struct GffReport {
    pub states: Vec<String>,
    pub stationary: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub asymmetry: f64,
    pub min_eigenvalue: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenReport>,
}
