//! Published reference values used by the reproduction commands and the
//! acceptance tests.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCurve {
    pub eps: f64,
    /// (incoming, outgoing) pairs.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCurves {
    pub l: usize,
    pub r: usize,
    pub t: usize,
    pub curves: Vec<TransferCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningExample {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// (eps, q) pairs.
    pub q_at: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub row: usize,
    pub t: usize,
    pub d_c: Vec<usize>,
    pub j: Option<usize>,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps_g: f64,
    /// `None` stands for an infinite q.
    pub q: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTable {
    pub l: usize,
    pub r: usize,
    /// Number of coupled sub-blocks for the global threshold.
    pub m: usize,
    /// Channel parameter at which q is listed.
    pub eps0: f64,
    pub rows: Vec<DesignRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    /// "alpha_0.9", "iid" or "alpha_0.1".
    pub channel: String,
    /// "one_sided" or "two_sided".
    pub mode: String,
    /// (d, probability) pairs.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessFigure {
    pub states: Vec<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    pub q: usize,
    pub curves: Vec<SuccessCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCurve {
    pub label: String,
    /// Rows of the l4r6 table the curve belongs to.
    pub rows: Vec<usize>,
    /// Bad-state variants ("e1", "e2") sharing this curve.
    pub channels: Vec<String>,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignComparison {
    pub alpha: f64,
    pub eps_good: f64,
    /// Bad-state erasure rate of the "e1" and "e2" channels.
    pub eps_bad: [f64; 2],
    pub mode: String,
    pub curves: Vec<DesignCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub transfer_curves: TransferCurves,
    pub running_example: RunningExample,
    pub l4r6: DesignTable,
    pub l4r16: DesignTable,
    pub two_state: SuccessFigure,
    pub four_state: SuccessFigure,
    pub design_comparison: DesignComparison,
}

pub fn reference() -> &'static Reference {
    static DATA: OnceLock<Reference> = OnceLock::new();
    DATA.get_or_init(|| {
        serde_json::from_str(include_str!("../data/reference.json"))
            .expect("embedded reference data is valid")
    })
}
