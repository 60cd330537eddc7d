//! BEC density evolution on protographs, erasure transfer between sub-blocks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protograph::{Protomatrix, SubBlockProto};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub max_iters: usize,
    /// Largest per-edge message change that still counts as a fixed point.
    pub stall_tol: f64,
    /// Erasure probabilities below this are treated as zero.
    pub zero_tol: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub bisect_width: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            stall_tol: 1e-12,
            zero_tol: 1e-9,
            bisect_width: 1e-5,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zero_tol > 0.0 && self.zero_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zero_tol must lie in (0,1), got {}",
                self.zero_tol
            )));
        }
        if !(self.stall_tol > 0.0 && self.stall_tol < self.zero_tol) {
            return Err(Error::InvalidParameter(format!(
                "stall_tol must lie in (0, zero_tol), got {}",
                self.stall_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if !(self.bisect_width > 0.0 && self.bisect_width < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bisect_width must lie in (0,1), got {}",
                self.bisect_width
            )));
        }
        Ok(())
    }
}

/// Rows whose incoming check-to-variable erasure is pinned, and rows that
/// take no part in decoding.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClampSpec {
    clamped: BTreeMap<usize, f64>,
    excluded: BTreeSet<usize>,
}

impl ClampSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clamp(mut self, row: usize, value: f64) -> Self {
        self.clamped.insert(row, value);
        self
    }

    pub fn exclude(mut self, row: usize) -> Self {
        self.excluded.insert(row);
        self
    }

    pub fn clamped(&self) -> &BTreeMap<usize, f64> {
        &self.clamped
    }

    pub fn excluded(&self) -> &BTreeSet<usize> {
        &self.excluded
    }

    fn validate(&self, rows: usize) -> Result<()> {
        for (&row, &v) in &self.clamped {
            if row >= rows {
                return Err(Error::DimensionMismatch(format!(
                    "clamped row {row} out of range for {rows} rows"
                )));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "clamp value {v} on row {row} is not a probability"
                )));
            }
            if self.excluded.contains(&row) {
                return Err(Error::InvalidParameter(format!(
                    "row {row} is both clamped and excluded"
                )));
            }
        }
        if let Some(&row) = self.excluded.iter().find(|&&r| r >= rows) {
            return Err(Error::DimensionMismatch(format!(
                "excluded row {row} out of range for {rows} rows"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMessage {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeResult {
    /// Posterior erasure rate of each variable node.
    pub sigma: Vec<f64>,
    /// Variable-to-check messages on participating edges, row-major.
    pub vn_to_cn: Vec<EdgeMessage>,
    pub iterations: usize,
    pub converged: bool,
    pub decoded: bool,
}

/// Inter-sub-block erasure values, one per coupling check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransferValue(pub Vec<f64>);

impl TransferValue {
    pub fn zeros(t: usize) -> Self {
        Self(vec![0.0; t])
    }

    pub fn ones(t: usize) -> Self {
        Self(vec![1.0; t])
    }

    pub fn constant(t: usize, v: f64) -> Self {
        Self(vec![v; t])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.0.iter().all(|&v| v < tol)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Element-wise `self <= other + slack`.
    pub fn dominated_by(&self, other: &Self, slack: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Sits left of the target: receives on b_left rows, emits on b_right rows.
    LeftHelper,
    /// Sits right of the target: receives on b_right rows, emits on b_left rows.
    RightHelper,
}

#[inline]
fn powm(b: f64, m: u8) -> f64 {
    match m {
        0 => 1.0,
        1 => b,
        2 => b * b,
        _ => b.powi(i32::from(m)),
    }
}

/// Participating edges of a protomatrix, grouped by row and by column.
struct Graph {
    rows: usize,
    cols: usize,
    cell_row: Vec<usize>,
    cell_col: Vec<usize>,
    mult: Vec<u8>,
    row_start: Vec<usize>,
    row_clamp: Vec<f64>,
    col_cells: Vec<Vec<usize>>,
}

impl Graph {
    fn new(b: &Protomatrix, clamps: &ClampSpec) -> Self {
        let (rows, cols) = (b.rows(), b.cols());
        let mut g = Graph {
            rows,
            cols,
            cell_row: Vec::new(),
            cell_col: Vec::new(),
            mult: Vec::new(),
            row_start: vec![0],
            row_clamp: Vec::new(),
            col_cells: vec![Vec::new(); cols],
        };
        for i in (0..rows).filter(|i| !clamps.excluded.contains(i)) {
            for (j, &m) in b.row(i).iter().enumerate().filter(|(_, &m)| m > 0) {
                g.col_cells[j].push(g.cell_row.len());
                g.cell_row.push(i);
                g.cell_col.push(j);
                g.mult.push(m);
            }
            g.row_start.push(g.cell_row.len());
            g.row_clamp
                .push(clamps.clamped.get(&i).copied().unwrap_or(0.0));
        }
        g
    }

    fn n_cells(&self) -> usize {
        self.cell_row.len()
    }

    /// Check update: u = 1 - (1 - clamp) * prod over other edges of (1 - x).
    fn check_update(&self, x: &[f64], u: &mut [f64], prefix: &mut [f64]) {
        for (k, &clamp) in self.row_clamp.iter().enumerate() {
            let (s, e) = (self.row_start[k], self.row_start[k + 1]);
            let mut acc = 1.0;
            for c in s..e {
                prefix[c] = acc;
                acc *= powm(1.0 - x[c], self.mult[c]);
            }
            let mut suffix = 1.0;
            for c in (s..e).rev() {
                let m = self.mult[c];
                let own = powm(1.0 - x[c], m - 1);
                u[c] = 1.0 - (1.0 - clamp) * own * prefix[c] * suffix;
                suffix *= powm(1.0 - x[c], m);
            }
        }
    }

    /// Variable update; returns the largest message change.
    fn variable_update(&self, eps: f64, u: &[f64], x: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        let mut change = 0.0f64;
        for cells in &self.col_cells {
            let n = cells.len();
            scratch.clear();
            let mut acc = 1.0;
            for &c in cells {
                scratch.push(acc);
                acc *= powm(u[c], self.mult[c]);
            }
            let mut suffix = 1.0;
            for k in (0..n).rev() {
                let c = cells[k];
                let m = self.mult[c];
                let v = eps * powm(u[c], m - 1) * scratch[k] * suffix;
                change = change.max((v - x[c]).abs());
                x[c] = v;
                suffix *= powm(u[c], m);
            }
        }
        change
    }

    fn posterior(&self, eps: f64, u: &[f64]) -> Vec<f64> {
        self.col_cells
            .iter()
            .map(|cells| {
                cells
                    .iter()
                    .fold(eps, |acc, &c| acc * powm(u[c], self.mult[c]))
            })
            .collect()
    }

    fn run(&self, eps: f64, cfg: &DeConfig, seed: Option<&[f64]>) -> DeResult {
        let n = self.n_cells();
        let mut x = seed.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
        let mut u = vec![1.0; n];
        let mut prefix = vec![0.0; n];
        let mut scratch = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.max_iters {
            iterations += 1;
            self.check_update(&x, &mut u, &mut prefix);
            let change = self.variable_update(eps, &u, &mut x, &mut scratch);
            if change < cfg.stall_tol || x.iter().all(|&v| v == 0.0) {
                converged = true;
                break;
            }
        }
        let sigma = self.posterior(eps, &u);
        let decoded = sigma.iter().all(|&s| s < cfg.zero_tol);
        let vn_to_cn = (0..n)
            .map(|c| EdgeMessage {
                row: self.cell_row[c],
                col: self.cell_col[c],
                value: x[c],
            })
            .collect();
        DeResult {
            sigma,
            vn_to_cn,
            iterations,
            converged,
            decoded,
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "erasure probability {eps} outside [0,1]"
        )));
    }
    Ok(())
}

/// Flooding-schedule DE from the all-erasure message state.
pub fn de_run(b: &Protomatrix, eps: f64, clamps: &ClampSpec, cfg: &DeConfig) -> Result<DeResult> {
    de_run_seeded(b, eps, clamps, cfg, None)
}

/// As [`de_run`], but starting from the given variable-to-check messages
/// (in the row-major edge order of [`DeResult::vn_to_cn`]).
pub fn de_run_seeded(
    b: &Protomatrix,
    eps: f64,
    clamps: &ClampSpec,
    cfg: &DeConfig,
    seed: Option<&[f64]>,
) -> Result<DeResult> {
    cfg.validate()?;
    check_eps(eps)?;
    clamps.validate(b.rows())?;
    let g = Graph::new(b, clamps);
    if let Some(s) = seed {
        if s.len() != g.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "seed has {} messages, graph has {} edges",
                s.len(),
                g.n_cells()
            )));
        }
    }
    debug_assert_eq!((g.rows, g.cols), (b.rows(), b.cols()));
    Ok(g.run(eps, cfg, seed))
}

/// Bisection for the largest parameter in `[lo, hi]` where `pred` holds,
/// assuming `pred` is true below the threshold and false above it.
pub fn bisect<F>(mut pred: F, lo: f64, hi: f64, width: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<bool>,
{
    if pred(hi)? {
        return Ok(hi);
    }
    if !pred(lo)? {
        return Ok(lo);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a >= width {
        let mid = 0.5 * (a + b);
        if pred(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    // Re-probe the final bracket to catch tolerance-induced flips.
    if !pred(a)? || pred(b)? {
        return Err(Error::NonMonotone(format!(
            "predicate changed on re-probe of bracket [{a}, {b}]"
        )));
    }
    Ok(0.5 * (a + b))
}

/// Largest erasure probability for which DE on `b` decodes every variable node.
pub fn protograph_threshold(b: &Protomatrix, cfg: &DeConfig) -> Result<f64> {
    if let Some(j) = b.col_sums().iter().position(|&d| d == 0) {
        return Err(Error::Degenerate(format!("column {j} has no edges")));
    }
    cfg.validate()?;
    let clamps = ClampSpec::new();
    let g = Graph::new(b, &clamps);
    bisect(|eps| Ok(g.run(eps, cfg, None).decoded), 0.0, 1.0, cfg.bisect_width)
}

/// Fixed point of x = eps (1 - (1-x)^(r-1))^(l-1) reached from x = 1;
/// exactly zero when it falls below `zero_tol`.
pub fn regular_fixed_point(l: usize, r: usize, eps: f64, cfg: &DeConfig) -> f64 {
    let (a, b) = (r as i32 - 1, l as i32 - 1);
    let mut x = 1.0f64;
    for _ in 0..cfg.max_iters {
        let next = eps * (1.0 - (1.0 - x).powi(a)).powi(b);
        let change = (next - x).abs();
        x = next;
        if change < cfg.stall_tol || x == 0.0 {
            break;
        }
    }
    if x < cfg.zero_tol {
        0.0
    } else {
        x
    }
}

fn coupling_rows(sb: &SubBlockProto) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    (0..sb.t(), sb.l()..sb.l() + sb.t())
}

fn check_len(d: &TransferValue, t: usize) -> Result<()> {
    if d.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "transfer value has {} entries, sub-block has t={t}",
            d.len()
        )));
    }
    if let Some(v) = d.0.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "transfer entry {v} is not a probability"
        )));
    }
    Ok(())
}

/// Helper DE run together with the outgoing values it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct HelperRun {
    pub de: DeResult,
    pub delta_out: TransferValue,
}

/// Runs a helper sub-block with its incoming coupling rows pinned at `d_in`
/// and outgoing rows removed, then folds the posteriors into outgoing values.
pub fn helper_run(
    sb: &SubBlockProto,
    dir: Direction,
    eps: f64,
    d_in: &TransferValue,
    cfg: &DeConfig,
) -> Result<HelperRun> {
    check_len(d_in, sb.t())?;
    let (left, right) = coupling_rows(sb);
    let (incoming, outgoing, out_matrix) = match dir {
        Direction::LeftHelper => (left, right, sb.b_right()),
        Direction::RightHelper => (right, left, sb.b_left()),
    };
    let mut clamps = ClampSpec::new();
    for (row, &v) in incoming.zip(&d_in.0) {
        clamps = clamps.clamp(row, v);
    }
    for row in outgoing {
        clamps = clamps.exclude(row);
    }
    let de = de_run(&sb.full_matrix(), eps, &clamps, cfg)?;
    let delta_out = outgoing_values(out_matrix, &de.sigma);
    Ok(HelperRun { de, delta_out })
}

/// delta_i = 1 - prod_j (1 - sigma_j)^{B[i][j]}.
pub fn outgoing_values(b_out: &Protomatrix, sigma: &[f64]) -> TransferValue {
    TransferValue(
        (0..b_out.rows())
            .map(|i| {
                1.0 - b_out
                    .row(i)
                    .iter()
                    .zip(sigma)
                    .fold(1.0, |acc, (&m, &s)| acc * powm(1.0 - s, m))
            })
            .collect(),
    )
}

pub fn helper_transfer(
    sb: &SubBlockProto,
    dir: Direction,
    eps: f64,
    d_in: &TransferValue,
    cfg: &DeConfig,
) -> Result<TransferValue> {
    Ok(helper_run(sb, dir, eps, d_in, cfg)?.delta_out)
}

/// `k`-fold application of the erasure-transfer function.
pub fn iterated_transfer(
    sb: &SubBlockProto,
    dir: Direction,
    eps: f64,
    d0: &TransferValue,
    k: usize,
    cfg: &DeConfig,
) -> Result<TransferValue> {
    if k == 0 {
        return Err(Error::InvalidParameter("iteration count must be >= 1".into()));
    }
    let mut d = d0.clone();
    for _ in 0..k {
        d = helper_transfer(sb, dir, eps, &d, cfg)?;
    }
    Ok(d)
}

/// Number of consecutive helpers needed to drive full erasure down to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QValue {
    Finite(usize),
    Infinite,
}

impl QValue {
    pub fn finite(self) -> Option<usize> {
        match self {
            QValue::Finite(q) => Some(q),
            QValue::Infinite => None,
        }
    }
}

impl std::fmt::Display for QValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QValue::Finite(q) => write!(f, "{q}"),
            QValue::Infinite => f.write_str("inf"),
        }
    }
}

pub const DEFAULT_Q_CAP: usize = 1000;

pub fn q_of(
    sb: &SubBlockProto,
    dir: Direction,
    eps: f64,
    cfg: &DeConfig,
    cap: usize,
) -> Result<QValue> {
    if cap == 0 {
        return Err(Error::InvalidParameter("q cap must be >= 1".into()));
    }
    if sb.t() == 0 {
        // Without coupling, a sub-block either decodes on its own or never.
        let de = de_run(sb.b_loc(), eps, &ClampSpec::new(), cfg)?;
        return Ok(if de.decoded {
            QValue::Finite(1)
        } else {
            QValue::Infinite
        });
    }
    let mut d = TransferValue::ones(sb.t());
    for k in 1..=cap {
        let next = helper_transfer(sb, dir, eps, &d, cfg)?;
        if next.is_zero(cfg.zero_tol) {
            return Ok(QValue::Finite(k));
        }
        if next.max_abs_diff(&d) < cfg.stall_tol {
            return Ok(QValue::Infinite);
        }
        d = next;
    }
    Ok(QValue::Infinite)
}

/// Target sub-block DE with both coupling sides pinned at the incoming values.
pub fn target_de(
    sb: &SubBlockProto,
    eps: f64,
    d_left: &TransferValue,
    d_right: &TransferValue,
    cfg: &DeConfig,
) -> Result<DeResult> {
    check_len(d_left, sb.t())?;
    check_len(d_right, sb.t())?;
    let (left, right) = coupling_rows(sb);
    let mut clamps = ClampSpec::new();
    for (row, &v) in left.zip(&d_left.0).chain(right.zip(&d_right.0)) {
        clamps = clamps.clamp(row, v);
    }
    de_run(&sb.full_matrix(), eps, &clamps, cfg)
}

/// Largest eps for which the target decodes given fixed incoming values.
pub fn target_threshold(
    sb: &SubBlockProto,
    d_left: &TransferValue,
    d_right: &TransferValue,
    cfg: &DeConfig,
) -> Result<f64> {
    check_len(d_left, sb.t())?;
    check_len(d_right, sb.t())?;
    bisect(
        |eps| Ok(target_de(sb, eps, d_left, d_right, cfg)?.decoded),
        0.0,
        1.0,
        cfg.bisect_width,
    )
}
