//! Sub-block thresholds, limiting inter-sub-block values and semi-global
//! thresholds.

use serde::{Deserialize, Serialize};

use crate::de::{
    bisect, helper_transfer, protograph_threshold, regular_fixed_point, target_de,
    target_threshold, DeConfig, Direction, TransferValue,
};
use crate::error::{Error, Result};
use crate::protograph::{couple, is_symmetric_sb, Protomatrix, SubBlockProto};

/// Margin for the strict-domination test in the second threshold.
pub const DOMINATION_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbThresholds {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub eps_lr: f64,
    pub direction: Direction,
}

impl SbThresholds {
    pub fn is_ordered(&self, slack: f64) -> bool {
        self.eps1 <= self.eps2 + slack
            && self.eps2 <= self.eps3 + slack
            && self.eps3 <= self.eps4 + slack
    }
}

/// Points per dimension of the grid on which domination is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Eps2Grid(pub usize);

impl Eps2Grid {
    /// 200 points for t = 1, 60 per dimension for t >= 2.
    pub fn default_for(t: usize) -> Self {
        Eps2Grid(if t <= 1 { 200 } else { 60 })
    }
}

/// Grid over (0,1]^t: every coordinate takes the values k/n for k = 1..=n.
///
/// Points with a zero coordinate are left out. There a helper would have to
/// return exactly zero on that coordinate, which no helper above the local
/// threshold does, so including them would pin the threshold to a value
/// unrelated to erasure reduction.
fn domination_grid(t: usize, n: usize) -> Vec<TransferValue> {
    let mut out = Vec::new();
    let mut idx = vec![1usize; t];
    loop {
        out.push(TransferValue(idx.iter().map(|&k| k as f64 / n as f64).collect()));
        let mut d = 0;
        while d < t {
            idx[d] += 1;
            if idx[d] <= n {
                break;
            }
            idx[d] = 1;
            d += 1;
        }
        if d == t {
            return out;
        }
    }
}

/// delta_out <= delta element-wise with at least one strict decrease.
fn strictly_dominated(out: &TransferValue, delta: &TransferValue) -> bool {
    out.dominated_by(delta, DOMINATION_MARGIN)
        && out.0.iter().zip(&delta.0).any(|(o, d)| *o < *d - DOMINATION_MARGIN)
}

/// Step cap for the all-erasure orbit used by [`eps2_threshold`].
pub const EPS2_ORBIT_MAX_STEPS: usize = 20_000;

/// How the second threshold is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Eps2Method {
    /// Strict reduction along the orbit of the all-erasure vector, down to zero.
    Orbit,
    /// Strict reduction at every point of a uniform grid over (0,1]^t.
    Grid(Eps2Grid),
}

fn orbit_strictly_decreases(
    sb: &SubBlockProto,
    dir: Direction,
    eps: f64,
    cfg: &DeConfig,
) -> Result<bool> {
    let mut d = TransferValue::ones(sb.t());
    for _ in 0..EPS2_ORBIT_MAX_STEPS {
        let next = helper_transfer(sb, dir, eps, &d, cfg)?;
        if next.is_zero(cfg.zero_tol) {
            return Ok(true);
        }
        if !strictly_dominated(&next, &d) || next.max_abs_diff(&d) < cfg.stall_tol {
            return Ok(false);
        }
        d = next;
    }
    Ok(false)
}

/// Largest eps for which the inter-sub-block values, starting from full
/// erasure, shrink strictly at every helper until they vanish.
///
/// For t = 1 this coincides with the grid check because the transfer is a
/// monotone scalar map. For t >= 2 the grid check also visits points no chain
/// of helpers ever produces (one coordinate near zero, another near one) and
/// comes out far lower.
pub fn eps2_threshold(sb: &SubBlockProto, dir: Direction, cfg: &DeConfig) -> Result<f64> {
    if sb.t() == 0 {
        return local_threshold(sb, cfg);
    }
    bisect(|eps| orbit_strictly_decreases(sb, dir, eps, cfg), 0.0, 1.0, cfg.bisect_width)
}

/// Largest eps for which every nonzero grid point is strictly reduced by one helper.
pub fn eps2_grid_threshold(
    sb: &SubBlockProto,
    dir: Direction,
    cfg: &DeConfig,
    grid: Eps2Grid,
) -> Result<f64> {
    if grid.0 == 0 {
        return Err(Error::InvalidParameter("grid needs at least one point".into()));
    }
    let t = sb.t();
    if t == 0 {
        return local_threshold(sb, cfg);
    }
    let points = domination_grid(t, grid.0);
    // The last violating point is tried first: probes above the threshold
    // usually fail on the same point.
    let mut last_bad: Option<usize> = None;
    let mut pred = |eps: f64| -> Result<bool> {
        let order = last_bad.into_iter().chain((0..points.len()).filter(|&k| Some(k) != last_bad));
        for k in order.collect::<Vec<_>>() {
            let out = helper_transfer(sb, dir, eps, &points[k], cfg)?;
            if !strictly_dominated(&out, &points[k]) {
                last_bad = Some(k);
                return Ok(false);
            }
        }
        Ok(true)
    };
    bisect(&mut pred, 0.0, 1.0, cfg.bisect_width)
}

fn local_threshold(sb: &SubBlockProto, cfg: &DeConfig) -> Result<f64> {
    protograph_threshold(sb.b_loc(), cfg)
}

/// sup{eps : Delta(eps, 0) = 0}.
pub fn eps3_threshold(sb: &SubBlockProto, dir: Direction, cfg: &DeConfig) -> Result<f64> {
    if sb.t() == 0 {
        return local_threshold(sb, cfg);
    }
    let zero = TransferValue::zeros(sb.t());
    bisect(
        |eps| Ok(helper_transfer(sb, dir, eps, &zero, cfg)?.is_zero(cfg.zero_tol)),
        0.0,
        1.0,
        cfg.bisect_width,
    )
}

/// Threshold of the helper with its incoming coupling rows fully known.
pub fn eps3_via_protograph(sb: &SubBlockProto, dir: Direction, cfg: &DeConfig) -> Result<f64> {
    let stacked = match dir {
        Direction::LeftHelper => Protomatrix::vstack(&[sb.b_left(), sb.b_loc()])?,
        Direction::RightHelper => Protomatrix::vstack(&[sb.b_loc(), sb.b_right()])?,
    };
    protograph_threshold(&stacked, cfg)
}

pub fn sb_thresholds(sb: &SubBlockProto, dir: Direction, cfg: &DeConfig) -> Result<SbThresholds> {
    sb_thresholds_with(sb, dir, cfg, Eps2Method::Orbit)
}

pub fn sb_thresholds_with(
    sb: &SubBlockProto,
    dir: Direction,
    cfg: &DeConfig,
    method: Eps2Method,
) -> Result<SbThresholds> {
    let eps1 = local_threshold(sb, cfg)?;
    let eps_lr = protograph_threshold(&Protomatrix::all_ones(sb.l(), sb.r())?, cfg)?;
    if sb.t() == 0 {
        // Without coupling rows every threshold collapses to local decoding.
        return Ok(SbThresholds {
            eps1,
            eps2: eps1,
            eps3: eps1,
            eps4: eps1,
            eps_lr,
            direction: dir,
        });
    }
    let eps2 = match method {
        Eps2Method::Orbit => eps2_threshold(sb, dir, cfg)?,
        Eps2Method::Grid(grid) => eps2_grid_threshold(sb, dir, cfg, grid)?,
    };
    let eps3 = eps3_threshold(sb, dir, cfg)?;
    let zero = TransferValue::zeros(sb.t());
    let eps4 = target_threshold(sb, &zero, &zero, cfg)?;
    Ok(SbThresholds {
        eps1,
        eps2,
        eps3,
        eps4,
        eps_lr,
        direction: dir,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiPsi {
    pub phi: TransferValue,
    pub psi: TransferValue,
    pub x_eps: f64,
}

/// phi_i = 1-(1-x)^(r-d_i), psi_i = 1-(1-x)^(d_i) with d the b_left row degrees
/// and x the regular (l,r) fixed point.
pub fn phi_psi(sb: &SubBlockProto, eps: f64, cfg: &DeConfig) -> PhiPsi {
    let x = regular_fixed_point(sb.l(), sb.r(), eps, cfg);
    let r = sb.r() as i32;
    let degs = sb.b_left().row_sums();
    let f = |e: i32| 1.0 - (1.0 - x).powi(e);
    PhiPsi {
        phi: TransferValue(degs.iter().map(|&d| f(r - d as i32)).collect()),
        psi: TransferValue(degs.iter().map(|&d| f(d as i32)).collect()),
        x_eps: x,
    }
}

/// Whether the helper sequence starts at a chain end (all values known) or
/// from full erasure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminationFlag {
    Terminated,
    Open,
}

impl TerminationFlag {
    pub fn from_bit(tau: u8) -> Result<Self> {
        match tau {
            0 => Ok(Self::Terminated),
            1 => Ok(Self::Open),
            _ => Err(Error::InvalidParameter(format!("tau must be 0 or 1, got {tau}"))),
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Self::Terminated => 0,
            Self::Open => 1,
        }
    }

    fn start(self, t: usize) -> TransferValue {
        match self {
            Self::Terminated => TransferValue::zeros(t),
            Self::Open => TransferValue::ones(t),
        }
    }
}

pub const DELTA_HAT_TOL: f64 = 1e-10;
pub const DELTA_HAT_MAX_STEPS: usize = 10_000;

/// Outcome of iterating the transfer function towards its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaHatRun {
    pub value: TransferValue,
    pub previous: TransferValue,
    pub steps: usize,
    pub converged: bool,
}

/// Iterates delta <- Delta(eps, delta) from the start given by `tau` for at
/// most `max_steps` steps, stopping early once the sup-norm change is below
/// [`DELTA_HAT_TOL`] or the value reaches zero.
pub fn delta_hat_run(
    sb: &SubBlockProto,
    dir: Direction,
    eps: f64,
    tau: TerminationFlag,
    cfg: &DeConfig,
    max_steps: usize,
) -> Result<DeltaHatRun> {
    let mut d = tau.start(sb.t());
    let mut previous = d.clone();
    for step in 1..=max_steps {
        let next = helper_transfer(sb, dir, eps, &d, cfg)?;
        let change = next.max_abs_diff(&d);
        previous = std::mem::replace(&mut d, next);
        if change < DELTA_HAT_TOL || d.is_zero(cfg.zero_tol) {
            return Ok(DeltaHatRun {
                value: d,
                previous,
                steps: step,
                converged: true,
            });
        }
    }
    Ok(DeltaHatRun {
        value: d,
        previous,
        steps: max_steps,
        converged: false,
    })
}

/// Limit of the inter-sub-block values seen by the target.
pub fn delta_hat(
    sb: &SubBlockProto,
    dir: Direction,
    eps: f64,
    tau: TerminationFlag,
    cfg: &DeConfig,
) -> Result<TransferValue> {
    let run = delta_hat_run(sb, dir, eps, tau, cfg, DELTA_HAT_MAX_STEPS)?;
    if !run.converged {
        return Err(Error::NonConvergence {
            steps: run.steps,
            last: run.value.0,
            previous: run.previous.0,
        });
    }
    Ok(run.value)
}

/// Semi-global threshold for the given termination flags.
pub fn sg_threshold(
    sb: &SubBlockProto,
    tau_left: TerminationFlag,
    tau_right: TerminationFlag,
    cfg: &DeConfig,
) -> Result<f64> {
    sg_threshold_with_steps(sb, tau_left, tau_right, cfg, DELTA_HAT_MAX_STEPS)
}

/// As [`sg_threshold`], with the helper sequence truncated at `max_steps`.
/// A truncated sequence is used as is: it is the value delivered by exactly
/// `max_steps` helpers.
pub fn sg_threshold_with_steps(
    sb: &SubBlockProto,
    tau_left: TerminationFlag,
    tau_right: TerminationFlag,
    cfg: &DeConfig,
    max_steps: usize,
) -> Result<f64> {
    if is_symmetric_sb(sb)?.is_none() {
        return Err(Error::Asymmetric);
    }
    // Symmetry makes the left and right transfer functions coincide.
    let dir = Direction::LeftHelper;
    bisect(
        |eps| {
            let dl = delta_hat_run(sb, dir, eps, tau_left, cfg, max_steps)?.value;
            let dr = if tau_right == tau_left {
                dl.clone()
            } else {
                delta_hat_run(sb, dir, eps, tau_right, cfg, max_steps)?.value
            };
            Ok(target_de(sb, eps, &dl, &dr, cfg)?.decoded)
        },
        0.0,
        1.0,
        cfg.bisect_width,
    )
}

pub const SG_LIMIT_GRID_POINTS: usize = 50;
pub const SG_LIMIT_TOL: f64 = 1e-6;
pub const SG_LIMIT_EQUALITY_TOL: f64 = 2e-4;
/// Sample grids keep this distance from measured thresholds.
pub const THRESHOLD_GUARD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaHatSample {
    pub eps: f64,
    pub value: TransferValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgThresholdReport {
    pub esg_11: f64,
    pub esg_01: f64,
    pub esg_00: f64,
    pub thresholds: SbThresholds,
    pub delta_hat_0: Vec<DeltaHatSample>,
    pub delta_hat_1: Vec<DeltaHatSample>,
    /// eps_lr <= eps3 and both limits agree on the grid above eps3.
    pub limit_rule_applies: bool,
    /// When applicable: esg_00 and esg_01 both equal eps3 within tolerance.
    pub limit_rule_holds: Option<bool>,
}

/// Computes the three semi-global thresholds and checks whether the
/// closed-form characterization through eps3 applies and holds.
pub fn sg_limit_report(sb: &SubBlockProto, cfg: &DeConfig) -> Result<SgThresholdReport> {
    use TerminationFlag::{Open, Terminated};
    if is_symmetric_sb(sb)?.is_none() {
        return Err(Error::Asymmetric);
    }
    let dir = Direction::LeftHelper;
    let thresholds = sb_thresholds(sb, dir, cfg)?;
    let esg_11 = sg_threshold(sb, Open, Open, cfg)?;
    let esg_01 = sg_threshold(sb, Terminated, Open, cfg)?;
    let esg_00 = sg_threshold(sb, Terminated, Terminated, cfg)?;

    let lo = thresholds.eps3 + THRESHOLD_GUARD;
    let n = SG_LIMIT_GRID_POINTS;
    let mut delta_hat_0 = Vec::with_capacity(n);
    let mut delta_hat_1 = Vec::with_capacity(n);
    for k in 1..=n {
        let eps = lo + (1.0 - lo) * k as f64 / n as f64;
        for (tau, out) in [(Terminated, &mut delta_hat_0), (Open, &mut delta_hat_1)] {
            let value = delta_hat_run(sb, dir, eps, tau, cfg, DELTA_HAT_MAX_STEPS)?.value;
            out.push(DeltaHatSample { eps, value });
        }
    }
    let limits_agree = delta_hat_0
        .iter()
        .zip(&delta_hat_1)
        .all(|(a, b)| a.value.max_abs_diff(&b.value) < SG_LIMIT_TOL);
    let limit_rule_applies = thresholds.eps_lr <= thresholds.eps3 && limits_agree;
    let limit_rule_holds = limit_rule_applies.then(|| {
        (esg_00 - thresholds.eps3).abs() < SG_LIMIT_EQUALITY_TOL
            && (esg_01 - thresholds.eps3).abs() < SG_LIMIT_EQUALITY_TOL
    });
    Ok(SgThresholdReport {
        esg_11,
        esg_01,
        esg_00,
        thresholds,
        delta_hat_0,
        delta_hat_1,
        limit_rule_applies,
        limit_rule_holds,
    })
}

/// Flooding iterations allowed when decoding the whole coupled chain.
///
/// Near its asymptotic threshold the decoding wave of a long chain needs many
/// thousands of iterations to cross it; the global threshold is reported for a
/// practical decoder that stops after this many.
pub const GLOBAL_MAX_ITERS: usize = 1000;

/// Threshold of the coupled protograph with `m` sub-blocks, decoded with at
/// most [`GLOBAL_MAX_ITERS`] iterations (fewer if `cfg` asks for fewer).
pub fn global_threshold(sb: &SubBlockProto, m: usize, cfg: &DeConfig) -> Result<f64> {
    let capped = DeConfig {
        max_iters: cfg.max_iters.min(GLOBAL_MAX_ITERS),
        ..*cfg
    };
    protograph_threshold(&couple(sb, m)?.matrix, &capped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protograph::cutting_vector_sb;

    #[test]
    fn grid_excludes_origin() {
        let g = domination_grid(2, 3);
        assert_eq!(g.len(), 9);
        assert!(g.iter().all(|d| d.0.iter().all(|&v| v > 0.0)));
        assert!(g.iter().all(|d| !d.is_zero(1e-12)));
        assert_eq!(domination_grid(1, 200).len(), 200);
    }

    #[test]
    fn running_example_thresholds() {
        let cfg = DeConfig::default();
        let sb = cutting_vector_sb(3, 6, 1).unwrap();
        let th = sb_thresholds(&sb, Direction::LeftHelper, &cfg).unwrap();
        assert!((th.eps1 - 0.2).abs() < 5e-4);
        assert!((th.eps2 - 0.3719).abs() < 5e-4);
        assert!((th.eps3 - 0.4297).abs() < 5e-4);
    }

    #[test]
    fn eps2_methods() {
        let cfg = DeConfig::default();
        let dir = Direction::LeftHelper;
        let sb = cutting_vector_sb(3, 6, 1).unwrap();
        let orbit = eps2_threshold(&sb, dir, &cfg).unwrap();
        let grid = eps2_grid_threshold(&sb, dir, &cfg, Eps2Grid::default_for(1)).unwrap();
        assert!((orbit - grid).abs() < 1e-4, "{orbit} vs {grid}");
        // In two dimensions the grid also visits states no helper chain reaches.
        let sb = crate::protograph::enumerate_symmetric_designs(4, 6, 2).unwrap().remove(0);
        let orbit = eps2_threshold(&sb, dir, &cfg).unwrap();
        let grid = eps2_grid_threshold(&sb, dir, &cfg, Eps2Grid(20)).unwrap();
        assert!(grid < orbit);
        assert!(eps2_grid_threshold(&sb, dir, &cfg, Eps2Grid(0)).is_err());
    }

    #[test]
    fn uncoupled_thresholds_collapse() {
        let cfg = DeConfig::default();
        let sb = crate::protograph::SubBlockProto::uncoupled(4, 6).unwrap();
        let th = sb_thresholds(&sb, Direction::LeftHelper, &cfg).unwrap();
        assert_eq!(th.eps1, th.eps2);
        assert_eq!(th.eps1, th.eps4);
        assert!((th.eps1 - 0.5061).abs() < 1e-4);
    }
}
