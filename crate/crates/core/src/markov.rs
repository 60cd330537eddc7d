//! Sub-block Markov-varying erasure channel and lower bounds on semi-global
//! decoding success.
//!
//! Channel states are merged into four sub-block states by threshold interval
//! (locally decodable, error reducing, zero preserving, anti-terminating). A
//! decoder chain on `q + 2` states then tracks, from the sub-block decoded last
//! back to the one decoded first, whether the sequence forces zero outgoing
//! erasure values (a pseudo-termination).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::de::{q_of, DeConfig, Direction, QValue, DEFAULT_Q_CAP};
use crate::error::{Error, Result};
use crate::protograph::SubBlockProto;
use crate::sb_analysis::{sb_thresholds, SbThresholds};

const STOCHASTIC_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const POWER_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    states: Vec<f64>,
    p: DMatrix<f64>,
    nu: Vec<f64>,
}

impl ChannelModel {
    /// `states` ascending erasure rates, `p[i][j]` = Pr(next = j | current = i).
    pub fn new(states: Vec<f64>, p: Vec<Vec<f64>>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::Channel("no channel states".into()));
        }
        if states.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::Channel(format!("erasure rates must lie in [0,1]: {states:?}")));
        }
        if states.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Channel(format!("erasure rates must be strictly ascending: {states:?}")));
        }
        if p.len() != n || p.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "transition matrix must be {n}x{n}"
            )));
        }
        let p = DMatrix::from_fn(n, n, |i, j| p[i][j]);
        check_stochastic(&p)?;
        let nu = stationary(&p)?;
        Ok(Self { states, p, nu })
    }

    /// Two-state Gilbert-Elliot channel that stays put with probability `alpha`.
    pub fn gilbert_elliot(states: [f64; 2], alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Channel(format!("alpha must lie in [0,1], got {alpha}")));
        }
        Self::new(
            states.to_vec(),
            vec![vec![alpha, 1.0 - alpha], vec![1.0 - alpha, alpha]],
        )
    }

    /// Memoryless channel: every row equals `rho`.
    pub fn iid(states: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        let p = vec![rho; states.len()];
        Self::new(states, p)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Long-run average erasure rate.
    pub fn expected_erasure(&self) -> f64 {
        self.states.iter().zip(&self.nu).map(|(e, v)| e * v).sum()
    }
}

/// JSON form of a channel: exactly one of `p`, `alpha` (two states) or `iid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDocument {
    pub states: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iid: Option<Vec<f64>>,
}

impl ChannelDocument {
    pub fn into_model(self) -> Result<ChannelModel> {
        match (self.p, self.alpha, self.iid) {
            (Some(p), None, None) => ChannelModel::new(self.states, p),
            (None, Some(alpha), None) => {
                let states: [f64; 2] = self.states.try_into().map_err(|s: Vec<f64>| {
                    Error::Channel(format!("alpha needs exactly 2 states, got {}", s.len()))
                })?;
                ChannelModel::gilbert_elliot(states, alpha)
            }
            (None, None, Some(rho)) => ChannelModel::iid(self.states, rho),
            _ => Err(Error::Channel(
                "give exactly one of \"p\", \"alpha\" or \"iid\"".into(),
            )),
        }
    }
}

fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::DimensionMismatch("transition matrix must be square".into()));
    }
    for (i, row) in p.row_iter().enumerate() {
        if row.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Channel(format!("row {i} has a negative or NaN entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Channel(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

fn stationary_residual(p: &DMatrix<f64>, nu: &DVector<f64>) -> f64 {
    (p.transpose() * nu - nu).amax()
}

/// Lazy power iteration from a given start; the lazy step removes periodicity.
fn power_stationary(p: &DMatrix<f64>, start: DVector<f64>) -> DVector<f64> {
    let n = p.nrows();
    let lazy = (p.transpose() + DMatrix::identity(n, n)) * 0.5;
    let mut x = start;
    for _ in 0..POWER_MAX_STEPS {
        let next = &lazy * &x;
        let diff = (&next - &x).amax();
        x = next;
        if diff < 1e-15 {
            break;
        }
    }
    x
}

/// Stationary distribution of a stochastic matrix.
///
/// Solves nu (P - I) = 0 with one equation replaced by sum(nu) = 1. That
/// system is singular exactly when the stationary law is not unique; in that
/// case power iteration from every corner of the simplex decides.
pub fn stationary(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_stochastic(p)?;
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let nu = match a.lu().solve(&rhs) {
        Some(nu) if nu.iter().all(|x| x.is_finite()) => nu,
        _ => {
            let limits: Vec<DVector<f64>> = (0..n)
                .map(|k| {
                    let mut e = DVector::zeros(n);
                    e[k] = 1.0;
                    power_stationary(p, e)
                })
                .collect();
            if limits.iter().any(|l| (l - &limits[0]).amax() > STATIONARY_TOL) {
                return Err(Error::Channel("stationary distribution is not unique".into()));
            }
            limits.into_iter().next().expect("n >= 1")
        }
    };
    let nu = nu.map(|x| if x.abs() < 1e-15 { 0.0 } else { x });
    let res = stationary_residual(p, &nu);
    if res > STATIONARY_TOL || nu.iter().any(|&x| x < -STATIONARY_TOL) {
        return Err(Error::Channel(format!(
            "stationary solve is ill-conditioned (residual {res:e})"
        )));
    }
    Ok(nu.iter().map(|&x| x.max(0.0)).collect())
}

/// Time-reversed chain: P^_{i,j} = nu_j P_{j,i} / nu_i.
pub fn reverse_chain(model: &ChannelModel) -> Result<DMatrix<f64>> {
    if let Some(i) = model.nu.iter().position(|&v| v <= 0.0) {
        return Err(Error::Channel(format!("state {i} has zero stationary mass")));
    }
    let n = model.states.len();
    Ok(DMatrix::from_fn(n, n, |i, j| model.nu[j] * model.p[(j, i)] / model.nu[i]))
}

/// Sub-block state by threshold interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SbState {
    /// Locally decodable.
    S1,
    /// Error reducing.
    S2,
    /// Preserves zero incoming values.
    S3,
    /// Anti-terminating.
    S4,
}

impl SbState {
    pub const ALL: [SbState; 4] = [SbState::S1, SbState::S2, SbState::S3, SbState::S4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("no sub-block state with index {i}")))
    }

    /// Interval of `eps` with edges eps1 <= eps2 <= eps3 and eps4 taken as 1.
    /// A rate sitting exactly on an edge goes to the worse state.
    pub fn classify(eps: f64, th: &SbThresholds) -> Self {
        if eps < th.eps1 {
            SbState::S1
        } else if eps < th.eps2 {
            SbState::S2
        } else if eps < th.eps3 {
            SbState::S3
        } else {
            SbState::S4
        }
    }
}

impl fmt::Display for SbState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.index() + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SbStateMap {
    /// Channel-state indices (0-based) falling into each sub-block state.
    pub a_sets: [Vec<usize>; 4],
    /// Worst-case number of error-reducing sub-blocks needed for zero output.
    pub q: usize,
}

/// Groups channel states by interval and takes the worst q over the
/// error-reducing ones. With no error-reducing state q is set to 2, the
/// smallest value the decoder chain accepts; it never influences the result
/// since no sub-block can then enter an error-reduction state.
pub fn sb_state_map(model: &ChannelModel, th: &SbThresholds, q_values: &[QValue]) -> Result<SbStateMap> {
    if !th.is_ordered(0.0) {
        return Err(Error::InvalidParameter(format!("thresholds are not ordered: {th:?}")));
    }
    if q_values.len() != model.states.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} q values for {} channel states",
            q_values.len(),
            model.states.len()
        )));
    }
    let mut a_sets: [Vec<usize>; 4] = Default::default();
    let mut q = 2;
    for (k, &e) in model.states.iter().enumerate() {
        let s = SbState::classify(e, th);
        a_sets[s.index()].push(k);
        if s == SbState::S2 {
            match q_values[k] {
                QValue::Infinite => return Err(Error::InfiniteQ { state: e }),
                QValue::Finite(qk) if qk < 2 => {
                    return Err(Error::InvalidParameter(format!(
                        "state {e} is above the local threshold yet q = {qk}"
                    )))
                }
                QValue::Finite(qk) => q = q.max(qk),
            }
        }
    }
    Ok(SbStateMap { a_sets, q })
}

/// q of every channel state for the given helper direction.
pub fn q_values_for(model: &ChannelModel, sb: &SubBlockProto, dir: Direction, cfg: &DeConfig) -> Result<Vec<QValue>> {
    model
        .states
        .iter()
        .map(|&e| q_of(sb, dir, e, cfg, DEFAULT_Q_CAP))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbStateChain {
    pub q_matrix: [[f64; 4]; 4],
    pub mu: [f64; 4],
}

impl SbStateChain {
    /// Chain of the same states read in the opposite direction:
    /// Q^_{i,j} = mu_j Q_{j,i} / mu_i. States without mass keep an identity row.
    pub fn reversed(&self) -> SbStateChain {
        let mut q_matrix = [[0.0; 4]; 4];
        for i in 0..4 {
            if self.mu[i] <= 0.0 {
                q_matrix[i][i] = 1.0;
                continue;
            }
            for j in 0..4 {
                q_matrix[i][j] = self.mu[j] * self.q_matrix[j][i] / self.mu[i];
            }
        }
        SbStateChain { q_matrix, mu: self.mu }
    }

    fn entry(&self, from: SbState, to: SbState) -> f64 {
        self.q_matrix[from.index()][to.index()]
    }
}

pub fn sb_state_chain(model: &ChannelModel, map: &SbStateMap) -> SbStateChain {
    let mut mu = [0.0; 4];
    for (i, set) in map.a_sets.iter().enumerate() {
        mu[i] = set.iter().map(|&k| model.nu[k]).sum();
    }
    let mut q_matrix = [[0.0; 4]; 4];
    for i in 0..4 {
        if mu[i] <= 0.0 {
            q_matrix[i][i] = 1.0;
            continue;
        }
        for j in 0..4 {
            let flow: f64 = map.a_sets[i]
                .iter()
                .flat_map(|&a| map.a_sets[j].iter().map(move |&b| (a, b)))
                .map(|(a, b)| model.nu[a] * model.p[(a, b)])
                .sum();
            q_matrix[i][j] = flow / mu[i];
        }
    }
    SbStateChain { q_matrix, mu }
}

/// State of the decoder chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecoderState {
    /// Zero outgoing values are guaranteed.
    Terminated,
    /// The last `k` sub-blocks (1 <= k <= q-1) were all error reducing.
    Reducing(usize),
    /// Error reduction restarted by a zero-preserving sub-block.
    Reset,
    /// Zero output is impossible.
    AntiTerminated,
}

impl DecoderState {
    /// Position in the ordering (terminated, reducing 1..q-1, reset, anti-terminated).
    pub fn index(self, q: usize) -> usize {
        match self {
            DecoderState::Terminated => 0,
            DecoderState::Reducing(k) => k,
            DecoderState::Reset => q,
            DecoderState::AntiTerminated => q + 1,
        }
    }

    fn start(s: SbState) -> Self {
        match s {
            SbState::S1 => DecoderState::Terminated,
            SbState::S2 => DecoderState::Reducing(1),
            SbState::S3 => DecoderState::Reset,
            SbState::S4 => DecoderState::AntiTerminated,
        }
    }

    /// Deterministic step when the next (earlier decoded) sub-block is `s`.
    pub fn step(self, s: SbState, q: usize) -> Self {
        use DecoderState::*;
        match (self, s) {
            (Terminated, _) => Terminated,
            (AntiTerminated, _) => AntiTerminated,
            (_, SbState::S1) => Terminated,
            (_, SbState::S4) => AntiTerminated,
            (_, SbState::S3) => Reset,
            (Reducing(k), SbState::S2) if k + 1 >= q => Terminated,
            (Reducing(k), SbState::S2) => Reducing(k + 1),
            (Reset, SbState::S2) => Reducing(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceVerdict {
    pub member: bool,
    pub final_state: DecoderState,
}

/// Runs the decoder automaton over `seq`, starting with the sub-block decoded
/// last. The sequence is a pseudo-termination iff it ends in `Terminated`.
pub fn classify_sequence(seq: &[SbState], q: usize) -> Result<SequenceVerdict> {
    check_q(q)?;
    let (first, rest) = seq
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty sequence".into()))?;
    let final_state = rest
        .iter()
        .fold(DecoderState::start(*first), |st, &s| st.step(s, q));
    Ok(SequenceVerdict {
        member: final_state == DecoderState::Terminated,
        final_state,
    })
}

fn check_q(q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::InvalidParameter(format!("q must be >= 2, got {q}")));
    }
    Ok(())
}

/// Decoder-chain matrix with rows (terminated, reducing 1..q-1, reset,
/// anti-terminated), filled from per-transition weights `w(from, to)` of the
/// sub-block chain and weight `absorb` on the absorbing diagonal.
fn decoder_matrix<T>(q: usize, w: impl Fn(SbState, SbState) -> T, absorb: T) -> Vec<Vec<T>>
where
    T: Copy + Default + std::ops::Add<Output = T>,
{
    use SbState::*;
    let n = q + 2;
    let (reset, anti) = (q, q + 1);
    let mut m = vec![vec![T::default(); n]; n];
    m[0][0] = absorb;
    for k in 1..q {
        let row = &mut m[k];
        if k + 1 < q {
            row[0] = w(S2, S1);
            row[k + 1] = w(S2, S2);
        } else {
            row[0] = w(S2, S1) + w(S2, S2);
        }
        row[reset] = w(S2, S3);
        row[anti] = w(S2, S4);
    }
    m[reset][0] = w(S3, S1);
    m[reset][1] = w(S3, S2);
    m[reset][reset] = w(S3, S3);
    m[reset][anti] = w(S3, S4);
    m[anti][anti] = absorb;
    m
}

fn boundary_vector<T: Copy + Default>(q: usize, vals: [T; 4]) -> Vec<T> {
    let mut v = vec![T::default(); q + 2];
    v[0] = vals[0];
    v[1] = vals[1];
    v[q] = vals[2];
    v[q + 1] = vals[3];
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderChain {
    pub q: usize,
    pub q_q: DMatrix<f64>,
    /// Initial distribution (mu1, mu2, 0, ..., 0, mu3, mu4).
    pub v: DVector<f64>,
    /// Selects the terminated state.
    pub u: DVector<f64>,
    /// Counting matrix of the uniform memoryless case.
    pub a_q: Vec<Vec<u128>>,
    /// Counting start vector (1, 1, 0, ..., 0, 1, 1).
    pub b: Vec<u128>,
}

pub fn decoder_chain(chain: &SbStateChain, q: usize) -> Result<DecoderChain> {
    check_q(q)?;
    let n = q + 2;
    let rows = decoder_matrix(q, |a, b| chain.entry(a, b), 1.0);
    let q_q = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let v = DVector::from_vec(boundary_vector(q, chain.mu));
    let mut u = DVector::zeros(n);
    u[0] = 1.0;
    Ok(DecoderChain {
        q,
        q_q,
        v,
        u,
        a_q: decoder_matrix(q, |_, _| 1u128, 4),
        b: boundary_vector(q, [1u128; 4]),
    })
}

fn matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// v Q_q^steps u^T by repeated vector-matrix products.
fn absorbed_after(dc: &DecoderChain, steps: usize) -> f64 {
    let mut row = dc.v.transpose();
    for _ in 0..steps {
        row = &row * &dc.q_q;
    }
    (row * &dc.u)[(0, 0)]
}

/// Probability that `c` consecutive sub-blocks form a pseudo-termination.
pub fn pseudo_termination_prob(dc: &DecoderChain, c: usize) -> Result<f64> {
    if c == 0 {
        return Err(Error::InvalidParameter("sequence length must be >= 1".into()));
    }
    Ok(absorbed_after(dc, c - 1))
}

/// Number of pseudo-termination sequences of length `c` out of 4^c.
pub fn count_sequences(c: usize, q: usize) -> Result<u128> {
    check_q(q)?;
    if c == 0 {
        return Err(Error::InvalidParameter("sequence length must be >= 1".into()));
    }
    let overflow = || Error::InvalidParameter(format!("count overflows for c = {c}"));
    let a = decoder_matrix(q, |_, _| 1u128, 4);
    let mut row = boundary_vector(q, [1u128; 4]);
    for _ in 1..c {
        let mut next = vec![0u128; q + 2];
        for (i, &ri) in row.iter().enumerate() {
            for (j, &aij) in a[i].iter().enumerate() {
                let term = ri.checked_mul(aij).ok_or_else(overflow)?;
                next[j] = next[j].checked_add(term).ok_or_else(overflow)?;
            }
        }
        row = next;
    }
    Ok(row[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Lower bound on success with all `d` helpers on one side. Helpers on the
/// right follow the forward chain, helpers on the left the reversed one.
pub fn one_sided_success(dc: &DecoderChain, dc_rev: &DecoderChain, d: usize, side: Side) -> f64 {
    match side {
        Side::Right => absorbed_after(dc, d),
        Side::Left => absorbed_after(dc_rev, d),
    }
}

/// Lower bound on success with `d/2` helpers on each side: the pair chain
/// Q_q^(d/2) (x) Q^_q^(d/2) started on the diagonal, succeeding when either
/// coordinate is terminated.
pub fn two_sided_success(dc: &DecoderChain, dc_rev: &DecoderChain, d: usize) -> Result<f64> {
    if d % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "two-sided decoding needs an even number of helpers, got {d}"
        )));
    }
    if dc.q != dc_rev.q {
        return Err(Error::DimensionMismatch(format!(
            "decoder chains differ in q ({} vs {})",
            dc.q, dc_rev.q
        )));
    }
    let n = dc.q + 2;
    let h = d / 2;
    let pair = matrix_power(&dc.q_q, h).kronecker(&matrix_power(&dc_rev.q_q, h));
    let mut v2 = DVector::zeros(n * n);
    let mut u2 = DVector::zeros(n * n);
    for i in 0..n {
        v2[i * n + i] = dc.v[i];
        for j in 0..n {
            if i == 0 || j == 0 {
                u2[i * n + j] = 1.0;
            }
        }
    }
    Ok((v2.transpose() * pair * u2)[(0, 0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SidedMode {
    OneSided,
    TwoSided,
}

/// Success bound for a two-state Gilbert-Elliot channel with uniform stationary
/// law whose good state is error reducing and bad state anti-terminating.
pub fn anti_termination_closed_form(alpha: f64, q: usize, d: usize, mode: SidedMode) -> f64 {
    let run = alpha.powi(q as i32 - 1);
    match mode {
        SidedMode::OneSided if d + 1 >= q => 0.5 * run,
        SidedMode::TwoSided if d / 2 + 1 >= q => 0.5 * (2.0 * run - run * run),
        _ => 0.0,
    }
}

/// Everything needed to evaluate the success bounds of one design on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSetup {
    pub thresholds: SbThresholds,
    pub q_values: Vec<QValue>,
    pub map: SbStateMap,
    pub chain: SbStateChain,
    pub forward: DecoderChain,
    pub reverse: DecoderChain,
}

impl MarkovSetup {
    pub fn new(sb: &SubBlockProto, model: &ChannelModel, cfg: &DeConfig) -> Result<Self> {
        let dir = Direction::LeftHelper;
        let thresholds = sb_thresholds(sb, dir, cfg)?;
        let q_values = q_values_for(model, sb, dir, cfg)?;
        Self::from_parts(model, thresholds, q_values)
    }

    pub fn from_parts(model: &ChannelModel, thresholds: SbThresholds, q_values: Vec<QValue>) -> Result<Self> {
        let map = sb_state_map(model, &thresholds, &q_values)?;
        let chain = sb_state_chain(model, &map);
        let forward = decoder_chain(&chain, map.q)?;
        let reverse = decoder_chain(&chain.reversed(), map.q)?;
        Ok(Self {
            thresholds,
            q_values,
            map,
            chain,
            forward,
            reverse,
        })
    }

    pub fn one_sided(&self, d: usize, side: Side) -> f64 {
        one_sided_success(&self.forward, &self.reverse, d, side)
    }

    pub fn two_sided(&self, d: usize) -> Result<f64> {
        two_sided_success(&self.forward, &self.reverse, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn thresholds_361() -> SbThresholds {
        SbThresholds {
            eps1: 0.2,
            eps2: 0.3719,
            eps3: 0.4297,
            eps4: 0.5688,
            eps_lr: 0.4294,
            direction: Direction::LeftHelper,
        }
    }

    fn example_ge(alpha: f64) -> MarkovSetup {
        let model = ChannelModel::gilbert_elliot([0.33, 0.42], alpha).unwrap();
        MarkovSetup::from_parts(&model, thresholds_361(), vec![QValue::Finite(3), QValue::Infinite]).unwrap()
    }

    #[test]
    fn stationary_examples() {
        let ge = ChannelModel::gilbert_elliot([0.1, 0.2], 0.9).unwrap();
        assert_abs_diff_eq!(ge.nu()[0], 0.5, epsilon = 1e-12);
        let iid = ChannelModel::iid(vec![0.1, 0.2, 0.3], vec![0.2, 0.3, 0.5]).unwrap();
        for (a, b) in iid.nu().iter().zip([0.2, 0.3, 0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        // Reducible chain: two closed classes.
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(stationary(&p).is_err());
        // Periodic chain still has a unique law.
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(stationary(&p).unwrap()[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn channel_document_forms() {
        let doc: ChannelDocument = serde_json::from_str(r#"{"states":[0.3,0.5],"alpha":0.8}"#).unwrap();
        assert_abs_diff_eq!(doc.into_model().unwrap().p()[(0, 1)], 0.2, epsilon = 1e-15);
        let doc: ChannelDocument = serde_json::from_str(r#"{"states":[0.3,0.5],"alpha":0.8,"iid":[0.5,0.5]}"#).unwrap();
        assert!(doc.into_model().is_err());
        let doc: ChannelDocument = serde_json::from_str(r#"{"states":[0.5,0.3],"p":[[1,0],[0,1]]}"#).unwrap();
        assert!(doc.into_model().is_err());
    }

    #[test]
    fn state_map_and_chain_for_gilbert_elliot() {
        let s = example_ge(0.9);
        assert_eq!(s.map.a_sets, [vec![], vec![0], vec![1], vec![]]);
        assert_eq!(s.map.q, 3);
        assert_eq!(s.chain.mu, [0.0, 0.5, 0.5, 0.0]);
        let expect = [[1.0, 0.0, 0.0, 0.0], [0.0, 0.9, 0.1, 0.0], [0.0, 0.1, 0.9, 0.0], [0.0, 0.0, 0.0, 1.0]];
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(s.chain.q_matrix[i][j], expect[i][j], epsilon = 1e-12);
            }
        }
        // Last reducing row (q-1 = 2): (Q21+Q22, 0, 0, Q23, Q24).
        let row: Vec<f64> = s.forward.q_q.row(2).iter().copied().collect();
        for (a, b) in row.iter().zip([0.9, 0.0, 0.0, 0.1, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn infinite_q_in_reducing_state_is_rejected() {
        let model = ChannelModel::gilbert_elliot([0.33, 0.42], 0.9).unwrap();
        let err = sb_state_map(&model, &thresholds_361(), &[QValue::Infinite, QValue::Infinite]);
        assert!(matches!(err, Err(Error::InfiniteQ { .. })));
    }

    #[test]
    fn boundary_rate_goes_to_worse_state() {
        let th = thresholds_361();
        assert_eq!(SbState::classify(0.2, &th), SbState::S2);
        assert_eq!(SbState::classify(0.4297, &th), SbState::S4);
        assert_eq!(SbState::classify(1.0, &th), SbState::S4);
    }

    #[test]
    fn counting_example() {
        assert_eq!(count_sequences(3, 2).unwrap(), 32);
        assert_eq!(count_sequences(1, 2).unwrap(), 1);
        let dc = decoder_chain(&sb_state_chain(&ChannelModel::iid(vec![0.1, 0.3, 0.4, 0.6], vec![0.25; 4]).unwrap(), &SbStateMap {
            a_sets: [vec![0], vec![1], vec![2], vec![3]],
            q: 2,
        }), 2)
        .unwrap();
        assert_eq!(dc.a_q, vec![vec![4, 0, 0, 0], vec![2, 0, 1, 1], vec![1, 1, 1, 1], vec![0, 0, 0, 4]]);
        assert_abs_diff_eq!(pseudo_termination_prob(&dc, 3).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn automaton_examples() {
        use SbState::*;
        assert!(classify_sequence(&[S2, S3, S1], 2).unwrap().member);
        assert!(!classify_sequence(&[S3, S2, S3], 2).unwrap().member);
        assert!(classify_sequence(&[S3, S2, S2], 2).unwrap().member);
        assert!(!classify_sequence(&[S3, S2, S2], 3).unwrap().member);
        assert!(classify_sequence(&[S1, S4, S4], 2).unwrap().member);
        assert!(classify_sequence(&[], 2).is_err());
        assert!(classify_sequence(&[S1], 1).is_err());
    }

    #[test]
    fn gilbert_elliot_success_points() {
        let s = example_ge(0.9);
        assert_abs_diff_eq!(s.one_sided(2, Side::Right), 0.405, epsilon = 1e-12);
        assert_abs_diff_eq!(s.one_sided(2, Side::Left), 0.405, epsilon = 1e-12);
        assert_abs_diff_eq!(s.two_sided(0).unwrap(), 0.0, epsilon = 1e-15);
        assert!(s.two_sided(3).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_abs_diff_eq!(anti_termination_closed_form(0.9, 2, 2, SidedMode::TwoSided), 0.495, epsilon = 1e-12);
        assert_abs_diff_eq!(anti_termination_closed_form(0.9, 7, 12, SidedMode::TwoSided), 0.390226, epsilon = 1e-6);
        assert_eq!(anti_termination_closed_form(0.9, 7, 10, SidedMode::TwoSided), 0.0);
        assert_eq!(anti_termination_closed_form(0.9, 3, 1, SidedMode::OneSided), 0.0);
        assert_abs_diff_eq!(anti_termination_closed_form(0.9, 3, 2, SidedMode::OneSided), 0.405, epsilon = 1e-12);
    }
}
