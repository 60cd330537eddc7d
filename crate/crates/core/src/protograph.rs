//! Protomatrices, SC-LDPCL sub-blocks, coupling and symmetry.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{constraint, Constraint, Error, Result};

/// Largest coupling-check count accepted by the general symmetry search.
pub const MAX_SYMMETRY_SEARCH_T: usize = 8;

/// Bi-adjacency matrix of a protograph; entries are edge multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct Protomatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl Protomatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "protomatrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        Self::with_shape(rows, cols, data)
    }

    // Zero-row matrices are only used for the coupling part of t = 0 sub-blocks.
    fn with_shape(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0; rows * cols])
    }

    pub fn all_ones(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![1; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|&v| v as usize).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let mut sums = vec![0usize; self.cols];
        for i in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(i)) {
                *s += v as usize;
            }
        }
        sums
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v <= 1)
    }

    /// Stacks matrices vertically; all parts must share a column count.
    pub fn vstack(parts: &[&Protomatrix]) -> Result<Self> {
        let cols = parts.first().map_or(0, |p| p.cols);
        if parts.iter().any(|p| p.cols != cols) {
            return Err(Error::DimensionMismatch(
                "vstack parts differ in column count".into(),
            ));
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        let data = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
        Self::new(rows, cols, data)
    }

    /// Copies `block` into this matrix with its top-left corner at (`row`, `col`).
    fn place(&mut self, row: usize, col: usize, block: &Protomatrix) {
        for i in 0..block.rows {
            let start = (row + i) * self.cols + col;
            self.data[start..start + block.cols].copy_from_slice(block.row(i));
        }
    }
}

impl TryFrom<Vec<Vec<u8>>> for Protomatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<Protomatrix> for Vec<Vec<u8>> {
    fn from(m: Protomatrix) -> Self {
        m.to_rows()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeProfile {
    pub d_c: Vec<usize>,
    pub d_v: Vec<usize>,
}

pub fn degree_profile(a: &Protomatrix) -> DegreeProfile {
    DegreeProfile {
        d_c: a.row_sums(),
        d_v: a.col_sums(),
    }
}

/// Gale-Ryser test: does a binary matrix with these row and column sums exist?
pub fn is_realizable_binary(dp: &DegreeProfile) -> bool {
    let (a, b) = (dp.d_c.len(), dp.d_v.len());
    if dp.d_c.iter().any(|&d| d > b) || dp.d_v.iter().any(|&d| d > a) {
        return false;
    }
    if dp.d_c.iter().sum::<usize>() != dp.d_v.iter().sum::<usize>() {
        return false;
    }
    let mut rows = dp.d_c.clone();
    rows.sort_unstable_by(|x, y| y.cmp(x));
    let mut partial = 0;
    for (k, &d) in rows.iter().enumerate() {
        partial += d;
        let cap: usize = dp.d_v.iter().map(|&v| v.min(k + 1)).sum();
        if partial > cap {
            return false;
        }
    }
    true
}

/// Sorted check degrees pair up to `b` and sorted variable degrees pair up to `a`.
pub fn is_symmetric_degree_profile(dp: &DegreeProfile, a: usize, b: usize) -> bool {
    fn pairs_to(v: &[usize], total: usize) -> bool {
        let mut s = v.to_vec();
        s.sort_unstable();
        (0..s.len()).all(|i| s[i] + s[s.len() - 1 - i] == total)
    }
    dp.d_c.len() == a && dp.d_v.len() == b && pairs_to(&dp.d_c, b) && pairs_to(&dp.d_v, a)
}

/// One sub-block of an SC-LDPCL chain: coupling rows to the left neighbour,
/// local rows, and coupling rows to the right neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubBlockProto {
    l: usize,
    r: usize,
    t: usize,
    b_left: Protomatrix,
    b_loc: Protomatrix,
    b_right: Protomatrix,
}

impl SubBlockProto {
    /// Validates every structural constraint; the first failure is reported.
    pub fn new(
        l: usize,
        r: usize,
        t: usize,
        b_left: Protomatrix,
        b_loc: Protomatrix,
        b_right: Protomatrix,
    ) -> Result<Self> {
        if r == 0 || l == 0 {
            return Err(constraint(Constraint::Shape, "l and r must be positive"));
        }
        if t > l {
            return Err(constraint(Constraint::Shape, format!("t={t} exceeds l={l}")));
        }
        for (name, m, rows) in [
            ("b_left", &b_left, t),
            ("b_loc", &b_loc, l - t),
            ("b_right", &b_right, t),
        ] {
            if m.rows() != rows || m.cols() != r {
                return Err(constraint(
                    Constraint::Shape,
                    format!(
                        "{name} is {}x{}, expected {rows}x{r}",
                        m.rows(),
                        m.cols()
                    ),
                ));
            }
        }
        for (name, m) in [("b_left", &b_left), ("b_loc", &b_loc), ("b_right", &b_right)] {
            if !m.is_binary() {
                return Err(constraint(
                    Constraint::Binary,
                    format!("{name} has an entry other than 0 or 1"),
                ));
            }
        }
        if l - t < 2 {
            return Err(constraint(
                Constraint::LocalRowCount,
                format!("l - t = {} but at least 2 local rows are required", l - t),
            ));
        }
        if let Some(i) = b_loc.row_sums().iter().position(|&d| d != r) {
            return Err(constraint(
                Constraint::LocalCheckDegrees,
                format!("local row {i} does not have degree {r}"),
            ));
        }
        if let Some(j) = b_loc.col_sums().iter().position(|&d| d != l - t) {
            return Err(constraint(
                Constraint::LocalVariableDegrees,
                format!("column {j} has local degree other than {}", l - t),
            ));
        }
        let (lc, rc) = (b_left.row_sums(), b_right.row_sums());
        if let Some(i) = (0..t).find(|&i| lc[i] + rc[i] != r) {
            return Err(constraint(
                Constraint::CouplingCheckDegrees,
                format!(
                    "coupling row {i}: left degree {} + right degree {} != {r}",
                    lc[i], rc[i]
                ),
            ));
        }
        let (lv, rv) = (b_left.col_sums(), b_right.col_sums());
        if let Some(j) = (0..r).find(|&j| lv[j] + rv[j] != t) {
            return Err(constraint(
                Constraint::CouplingVariableDegrees,
                format!(
                    "column {j}: left degree {} + right degree {} != {t}",
                    lv[j], rv[j]
                ),
            ));
        }
        for i in 0..t {
            if let Some(j) = (0..r).find(|&j| b_left.get(i, j) + b_right.get(i, j) != 1) {
                return Err(constraint(
                    Constraint::CouplingComplement,
                    format!("entry ({i},{j}) is covered by both or neither coupling matrix"),
                ));
            }
        }
        Ok(Self {
            l,
            r,
            t,
            b_left,
            b_loc,
            b_right,
        })
    }

    /// Builds the sub-block from its left coupling matrix alone.
    pub fn from_left(l: usize, r: usize, b_left: &Protomatrix) -> Result<Self> {
        let t = b_left.rows();
        if b_left.cols() != r {
            return Err(constraint(
                Constraint::Shape,
                format!("b_left has {} columns, expected {r}", b_left.cols()),
            ));
        }
        if t > l || l - t == 0 {
            return Err(constraint(
                Constraint::LocalRowCount,
                format!("t={t} leaves no local rows for l={l}"),
            ));
        }
        let b_right = complement(b_left);
        let b_loc = Protomatrix::all_ones(l - t, r)?;
        Self::new(l, r, t, b_left.clone(), b_loc, b_right)
    }

    /// The uncoupled sub-block: all `l` rows are local.
    pub fn uncoupled(l: usize, r: usize) -> Result<Self> {
        Self::from_left(l, r, &Protomatrix::empty(r))
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn b_left(&self) -> &Protomatrix {
        &self.b_left
    }

    pub fn b_loc(&self) -> &Protomatrix {
        &self.b_loc
    }

    pub fn b_right(&self) -> &Protomatrix {
        &self.b_right
    }

    /// Rows `[b_left; b_loc; b_right]`; left coupling rows are `0..t`,
    /// right coupling rows are `l..l+t`.
    pub fn full_matrix(&self) -> Protomatrix {
        Protomatrix::vstack(&[&self.b_left, &self.b_loc, &self.b_right])
            .expect("sub-block parts share a column count")
    }

    /// Short design label: t, check degrees of b_left, and the offset of the
    /// second coupling row (1-based) when t = 2.
    pub fn design_label(&self) -> DesignLabel {
        let j = match self.t {
            0 => None,
            1 => Some(1),
            _ => self.b_left.row(1).iter().position(|&v| v == 1).map(|p| p + 1),
        };
        DesignLabel {
            t: self.t,
            d_c: self.b_left.row_sums(),
            j,
        }
    }

    /// Columns shared by every coupling row of `b_left`; `None` for t = 0.
    pub fn coupling_overlap(&self) -> Option<usize> {
        if self.t == 0 {
            return None;
        }
        Some(
            (0..self.r)
                .filter(|&c| (0..self.t).all(|i| self.b_left.get(i, c) == 1))
                .count(),
        )
    }
}

fn complement(m: &Protomatrix) -> Protomatrix {
    Protomatrix {
        rows: m.rows,
        cols: m.cols,
        data: m.data.iter().map(|&v| 1 - v.min(1)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignLabel {
    pub t: usize,
    pub d_c: Vec<usize>,
    pub j: Option<usize>,
}

/// On-disk form of a sub-block; `b_loc` may be omitted (all-ones implied).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubBlockDocument {
    pub l: usize,
    pub r: usize,
    pub t: usize,
    pub b_left: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_loc: Option<Vec<Vec<u8>>>,
    pub b_right: Vec<Vec<u8>>,
}

impl SubBlockDocument {
    pub fn into_sub_block(self) -> Result<SubBlockProto> {
        let part = |name: &str, rows: &[Vec<u8>]| -> Result<Protomatrix> {
            if rows.is_empty() {
                return Ok(Protomatrix::empty(self.r));
            }
            Protomatrix::from_rows(rows).map_err(|e| constraint(Constraint::Shape, format!("{name}: {e}")))
        };
        let b_left = part("b_left", &self.b_left)?;
        let b_right = part("b_right", &self.b_right)?;
        let b_loc = match &self.b_loc {
            Some(rows) => part("b_loc", rows)?,
            None => {
                if self.t >= self.l {
                    return Err(constraint(
                        Constraint::LocalRowCount,
                        format!("t={} leaves no local rows for l={}", self.t, self.l),
                    ));
                }
                Protomatrix::all_ones(self.l - self.t, self.r)?
            }
        };
        SubBlockProto::new(self.l, self.r, self.t, b_left, b_loc, b_right)
    }
}

impl From<&SubBlockProto> for SubBlockDocument {
    fn from(sb: &SubBlockProto) -> Self {
        Self {
            l: sb.l,
            r: sb.r,
            t: sb.t,
            b_left: sb.b_left.to_rows(),
            b_loc: Some(sb.b_loc.to_rows()),
            b_right: sb.b_right.to_rows(),
        }
    }
}

/// Uniform staircase edge spreading: row i (1-based) of b_left covers
/// columns 1..=i*floor(r/(t+1)).
pub fn cutting_vector_sb(l: usize, r: usize, t: usize) -> Result<SubBlockProto> {
    if t < 1 || t + 2 > l {
        return Err(Error::InvalidParameter(format!(
            "cutting vector needs 1 <= t <= l-2, got l={l}, t={t}"
        )));
    }
    if r < t + 1 {
        return Err(Error::InvalidParameter(format!(
            "cutting vector needs r >= t+1, got r={r}, t={t}"
        )));
    }
    let w = r / (t + 1);
    let data = (1..=t)
        .flat_map(|i| (1..=r).map(move |j| u8::from(j <= i * w)))
        .collect();
    SubBlockProto::from_left(l, r, &Protomatrix::new(t, r, data)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledChain {
    pub sb: SubBlockProto,
    pub m: usize,
    pub matrix: Protomatrix,
}

/// Places `m` copies of the sub-block along the diagonal with unit memory.
/// Sub-block k occupies columns k*r..(k+1)*r and rows k*l..k*l+l+t.
pub fn couple(sb: &SubBlockProto, m: usize) -> Result<CoupledChain> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "coupling needs at least 2 sub-blocks, got {m}"
        )));
    }
    let (l, r, t) = (sb.l, sb.r, sb.t);
    let mut matrix = Protomatrix::zeros(m * l + t, m * r)?;
    let block = sb.full_matrix();
    for k in 0..m {
        matrix.place(k * l, k * r, &block);
    }
    Ok(CoupledChain {
        sb: sb.clone(),
        m,
        matrix,
    })
}

/// Row and column permutations taking b_left to b_right:
/// `b_left[row_perm[i]][col_perm[j]] == b_right[i][j]`. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationWitness {
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
}

impl PermutationWitness {
    pub fn apply(&self, m: &Protomatrix) -> Protomatrix {
        let data = self
            .row_perm
            .iter()
            .flat_map(|&i| self.col_perm.iter().map(move |&j| m.get(i, j)))
            .collect();
        Protomatrix::with_shape(self.row_perm.len(), self.col_perm.len(), data)
            .expect("permutation shape matches")
    }

    pub fn verify(&self, sb: &SubBlockProto) -> bool {
        is_permutation(&self.row_perm, sb.t)
            && is_permutation(&self.col_perm, sb.r)
            && self.apply(&sb.b_left) == sb.b_right
    }
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n
        && p.iter()
            .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

/// Returns a witness iff b_right is a row/column permutation of b_left.
///
/// For t <= 2 symmetry is decided from the degree profile of b_left and the
/// witness is constructed directly; larger t uses a backtracking search.
pub fn is_symmetric_sb(sb: &SubBlockProto) -> Result<Option<PermutationWitness>> {
    let witness = match sb.t {
        0..=2 => constructive_witness(sb),
        t if t <= MAX_SYMMETRY_SEARCH_T => search_witness(sb),
        t => {
            return Err(Error::Unsupported(format!(
                "symmetry search is limited to t <= {MAX_SYMMETRY_SEARCH_T}, got t={t}"
            )))
        }
    };
    Ok(witness.filter(|w| w.verify(sb)))
}

fn constructive_witness(sb: &SubBlockProto) -> Option<PermutationWitness> {
    let (t, r) = (sb.t, sb.r);
    if !is_symmetric_degree_profile(&degree_profile(&sb.b_left), t, r) {
        return None;
    }
    let mut col_perm: Vec<usize> = (0..r).collect();
    match t {
        0 => {}
        1 => {
            // Ones and zeros are equinumerous; swap them pairwise.
            let row = sb.b_left.row(0);
            let ones = (0..r).filter(|&j| row[j] == 1);
            let zeros = (0..r).filter(|&j| row[j] == 0);
            for (a, b) in ones.zip(zeros) {
                col_perm[a] = b;
                col_perm[b] = a;
            }
        }
        _ => {
            // Rows swap; all-ones columns trade places with all-zeros columns.
            let sums = sb.b_left.col_sums();
            let full = (0..r).filter(|&j| sums[j] == 2);
            let empty = (0..r).filter(|&j| sums[j] == 0);
            for (a, b) in full.zip(empty) {
                col_perm[a] = b;
                col_perm[b] = a;
            }
        }
    }
    Some(PermutationWitness {
        row_perm: (0..t).rev().collect(),
        col_perm,
    })
}

fn column_patterns(m: &Protomatrix, row_order: &[usize]) -> Vec<u64> {
    (0..m.cols())
        .map(|j| {
            row_order
                .iter()
                .enumerate()
                .fold(0u64, |acc, (k, &i)| acc | (u64::from(m.get(i, j)) << k))
        })
        .collect()
}

fn sorted_prefix_patterns(m: &Protomatrix, row_order: &[usize]) -> Vec<u64> {
    let mut p = column_patterns(m, row_order);
    p.sort_unstable();
    p
}

fn search_witness(sb: &SubBlockProto) -> Option<PermutationWitness> {
    let t = sb.t;
    let left_deg = sb.b_left.row_sums();
    let right_deg = sb.b_right.row_sums();
    let identity: Vec<usize> = (0..t).collect();

    fn extend(
        sb: &SubBlockProto,
        perm: &mut Vec<usize>,
        used: &mut [bool],
        left_deg: &[usize],
        right_deg: &[usize],
        identity: &[usize],
    ) -> bool {
        let k = perm.len();
        if k == sb.t {
            return true;
        }
        for cand in 0..sb.t {
            if used[cand] || left_deg[cand] != right_deg[k] {
                continue;
            }
            perm.push(cand);
            let ok = sorted_prefix_patterns(&sb.b_left, perm)
                == sorted_prefix_patterns(&sb.b_right, &identity[..=k]);
            if ok {
                used[cand] = true;
                if extend(sb, perm, used, left_deg, right_deg, identity) {
                    return true;
                }
                used[cand] = false;
            }
            perm.pop();
        }
        false
    }

    let mut perm = Vec::with_capacity(t);
    let mut used = vec![false; t];
    if !extend(sb, &mut perm, &mut used, &left_deg, &right_deg, &identity) {
        return None;
    }
    // Match each b_right column to an unused b_left column with the same pattern.
    let src = column_patterns(&sb.b_left, &perm);
    let dst = column_patterns(&sb.b_right, &identity);
    let mut taken = vec![false; sb.r];
    let mut col_perm = Vec::with_capacity(sb.r);
    for &pat in &dst {
        let j = (0..sb.r).find(|&j| !taken[j] && src[j] == pat)?;
        taken[j] = true;
        col_perm.push(j);
    }
    Some(PermutationWitness {
        row_perm: perm,
        col_perm,
    })
}

/// Canonical key of a coupling matrix under simultaneous row and column
/// permutations: the lexicographically smallest sorted column-pattern list.
fn equivalence_key(m: &Protomatrix) -> Vec<u64> {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    perms(m.rows())
        .iter()
        .map(|p| sorted_prefix_patterns(m, p))
        .min()
        .unwrap_or_default()
}

/// The enumerated symmetric design carrying `label`, if any.
pub fn find_design(l: usize, r: usize, label: &DesignLabel) -> Result<Option<SubBlockProto>> {
    Ok(enumerate_symmetric_designs(l, r, label.t)?
        .into_iter()
        .find(|sb| sb.design_label() == *label))
}

/// All non-equivalent symmetric edge-spreading designs with `t <= 2` coupling
/// checks, in the order (d_C1 ascending, offset ascending).
pub fn enumerate_symmetric_designs(l: usize, r: usize, t: usize) -> Result<Vec<SubBlockProto>> {
    if t > 2 {
        return Err(Error::InvalidParameter(format!(
            "design enumeration supports t <= 2, got {t}"
        )));
    }
    if l < t + 2 || r == 0 {
        return Ok(Vec::new());
    }
    let candidates: Vec<Protomatrix> = match t {
        0 => vec![Protomatrix::empty(r)],
        1 if r % 2 == 0 => {
            let row = (0..r).map(|j| u8::from(j < r / 2)).collect();
            vec![Protomatrix::new(1, r, row)?]
        }
        1 => vec![],
        _ => {
            let mut out = Vec::new();
            for d1 in 1..=r / 2 {
                let d2 = r - d1;
                for offset in 0..=(r - d2) {
                    let mut data = vec![0u8; 2 * r];
                    data[..d1].fill(1);
                    data[r + offset..r + offset + d2].fill(1);
                    out.push(Protomatrix::new(2, r, data)?);
                }
            }
            out
        }
    };
    let mut seen = BTreeSet::new();
    let mut designs = Vec::new();
    for b_left in candidates {
        let sb = SubBlockProto::from_left(l, r, &b_left)?;
        if is_symmetric_sb(&sb)?.is_some() && seen.insert(equivalence_key(&b_left)) {
            designs.push(sb);
        }
    }
    Ok(designs)
}
