//! Exponent matrix of a scenario and the integer lattice of relations among
//! its columns.
//!
//! Columns are coefficient positions `(i, j)` in canonical order. Rows are the
//! indicator rows of the non-exponential factors followed by one exponent row
//! per coordinate. Kernel vectors `u` index the box operators
//! `∂^{u⁺} − ∂^{u⁻}`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::scenario::{ColumnLabel, ScenarioSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowLabel {
    /// Indicator row of factor i (1-based).
    Indicator(usize),
    /// Exponent row of coordinate p (1-based).
    Exponent(usize),
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::Indicator(i) => write!(f, "indicator({})", i),
            RowLabel::Exponent(p) => write!(f, "exponent({})", p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentMatrix {
    pub rows: Vec<Vec<i64>>,
    pub row_labels: Vec<RowLabel>,
    pub column_labels: Vec<ColumnLabel>,
}

impl ExponentMatrix {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_count(&self) -> usize {
        self.column_labels.len()
    }

    pub fn apply(&self, u: &[i64]) -> Vec<i64> {
        self.rows.iter().map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
    }

    /// Rank over the rationals, computed exactly with the same integer
    /// elimination used for the kernel.
    pub fn rank(&self) -> usize {
        echelon(&self.rows, self.column_count()).0
    }
}

pub fn build_exponent_matrix(scenario: &ScenarioSpec) -> ExponentMatrix {
    let column_labels = scenario.column_labels();
    let mut rows = Vec::new();
    let mut row_labels = Vec::new();
    for (i, factor) in scenario.factors().iter().enumerate() {
        if factor.kind.is_exp() {
            continue;
        }
        rows.push(column_labels.iter().map(|col| i64::from(col.factor == i + 1)).collect());
        row_labels.push(RowLabel::Indicator(i + 1));
    }
    for p in 0..scenario.m() {
        rows.push(column_labels.iter().map(|col| i64::from(col.exponents[p])).collect());
        row_labels.push(RowLabel::Exponent(p + 1));
    }
    ExponentMatrix { rows, row_labels, column_labels }
}

/// A basis of the integer kernel `{u ∈ ℤ^N : A·u = 0}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBasis {
    pub vectors: Vec<Vec<i64>>,
    pub rank: usize,
}

/// Kernel vector split into positive and negative parts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BoxVector {
    pub u: Vec<i64>,
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
}

impl BoxVector {
    pub fn new(u: Vec<i64>) -> Self {
        let plus = u.iter().map(|&x| if x > 0 { x as u32 } else { 0 }).collect();
        let minus = u.iter().map(|&x| if x < 0 { (-x) as u32 } else { 0 }).collect();
        BoxVector { u, plus, minus }
    }

    /// |u⁺|₁.
    pub fn order(&self) -> u32 {
        self.plus.iter().sum()
    }

    /// |u⁻|₁.
    pub fn minus_order(&self) -> u32 {
        self.minus.iter().sum()
    }
}

/// Output of [`enumerate_box_vectors`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxEnumeration {
    pub vectors: Vec<BoxVector>,
    pub warnings: Vec<String>,
}

/// Row-reduces `rows` (each of length `width`) with unimodular integer row
/// operations. Returns the rank and the reduced rows.
fn echelon(rows: &[Vec<i64>], width: usize) -> (usize, Vec<Vec<i128>>) {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| i128::from(x)).collect()).collect();
    let mut pivot_row = 0;
    for col in 0..width {
        if pivot_row == m.len() {
            break;
        }
        if reduce_column(&mut m, pivot_row, col) {
            pivot_row += 1;
        }
    }
    (pivot_row, m)
}

/// Euclidean elimination on column `col` among rows `start..`. Afterwards
/// only row `start` may be nonzero in that column. Returns whether a pivot
/// exists. Operations act on whole rows.
fn reduce_column(m: &mut [Vec<i128>], start: usize, col: usize) -> bool {
    loop {
        let pivot = (start..m.len()).filter(|&r| m[r][col] != 0).min_by_key(|&r| (m[r][col].abs(), r));
        let Some(pivot) = pivot else {
            return false;
        };
        m.swap(start, pivot);
        let p = m[start][col];
        let mut done = true;
        for r in start + 1..m.len() {
            let x = m[r][col];
            if x == 0 {
                continue;
            }
            let q = x.div_euclid(p);
            let pivot_row = m[start].clone();
            for (dst, src) in m[r].iter_mut().zip(&pivot_row) {
                *dst = dst.checked_sub(q * src).expect("integer overflow in lattice reduction");
            }
            if m[r][col] != 0 {
                done = false;
            }
        }
        if done {
            if m[start][col] < 0 {
                for x in m[start].iter_mut() {
                    *x = -*x;
                }
            }
            return true;
        }
    }
}

fn sign_normalize(u: &mut [i64]) {
    if let Some(&first) = u.iter().find(|&&x| x != 0) {
        if first < 0 {
            for x in u.iter_mut() {
                *x = -*x;
            }
        }
    }
}

fn dot(a: &[i128], b: &[i128]) -> i128 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pairwise size reduction: subtract rounded multiples of other vectors while
/// the squared norm strictly decreases. Unimodular, so saturation is kept.
fn size_reduce(vectors: &mut [Vec<i128>]) {
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..vectors.len() {
            for j in 0..vectors.len() {
                if i == j {
                    continue;
                }
                let nj = dot(&vectors[j], &vectors[j]);
                if nj == 0 {
                    continue;
                }
                let ij = dot(&vectors[i], &vectors[j]);
                // nearest integer to ij / nj
                let q = (2 * ij + nj).div_euclid(2 * nj);
                if q == 0 {
                    continue;
                }
                let candidate: Vec<i128> = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a - q * b).collect();
                if dot(&candidate, &candidate) < dot(&vectors[i], &vectors[i]) {
                    vectors[i] = candidate;
                    changed = true;
                }
            }
        }
    }
}

/// Exact integer kernel via Hermite-style reduction of `[Aᵀ | I]`. The rows of
/// the identity block that end up against a zero `Aᵀ` block form a saturated
/// basis because the transformation is unimodular.
pub fn integer_kernel_basis(a: &ExponentMatrix) -> LatticeBasis {
    let n = a.column_count();
    let d = a.row_count();
    let mut aug: Vec<Vec<i64>> = Vec::with_capacity(n);
    for col in 0..n {
        let mut row = Vec::with_capacity(d + n);
        row.extend(a.rows.iter().map(|r| r[col]));
        row.extend((0..n).map(|k| i64::from(k == col)));
        aug.push(row);
    }
    let (rank, reduced) = echelon(&aug, d);
    let mut vectors: Vec<Vec<i128>> = reduced[rank..].iter().map(|r| r[d..].to_vec()).collect();
    size_reduce(&mut vectors);
    let mut out: Vec<Vec<i64>> = vectors
        .into_iter()
        .map(|v| {
            let mut v: Vec<i64> = v.into_iter().map(|x| i64::try_from(x).expect("kernel entry exceeds i64")).collect();
            sign_normalize(&mut v);
            v
        })
        .collect();
    out.sort_by_key(|v| (v.iter().map(|x| x.abs()).sum::<i64>(), core::cmp::Reverse(v.clone())));
    LatticeBasis { rank: out.len(), vectors: out }
}

/// Upper bound on the size of the coefficient search box.
const MAX_COMBINATIONS: u64 = 1_000_000;

/// Kernel vectors with `|u⁺|₁ ≤ bound` and `|u⁻|₁ ≤ bound` found among
/// integer combinations of the basis with coefficients in `[-bound, bound]`
/// (the box shrinks when the kernel rank would make it exceed a million
/// combinations). Basis vectors are always emitted.
pub fn enumerate_box_vectors(basis: &LatticeBasis, degree_bound: u32) -> BoxEnumeration {
    let mut warnings = Vec::new();
    let mut found: BTreeSet<Vec<i64>> = BTreeSet::new();
    let r = basis.vectors.len();
    if r == 0 {
        return BoxEnumeration { vectors: Vec::new(), warnings };
    }
    let bound = degree_bound.max(1);
    if degree_bound == 0 {
        warnings.push("degree bound 0 raised to 1".into());
    }
    for v in &basis.vectors {
        let bv = BoxVector::new(v.clone());
        if bv.order() > bound || bv.minus_order() > bound {
            warnings.push(format!(
                "basis vector {:?} has order {} above the degree bound {}",
                v,
                bv.order().max(bv.minus_order()),
                bound
            ));
        }
        found.insert(v.clone());
    }

    let mut range = i64::from(bound);
    while range > 1 && (2 * range as u64 + 1).saturating_pow(r as u32) > MAX_COMBINATIONS {
        range -= 1;
    }
    if range < i64::from(bound) {
        warnings.push(format!("coefficient search box reduced to [-{}, {}]", range, range));
    }

    let n = basis.vectors[0].len();
    let mut coeffs = vec![-range; r];
    loop {
        let mut u = vec![0i64; n];
        for (c, v) in coeffs.iter().zip(&basis.vectors) {
            if *c != 0 {
                for (dst, x) in u.iter_mut().zip(v) {
                    *dst += c * x;
                }
            }
        }
        if u.iter().any(|&x| x != 0) {
            let plus: i64 = u.iter().filter(|&&x| x > 0).sum();
            let minus: i64 = -u.iter().filter(|&&x| x < 0).sum::<i64>();
            if plus <= i64::from(bound) && minus <= i64::from(bound) {
                sign_normalize(&mut u);
                found.insert(u);
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == r {
                let mut vectors: Vec<BoxVector> = found.into_iter().map(BoxVector::new).collect();
                vectors.sort_by(|a, b| {
                    let ka = a.order().max(a.minus_order());
                    let kb = b.order().max(b.minus_order());
                    ka.cmp(&kb).then_with(|| b.u.cmp(&a.u))
                });
                return BoxEnumeration { vectors, warnings };
            }
            coeffs[k] += 1;
            if coeffs[k] > range {
                coeffs[k] = -range;
                k += 1;
            } else {
                break;
            }
        }
    }
}
