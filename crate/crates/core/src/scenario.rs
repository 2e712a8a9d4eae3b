//! Input data of a period problem: the polynomial map `f = (f_1, …, f_n)`
//! given by monomial supports and coefficients, the outer function attached
//! to each factor, and the monomial twist `x^(β-1) dx` of the form.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Exponent vector `j = (j_1, …, j_m)` of a monomial `x^j`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Outer function applied to one polynomial factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FactorKind {
    /// `f_i^λ`, quasi-homogeneous of degree λ.
    Power(Complex64),
    /// `exp(f_i)`; not quasi-homogeneous, so it contributes no indicator row.
    Exp,
    /// `log f_i`, the root-function construction.
    Log,
}

impl FactorKind {
    pub fn is_exp(&self) -> bool {
        matches!(self, FactorKind::Exp)
    }
}

/// One polynomial `f_i(x) = Σ_j a_ij x^j` together with its outer function.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSupport {
    pub kind: FactorKind,
    pub monomials: Vec<Monomial>,
    pub coefficients: Vec<Complex64>,
}

impl FactorSupport {
    pub fn new(kind: FactorKind, monomials: Vec<Monomial>, coefficients: Vec<Complex64>) -> Self {
        FactorSupport { kind, monomials, coefficients }
    }

    /// True when every monomial only involves coordinate `p`.
    pub fn is_univariate_in(&self, p: usize) -> bool {
        self.monomials.iter().all(|mono| mono.0.iter().enumerate().all(|(q, &e)| q == p || e == 0))
    }
}

/// Label of a coefficient column: factor index (1-based) and exponent vector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ColumnLabel {
    pub factor: usize,
    pub exponents: Vec<u32>,
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.factor)?;
        for e in &self.exponents {
            write!(f, ",{}", e)?;
        }
        write!(f, ")")
    }
}

/// A validated scenario with monomials stored in canonical (lexicographic) order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    m: usize,
    factors: Vec<FactorSupport>,
    twist: Vec<Complex64>,
    frozen: Vec<Option<Complex64>>,
}

impl ScenarioSpec {
    /// Validates and canonicalizes. `twist[p]` is β_p; `frozen[p]` fixes
    /// coordinate p to a numeric value (parametric roots).
    pub fn new(
        m: usize,
        factors: Vec<FactorSupport>,
        twist: Vec<Complex64>,
        frozen: Vec<Option<Complex64>>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidScenario("m must be at least 1".into()));
        }
        if factors.is_empty() {
            return Err(Error::InvalidScenario("at least one factor is required".into()));
        }
        if twist.len() != m {
            return Err(Error::InvalidScenario(format!("twist has {} entries, expected m = {}", twist.len(), m)));
        }
        if frozen.len() != m {
            return Err(Error::InvalidScenario(format!(
                "frozen list has {} entries, expected m = {}",
                frozen.len(),
                m
            )));
        }
        if twist.iter().any(|b| !b.re.is_finite() || !b.im.is_finite()) {
            return Err(Error::InvalidScenario("twist exponents must be finite".into()));
        }
        let mut canonical = Vec::with_capacity(factors.len());
        for (idx, factor) in factors.into_iter().enumerate() {
            let index = idx + 1;
            if factor.monomials.is_empty() {
                return Err(Error::EmptySupport { factor: index });
            }
            if factor.monomials.len() != factor.coefficients.len() {
                return Err(Error::InvalidScenario(format!(
                    "factor {} has {} monomials but {} coefficients",
                    index,
                    factor.monomials.len(),
                    factor.coefficients.len()
                )));
            }
            if let Some(bad) = factor.monomials.iter().find(|mono| mono.0.len() != m) {
                return Err(Error::InvalidScenario(format!(
                    "factor {} has a monomial with {} exponents, expected {}",
                    index,
                    bad.0.len(),
                    m
                )));
            }
            if factor.coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::InvalidScenario(format!("factor {} has a non-finite coefficient", index)));
            }
            if let FactorKind::Power(lambda) = factor.kind {
                if !lambda.re.is_finite() || !lambda.im.is_finite() {
                    return Err(Error::InvalidScenario(format!("factor {} has a non-finite exponent", index)));
                }
            }
            let mut pairs: Vec<(Monomial, Complex64)> = factor.monomials.into_iter().zip(factor.coefficients).collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateMonomial { factor: index });
            }
            let (monomials, coefficients) = pairs.into_iter().unzip();
            canonical.push(FactorSupport { kind: factor.kind, monomials, coefficients });
        }
        Ok(ScenarioSpec { m, factors: canonical, twist, frozen })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn factors(&self) -> &[FactorSupport] {
        &self.factors
    }

    pub fn twist(&self) -> &[Complex64] {
        &self.twist
    }

    pub fn frozen(&self) -> &[Option<Complex64>] {
        &self.frozen
    }

    pub fn is_frozen(&self, p: usize) -> bool {
        self.frozen[p].is_some()
    }

    /// Number of coefficient columns N.
    pub fn coefficient_count(&self) -> usize {
        self.factors.iter().map(|f| f.monomials.len()).sum()
    }

    /// Column labels in canonical order.
    pub fn column_labels(&self) -> Vec<ColumnLabel> {
        self.factors
            .iter()
            .enumerate()
            .flat_map(|(i, f)| {
                f.monomials.iter().map(move |mono| ColumnLabel { factor: i + 1, exponents: mono.0.clone() })
            })
            .collect()
    }

    /// All coefficients flattened in column order.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.factors.iter().flat_map(|f| f.coefficients.iter().copied()).collect()
    }

    /// Same supports and data with the coefficient vector replaced.
    pub fn with_coefficients(&self, a: &[Complex64]) -> Result<Self> {
        let n = self.coefficient_count();
        if a.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.len() });
        }
        let mut out = self.clone();
        let mut offset = 0;
        for factor in &mut out.factors {
            let len = factor.coefficients.len();
            factor.coefficients.copy_from_slice(&a[offset..offset + len]);
            offset += len;
        }
        Ok(out)
    }

    /// Returns a copy with factor kinds replaced (used for corrupted or
    /// re-labelled systems in tests).
    pub fn with_kind(&self, factor: usize, kind: FactorKind) -> Self {
        let mut out = self.clone();
        out.factors[factor].kind = kind;
        out
    }
}
