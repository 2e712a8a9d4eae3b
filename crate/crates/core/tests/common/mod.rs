#![allow(dead_code)]

use gkz_core::paths::{CycleSpec, CycleTerm, Path1D};
use gkz_core::periods::{FunctionKind, PeriodFunction};
use gkz_core::scenario::{FactorKind, FactorSupport, Monomial, ScenarioSpec};
use num_complex::Complex64;

pub type C = Complex64;

pub fn c(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn factor(kind: FactorKind, terms: &[(&[u32], C)]) -> FactorSupport {
    FactorSupport::new(
        kind,
        terms.iter().map(|(e, _)| Monomial::new(e.to_vec())).collect(),
        terms.iter().map(|t| t.1).collect(),
    )
}

pub fn spec(m: usize, factors: Vec<FactorSupport>, twist: &[f64]) -> ScenarioSpec {
    ScenarioSpec::new(m, factors, twist.iter().map(|&b| c(b)).collect(), vec![None; m]).unwrap()
}

pub fn period(s: ScenarioSpec, terms: Vec<CycleTerm>) -> PeriodFunction {
    PeriodFunction::new(s, FunctionKind::Period(CycleSpec { terms })).unwrap()
}

pub fn single(s: ScenarioSpec, path: Path1D) -> PeriodFunction {
    PeriodFunction::new(s, FunctionKind::Period(CycleSpec::single(path))).unwrap()
}

pub fn term(multiplicity: C, paths: Vec<Path1D>) -> CycleTerm {
    CycleTerm { multiplicity, paths }
}

/// (x1 − 1)^(1/3) (4 − x1)^(1/5) with β = 1/2, the two-root segment scenario.
pub fn gauss_spec() -> ScenarioSpec {
    spec(
        1,
        vec![
            factor(FactorKind::Power(c(1.0 / 3.0)), &[(&[0], c(-1.0)), (&[1], c(1.0))]),
            factor(FactorKind::Power(c(0.2)), &[(&[0], c(4.0)), (&[1], c(-1.0))]),
        ],
        &[0.5],
    )
}
