//! Functions of the coefficient vector: periods over cycles, roots tracked
//! by continuation, and univariate residue sums `Σ r^(β−1)/f′(r)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::paths::{CycleSpec, CycleTerm, Endpoint, Integrand, Path1D, PathSegment, ResolvedShape, SegmentShape};
use crate::poly;
use crate::quadrature::{integrate_cycle, resolve_term, IntegralResult, QuadratureSettings};
use crate::scenario::{FactorKind, ScenarioSpec};

/// A holomorphic function of N complex coefficients.
pub trait CoefficientFunction: Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, a: &[Complex64]) -> Result<Complex64>;

    /// Relative size of evaluation noise, used to judge near-zero residuals.
    fn noise_level(&self) -> f64 {
        1e-14
    }

    /// A version suited to repeated evaluation near `a`, e.g. with the
    /// discretization frozen so the result is smooth in the coefficients.
    fn localize(&self, _a: &[Complex64]) -> Result<Option<Self>>
    where
        Self: Sized,
    {
        Ok(None)
    }
}

/// Wraps a closure as a [`CoefficientFunction`].
pub struct FnFunction<F> {
    pub dimension: usize,
    pub f: F,
}

impl<F> CoefficientFunction for FnFunction<F>
where
    F: Fn(&[Complex64]) -> Result<Complex64> + Sync,
{
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, a: &[Complex64]) -> Result<Complex64> {
        if a.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: a.len() });
        }
        (self.f)(a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationSettings {
    /// First attempted step as a fraction of the path.
    pub initial_step: f64,
    /// Halving stops below this step and reports a discriminant.
    pub min_step: f64,
    /// Newton stops once |f| < newton_tol · Σ|c_k||r|^k.
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings { initial_step: 0.25, min_step: 1e-10, newton_tol: 1e-13, max_newton: 8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FunctionKind {
    Period(CycleSpec),
    /// The root of the single log factor continued from `base_root` at the
    /// scenario's base coefficients.
    Root {
        base_root: Complex64,
    },
    GlResidue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodFunction {
    scenario: ScenarioSpec,
    kind: FunctionKind,
    pub quadrature: QuadratureSettings,
    pub continuation: ContinuationSettings,
}

/// Accepted steps of a root continuation.
#[derive(Clone, Debug, PartialEq)]
pub struct RootTrack {
    pub params: Vec<f64>,
    pub roots: Vec<Complex64>,
    pub residuals: Vec<f64>,
}

impl RootTrack {
    pub fn end(&self) -> Complex64 {
        *self.roots.last().expect("track has a start")
    }
}

/// Effective univariate coefficients of the root polynomial: frozen
/// coordinates are substituted and the free coordinate's powers collected.
pub fn fold_frozen(scenario: &ScenarioSpec, a: &[Complex64]) -> Result<Vec<Complex64>> {
    let free = free_coordinate(scenario)?;
    let factor = &scenario.factors()[0];
    let deg = factor.monomials.iter().map(|m| m.0[free]).max().unwrap_or(0) as usize;
    let mut dense = vec![Complex64::zero(); deg + 1];
    for (mono, &c) in factor.monomials.iter().zip(a) {
        let mut term = c;
        for (q, &e) in mono.0.iter().enumerate() {
            if q != free && e > 0 {
                let x = scenario.frozen()[q].expect("non-free coordinates are frozen");
                term *= x.powu(e);
            }
        }
        dense[mono.0[free] as usize] += term;
    }
    Ok(dense)
}

fn free_coordinate(scenario: &ScenarioSpec) -> Result<usize> {
    let free: Vec<usize> = (0..scenario.m()).filter(|&p| !scenario.is_frozen(p)).collect();
    match free.as_slice() {
        [p] => Ok(*p),
        _ => Err(Error::InvalidScenario(format!(
            "a root function needs exactly one free coordinate, found {}",
            free.len()
        ))),
    }
}

fn newton(coeffs: &[Complex64], x0: Complex64, settings: &ContinuationSettings) -> Option<(Complex64, usize)> {
    let mut x = x0;
    for iter in 0..=settings.max_newton {
        let (p, dp) = poly::eval_with_derivative(coeffs, x);
        if p.norm() <= settings.newton_tol * poly::magnitude_scale(coeffs, x) {
            return Some((x, iter));
        }
        if dp.is_zero() || iter == settings.max_newton {
            return None;
        }
        x -= p / dp;
        if !x.re.is_finite() || !x.im.is_finite() {
            return None;
        }
    }
    None
}

fn interpolate(a: &[Complex64], b: &[Complex64], s: f64) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * (1.0 - s) + y * s).collect()
}

/// Continues `root0`, a zero of `path(0)`, along `s ∈ [0, 1]` with a tangent
/// predictor, Newton corrector and step halving.
pub fn track_root<P>(path: P, root0: Complex64, settings: &ContinuationSettings) -> Result<RootTrack>
where
    P: Fn(f64) -> Vec<Complex64>,
{
    let c0 = path(0.0);
    let (mut r, _) = newton(&c0, root0, settings).ok_or(Error::NearDiscriminant { location: root0 })?;
    let mut track = RootTrack { params: vec![0.0], roots: vec![r], residuals: vec![poly::eval(&c0, r).norm()] };
    let mut s = 0.0;
    let mut h = settings.initial_step.min(1.0);
    let root_scale = r.norm().max(1.0);
    while s < 1.0 {
        let step = h.min(1.0 - s);
        let c_now = path(s);
        let lead = c_now.last().copied().unwrap_or_default();
        let coeff_scale = c_now.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if lead.norm() <= 1e-12 * coeff_scale || r.norm() > 1e8 * root_scale {
            return Err(Error::RootEscape);
        }
        // tangent dr/ds = −(∂f/∂s)/f′ with ∂f/∂s from a symmetric difference of the path
        let delta = 1e-6 * step.max(1e-6);
        let c_plus = path((s + delta).min(1.0));
        let c_minus = path((s - delta).max(0.0));
        let span = (s + delta).min(1.0) - (s - delta).max(0.0);
        let dc: Vec<Complex64> = c_plus.iter().zip(&c_minus).map(|(p, m)| (p - m) / span).collect();
        let (_, dp) = poly::eval_with_derivative(&c_now, r);
        let predicted = if dp.is_zero() { r } else { r - poly::eval(&dc, r) / dp * step };
        let c_next = path(s + step);
        let accepted = newton(&c_next, predicted, settings).filter(|&(x, iters)| {
            let correction = (x - predicted).norm();
            let advance = (predicted - r).norm();
            iters <= 6 && correction <= 0.1 * advance + 1e-9 * x.norm().max(1.0)
        });
        match accepted {
            Some((x, iters)) => {
                s += step;
                r = x;
                track.params.push(s);
                track.roots.push(r);
                track.residuals.push(poly::eval(&c_next, r).norm());
                if iters <= 3 {
                    h = (step * 2.0).min(1.0);
                }
            }
            None => {
                h = step * 0.5;
                if h < settings.min_step {
                    return Err(Error::NearDiscriminant { location: r });
                }
            }
        }
    }
    Ok(track)
}

/// Σ over roots r of `x^(β−1)/f′(r)`, principal powers for non-integer β.
pub fn gl_residue_sum(coeffs: &[Complex64], beta: Complex64) -> Result<Complex64> {
    Ok(gl_residue_with_estimate(coeffs, beta)?.0)
}

/// The residue sum together with a first-order estimate of the effect of
/// the remaining root error `f(r)/f′(r)` on each term.
pub fn gl_residue_with_estimate(coeffs: &[Complex64], beta: Complex64) -> Result<(Complex64, f64)> {
    let roots = poly::roots(coeffs)?;
    let deriv = poly::derivative(coeffs);
    let second = poly::derivative(&deriv);
    let exponent = beta - 1.0;
    let k = exponent.re.round();
    let integer = exponent.im == 0.0 && (exponent.re - k).abs() <= 1e-12;
    let mut sum = Complex64::zero();
    let mut estimate = 0.0;
    for r in roots {
        let fp = poly::eval(&deriv, r);
        if fp.norm() <= 1e-8 * poly::magnitude_scale(&deriv, r).max(f64::MIN_POSITIVE) {
            return Err(Error::NearDiscriminant { location: r });
        }
        let weight = if integer {
            if r.is_zero() && k < 0.0 {
                return Err(Error::PathThroughSingularity { location: r, what: "x1".into() });
            }
            r.powi(k as i32)
        } else {
            if r.re <= 0.0 && r.im.abs() <= 1e-12 * r.norm().max(1e-300) {
                return Err(Error::BranchAmbiguity { root: r });
            }
            r.powc(exponent)
        };
        let term = weight / fp;
        sum += term;
        let dr = (poly::eval(coeffs, r) / fp).norm();
        let log_slope = if r.is_zero() { Complex64::zero() } else { exponent / r } - poly::eval(&second, r) / fp;
        estimate += dr * (term * log_slope).norm();
    }
    Ok((sum, estimate))
}

impl PeriodFunction {
    pub fn new(scenario: ScenarioSpec, kind: FunctionKind) -> Result<Self> {
        match &kind {
            FunctionKind::Period(cycle) => {
                if scenario.frozen().iter().any(Option::is_some) {
                    return Err(Error::InvalidScenario(
                        "frozen coordinates are only supported for root functions".into(),
                    ));
                }
                cycle.validate(scenario.m())?;
            }
            FunctionKind::Root { .. } => {
                free_coordinate(&scenario)?;
                if scenario.factors().len() != 1 || scenario.factors()[0].kind != FactorKind::Log {
                    return Err(Error::InvalidScenario("a root function needs exactly one factor of kind log".into()));
                }
            }
            FunctionKind::GlResidue => {
                if scenario.m() != 1 {
                    return Err(Error::InvalidScenario(format!(
                        "residue sums are implemented for zero-dimensional fibres only (m = 1), got m = {}",
                        scenario.m()
                    )));
                }
                let ok =
                    scenario.factors().len() == 1 && scenario.factors()[0].kind == FactorKind::Power(-Complex64::one());
                if !ok {
                    return Err(Error::InvalidScenario(
                        "a residue sum needs exactly one factor with exponent -1 (g = 1/z)".into(),
                    ));
                }
                if scenario.frozen()[0].is_some() {
                    return Err(Error::InvalidScenario("residue sums take no frozen coordinates".into()));
                }
            }
        }
        Ok(PeriodFunction {
            scenario,
            kind,
            quadrature: QuadratureSettings::default(),
            continuation: ContinuationSettings::default(),
        })
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.scenario
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn base_coefficients(&self) -> Vec<Complex64> {
        self.scenario.coefficients()
    }

    /// Full quadrature result for a period function.
    pub fn integrate(&self, a: &[Complex64]) -> Result<IntegralResult> {
        let FunctionKind::Period(cycle) = &self.kind else {
            return Err(Error::InvalidScenario("not a period function".into()));
        };
        let scenario = self.scenario.with_coefficients(a)?;
        let integrand = Integrand::new(&scenario);
        integrate_cycle(&integrand, cycle, &self.quadrature)
    }

    pub fn eval_period(&self, a: &[Complex64]) -> Result<Complex64> {
        let r = self.integrate(a)?;
        if !r.converged {
            return Err(Error::Unconverged { value: r.value, error_estimate: r.error_estimate });
        }
        Ok(r.value)
    }

    fn base_root(&self) -> Result<Complex64> {
        let FunctionKind::Root { base_root } = self.kind else {
            return Err(Error::InvalidScenario("not a root function".into()));
        };
        let dense = fold_frozen(&self.scenario, &self.scenario.coefficients())?;
        newton(&dense, base_root, &self.continuation)
            .map(|(r, _)| r)
            .ok_or(Error::NearDiscriminant { location: base_root })
    }

    /// Continuation of the base root along the straight segment from the
    /// base coefficients to `a`.
    pub fn root_track(&self, a: &[Complex64]) -> Result<RootTrack> {
        let base = self.scenario.coefficients();
        if a.len() != base.len() {
            return Err(Error::DimensionMismatch { expected: base.len(), found: a.len() });
        }
        let start = fold_frozen(&self.scenario, &base)?;
        let end = fold_frozen(&self.scenario, a)?;
        let r0 = self.base_root()?;
        track_root(|s| interpolate(&start, &end, s), r0, &self.continuation)
    }

    pub fn eval_root(&self, a: &[Complex64]) -> Result<Complex64> {
        if a == self.scenario.coefficients().as_slice() {
            return self.base_root();
        }
        Ok(self.root_track(a)?.end())
    }

    pub fn eval_gl_residue(&self, a: &[Complex64]) -> Result<Complex64> {
        Ok(self.gl_residue_estimated(a)?.0)
    }

    fn gl_residue_estimated(&self, a: &[Complex64]) -> Result<(Complex64, f64)> {
        let scenario = self.scenario.with_coefficients(a)?;
        let integrand = Integrand::new(&scenario);
        let dense = integrand
            .univariate_coefficients(0, 0)
            .ok_or_else(|| Error::InvalidScenario("residue factor must be univariate".into()))?;
        gl_residue_with_estimate(dense, scenario.twist()[0])
    }

    /// Value and error estimate: level difference for periods, the last
    /// Newton step for roots, first-order root sensitivity for residues.
    pub fn evaluate_with_estimate(&self, a: &[Complex64]) -> Result<(Complex64, f64)> {
        match &self.kind {
            FunctionKind::Period(_) => {
                let r = self.integrate(a)?;
                if !r.converged {
                    return Err(Error::Unconverged { value: r.value, error_estimate: r.error_estimate });
                }
                Ok((r.value, r.error_estimate))
            }
            FunctionKind::Root { .. } => {
                let r = self.eval_root(a)?;
                let dense = fold_frozen(&self.scenario, a)?;
                let (f, fp) = poly::eval_with_derivative(&dense, r);
                let step = if fp.is_zero() { f64::INFINITY } else { (f / fp).norm() };
                Ok((r, step))
            }
            FunctionKind::GlResidue => self.gl_residue_estimated(a),
        }
    }

    /// The cycle with ray lengths, quadrature rules and endpoint guesses
    /// fixed from the resolution at `a`, plus the level needed there.
    fn frozen_cycle(&self, cycle: &CycleSpec, a: &[Complex64]) -> Result<(CycleSpec, u32)> {
        let scenario = self.scenario.with_coefficients(a)?;
        let integrand = Integrand::new(&scenario);
        let result = integrate_cycle(&integrand, cycle, &self.quadrature)?;
        if !result.converged {
            return Err(Error::Unconverged { value: result.value, error_estimate: result.error_estimate });
        }
        let mut level = 0;
        let mut terms = Vec::with_capacity(cycle.terms.len());
        for (term, diag) in cycle.terms.iter().zip(&result.terms) {
            let resolved = resolve_term(&integrand, &term.paths)?;
            let has_rays = resolved.iter().any(|p| p.has_rays());
            level = level.max(diag.level + if has_rays { 2 } else { 1 });
            let paths = term
                .paths
                .iter()
                .zip(&resolved)
                .map(|(path, res)| {
                    let segments = path
                        .segments
                        .iter()
                        .zip(&res.segments)
                        .map(|(seg, rs)| {
                            let shape = match (seg.shape, rs.shape) {
                                (
                                    SegmentShape::Ray { start, direction, inward, .. },
                                    ResolvedShape::Ray { start: z, length, .. },
                                ) => SegmentShape::Ray {
                                    start: refresh(start, z),
                                    direction,
                                    length: Some(2.0 * length),
                                    inward,
                                },
                                (SegmentShape::Line { start, end }, ResolvedShape::Line { start: z0, end: z1 }) => {
                                    SegmentShape::Line { start: refresh(start, z0), end: refresh(end, z1) }
                                }
                                (shape, _) => shape,
                            };
                            PathSegment { shape, rule: Some(rs.rule) }
                        })
                        .collect();
                    Path1D { segments, ..path.clone() }
                })
                .collect();
            terms.push(CycleTerm { multiplicity: term.multiplicity, paths });
        }
        Ok((CycleSpec { terms }, level.min(self.quadrature.max_level + 2)))
    }
}

fn refresh(e: Endpoint, resolved: Complex64) -> Endpoint {
    match e {
        Endpoint::RootOf { factor, .. } => Endpoint::RootOf { factor, near: resolved },
        other => other,
    }
}

impl CoefficientFunction for PeriodFunction {
    fn dimension(&self) -> usize {
        self.scenario.coefficient_count()
    }

    fn evaluate(&self, a: &[Complex64]) -> Result<Complex64> {
        if a.len() != self.dimension() {
            return Err(Error::DimensionMismatch { expected: self.dimension(), found: a.len() });
        }
        match &self.kind {
            FunctionKind::Period(_) => {
                if self.quadrature.fixed_level.is_some() {
                    Ok(self.integrate(a)?.value)
                } else {
                    self.eval_period(a)
                }
            }
            FunctionKind::Root { .. } => self.eval_root(a),
            FunctionKind::GlResidue => self.eval_gl_residue(a),
        }
    }

    fn noise_level(&self) -> f64 {
        match self.kind {
            FunctionKind::Period(_) => 1e-13,
            _ => 1e-15,
        }
    }

    fn localize(&self, a: &[Complex64]) -> Result<Option<Self>> {
        match &self.kind {
            FunctionKind::Period(cycle) => {
                if self.quadrature.fixed_level.is_some() {
                    return Ok(None);
                }
                let (frozen, level) = self.frozen_cycle(cycle, a)?;
                let mut out = self.clone();
                out.kind = FunctionKind::Period(frozen);
                out.quadrature.fixed_level = Some(level);
                Ok(Some(out))
            }
            FunctionKind::Root { .. } => {
                // restart continuation from the local root so that nearby
                // evaluations take short straight paths
                let root = self.eval_root(a)?;
                let mut out = self.clone();
                out.scenario = self.scenario.with_coefficients(a)?;
                out.kind = FunctionKind::Root { base_root: root };
                Ok(Some(out))
            }
            FunctionKind::GlResidue => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{FactorSupport, Monomial};
    use core::f64::consts::{PI, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quadratic_root() -> PeriodFunction {
        let f = FactorSupport::new(
            FactorKind::Log,
            vec![Monomial::new(vec![0]), Monomial::new(vec![1]), Monomial::new(vec![2])],
            vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        );
        let s = ScenarioSpec::new(1, vec![f], vec![c(1.0, 0.0)], vec![None]).unwrap();
        PeriodFunction::new(s, FunctionKind::Root { base_root: c(1.0, 0.0) }).unwrap()
    }

    #[test]
    fn root_continuation_reaches_sqrt_two() {
        let pf = quadratic_root();
        let r = pf.eval_root(&[c(-2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((r - c(2f64.sqrt(), 0.0)).norm() < 1e-12);
        assert_eq!(pf.eval_root(&pf.base_coefficients()).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn loop_around_discriminant_swaps_roots() {
        let track = track_root(
            |t| vec![-Complex64::from_polar(1.0, TAU * t), c(0.0, 0.0), c(1.0, 0.0)],
            c(1.0, 0.0),
            &ContinuationSettings::default(),
        )
        .unwrap();
        assert!((track.end() - c(-1.0, 0.0)).norm() < 1e-12, "{:?}", track.end());
    }

    #[test]
    fn vanishing_leading_coefficient_escapes() {
        // (1−s)x² + sx − 1 keeps the root 1; the other root −1/(1−s) escapes
        let mut pf = quadratic_root();
        pf.kind = FunctionKind::Root { base_root: c(-1.0, 0.0) };
        let err = pf.eval_root(&[c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::RootEscape | Error::NearDiscriminant { .. }), "{:?}", err);
    }

    #[test]
    fn residue_sums() {
        let q = [c(5.0, 0.0), c(-3.0, 0.0), c(7.0, 0.0)];
        assert!((gl_residue_sum(&q, c(2.0, 0.0)).unwrap() - c(1.0 / 7.0, 0.0)).norm() < 1e-14);
        assert!(gl_residue_sum(&q, c(1.0, 0.0)).unwrap().norm() < 1e-14);
        let cubic = [c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(gl_residue_sum(&cubic, c(1.0, 0.0)).unwrap().norm() < 1e-14);
        // x^2 + 1 with β = 1/2: roots ±i lie off the cut
        let v = gl_residue_sum(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], c(0.5, 0.0)).unwrap();
        assert!(v.re.is_finite());
        // x + 1 has its root on the cut
        let err = gl_residue_sum(&[c(1.0, 0.0), c(1.0, 0.0)], c(0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::BranchAmbiguity { .. }));
    }

    #[test]
    fn period_of_reciprocal_on_circle() {
        let f = FactorSupport::new(FactorKind::Power(c(-1.0, 0.0)), vec![Monomial::new(vec![1])], vec![c(2.0, 0.0)]);
        let s = ScenarioSpec::new(1, vec![f], vec![c(1.0, 0.0)], vec![None]).unwrap();
        let cycle = CycleSpec::single(Path1D::new(vec![PathSegment::circle(c(0.0, 0.0), 1.0)], true));
        let pf = PeriodFunction::new(s, FunctionKind::Period(cycle)).unwrap();
        let v = pf.evaluate(&[c(2.0, 0.0)]).unwrap();
        assert!((v - c(0.0, PI)).norm() < 1e-12);
        let local = pf.localize(&[c(2.0, 0.0)]).unwrap().unwrap();
        assert!((local.evaluate(&[c(2.0, 0.1)]).unwrap() - c(0.0, TAU) / c(2.0, 0.1)).norm() < 1e-12);
    }
}
