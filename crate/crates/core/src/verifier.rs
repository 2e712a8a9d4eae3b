//! Numerical check that every operator of a system annihilates a function of
//! the coefficients. Derivatives come from the Cauchy integral formula on
//! small polycircles; central differences are kept for comparison.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::f64::consts::TAU;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::periods::CoefficientFunction;
use crate::scenario::ColumnLabel;
use crate::system::{render_box, render_euler, BoxOperator, EulerOperator, GkzSystem};

/// Highest total derivative order accepted.
pub const ORDER_CAP: u32 = 6;
/// Two-radius disagreement above this marks a derivative unreliable.
pub const UNRELIABLE_DISAGREEMENT: f64 = 1e-4;
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffMethod {
    CauchyCircle,
    CentralDifference,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffSettings {
    pub method: DiffMethod,
    /// ρ_k = radius_factor · max(1, |a_k|).
    pub radius_factor: f64,
    /// Nodes per circle.
    pub nodes: usize,
    /// h_k = step_factor · max(1, |a_k|).
    pub step_factor: f64,
    pub richardson_levels: usize,
    /// Also differentiate at half the radius and record the disagreement.
    pub two_radius_check: bool,
}

impl Default for DiffSettings {
    fn default() -> Self {
        DiffSettings {
            method: DiffMethod::CauchyCircle,
            radius_factor: 0.1,
            nodes: 16,
            step_factor: 1e-3,
            richardson_levels: 2,
            two_radius_check: true,
        }
    }
}

impl DiffSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_factor > 0.0) || !(self.step_factor > 0.0) {
            return Err(Error::InvalidScenario("radius and step must be positive".into()));
        }
        if self.nodes < 8 || !self.nodes.is_multiple_of(2) {
            return Err(Error::InvalidScenario("nodes per circle must be even and at least 8".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivative {
    pub value: Complex64,
    /// Relative change when the radius is halved (0 when not computed).
    pub disagreement: f64,
    /// Largest |Φ| over the evaluation nodes.
    pub sample_scale: f64,
    /// Noise amplification Π α_k!/ρ_k^α_k of the formula.
    pub amplification: f64,
}

impl Derivative {
    pub fn unreliable(&self) -> bool {
        self.disagreement > UNRELIABLE_DISAGREEMENT
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn order(multi: &[u32]) -> u32 {
    multi.iter().sum()
}

fn cauchy<F: CoefficientFunction>(
    f: &F,
    a: &[Complex64],
    multi: &[u32],
    radii: &[f64],
    k: usize,
) -> Result<(Complex64, f64)> {
    let vars: Vec<usize> = (0..multi.len()).filter(|&i| multi[i] > 0).collect();
    if vars.is_empty() {
        let v = f.evaluate(a)?;
        return Ok((v, v.norm()));
    }
    let roots: Vec<Complex64> = (0..k).map(|j| Complex64::from_polar(1.0, TAU * j as f64 / k as f64)).collect();
    let total = k.pow(vars.len() as u32);
    let mut point = a.to_vec();
    let mut sum = Complex64::zero();
    let mut scale: f64 = 0.0;
    let mut index = vec![0usize; vars.len()];
    for _ in 0..total {
        let mut weight = Complex64::new(1.0, 0.0);
        for (slot, &v) in vars.iter().enumerate() {
            let z = roots[index[slot]];
            point[v] = a[v] + z * radii[v];
            // ζ^{-α} = conj(ζ)^α on the unit circle
            weight *= roots[(k - index[slot] * multi[v] as usize % k) % k];
        }
        let value = f.evaluate(&point).map_err(|e| match e {
            Error::PathThroughSingularity { what, .. } => {
                Error::PathThroughSingularity { location: point[vars[0]], what: format!("{} (derivative node)", what) }
            }
            other => other,
        })?;
        scale = scale.max(value.norm());
        sum += weight * value;
        for slot in (0..vars.len()).rev() {
            index[slot] += 1;
            if index[slot] < k {
                break;
            }
            index[slot] = 0;
        }
    }
    let mut factor = 1.0 / total as f64;
    for &v in &vars {
        factor *= factorial(multi[v]) / radii[v].powi(multi[v] as i32);
    }
    Ok((sum * factor, scale))
}

/// n-th central difference along one variable, applied to an inner
/// differentiator.
fn central<G>(inner: &G, a: &mut [Complex64], var: usize, n: u32, h: f64) -> Result<Complex64>
where
    G: Fn(&[Complex64]) -> Result<Complex64>,
{
    let base = a[var];
    let mut sum = Complex64::zero();
    let mut binom = 1.0;
    for j in 0..=n {
        let offset = (n as f64 / 2.0 - j as f64) * h;
        a[var] = base + offset;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += inner(a)? * (sign * binom);
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    a[var] = base;
    Ok(sum / h.powi(n as i32))
}

fn central_mixed<F: CoefficientFunction>(f: &F, a: &[Complex64], multi: &[u32], steps: &[f64]) -> Result<Complex64> {
    fn rec<F: CoefficientFunction>(
        f: &F,
        a: &[Complex64],
        multi: &[u32],
        steps: &[f64],
        var: usize,
    ) -> Result<Complex64> {
        let Some(v) = (var..multi.len()).find(|&i| multi[i] > 0) else {
            return f.evaluate(a);
        };
        let mut point = a.to_vec();
        let inner = |p: &[Complex64]| rec(f, p, multi, steps, v + 1);
        central(&inner, &mut point, v, multi[v], steps[v])
    }
    rec(f, a, multi, steps, 0)
}

fn central_richardson<F: CoefficientFunction>(
    f: &F,
    a: &[Complex64],
    multi: &[u32],
    steps: &[f64],
    levels: usize,
) -> Result<Complex64> {
    let mut table = Vec::with_capacity(levels + 1);
    for l in 0..=levels {
        let scaled: Vec<f64> = steps.iter().map(|h| h / (1u32 << l) as f64).collect();
        table.push(central_mixed(f, a, multi, &scaled)?);
    }
    // eliminate h², h⁴, … in turn
    for l in 1..=levels {
        let factor = 4f64.powi(l as i32);
        for j in (l..=levels).rev() {
            table[j] = (table[j] * factor - table[j - 1]) / (factor - 1.0);
        }
    }
    Ok(table[levels])
}

fn radii(a: &[Complex64], factor: f64) -> Vec<f64> {
    a.iter().map(|z| factor * z.norm().max(1.0)).collect()
}

/// Mixed partial ∂^multi Φ(a).
pub fn differentiate<F: CoefficientFunction>(
    f: &F,
    a: &[Complex64],
    multi: &[u32],
    settings: &DiffSettings,
) -> Result<Derivative> {
    settings.validate()?;
    if multi.len() != a.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: multi.len() });
    }
    let q = order(multi);
    if q > ORDER_CAP {
        return Err(Error::OrderTooHigh { order: q as usize, cap: ORDER_CAP as usize });
    }
    match settings.method {
        DiffMethod::CauchyCircle => {
            let rho = radii(a, settings.radius_factor);
            let (value, scale) = cauchy(f, a, multi, &rho, settings.nodes)?;
            let mut amplification = 1.0;
            for (k, &m) in multi.iter().enumerate() {
                amplification *= factorial(m) / rho[k].powi(m as i32);
            }
            let mut disagreement = 0.0;
            if settings.two_radius_check && q > 0 {
                let half: Vec<f64> = rho.iter().map(|r| r * 0.5).collect();
                let (v2, _) = cauchy(f, a, multi, &half, settings.nodes)?;
                let denom = value.norm().max(v2.norm());
                disagreement = if denom > 0.0 { (value - v2).norm() / denom } else { 0.0 };
                // a difference within the noise floor carries no information
                let floor = 2f64.powi(q as i32) * amplification * scale * f.noise_level() * 100.0;
                if (value - v2).norm() <= floor {
                    disagreement = 0.0;
                }
            }
            Ok(Derivative { value, disagreement, sample_scale: scale, amplification })
        }
        DiffMethod::CentralDifference => {
            let steps = radii(a, settings.step_factor);
            let value = central_richardson(f, a, multi, &steps, settings.richardson_levels)?;
            let mut amplification = 1.0;
            for (k, &m) in multi.iter().enumerate() {
                amplification *= 2f64.powi(m as i32) / steps[k].powi(m as i32);
            }
            let scale = f.evaluate(a)?.norm();
            Ok(Derivative { value, disagreement: 0.0, sample_scale: scale, amplification })
        }
    }
}

/// Derivatives at one point, computed once per multi-index.
pub struct DerivativeCache<'a, F> {
    f: &'a F,
    a: Vec<Complex64>,
    settings: DiffSettings,
    cache: RefCell<BTreeMap<Vec<u32>, Derivative>>,
}

impl<'a, F: CoefficientFunction> DerivativeCache<'a, F> {
    pub fn new(f: &'a F, a: &[Complex64], settings: DiffSettings) -> Self {
        DerivativeCache { f, a: a.to_vec(), settings, cache: RefCell::new(BTreeMap::new()) }
    }

    pub fn point(&self) -> &[Complex64] {
        &self.a
    }

    pub fn get(&self, multi: &[u32]) -> Result<Derivative> {
        if let Some(d) = self.cache.borrow().get(multi) {
            return Ok(*d);
        }
        let d = differentiate(self.f, &self.a, multi, &self.settings)?;
        self.cache.borrow_mut().insert(multi.to_vec(), d);
        Ok(d)
    }

    pub fn value(&self) -> Result<Complex64> {
        Ok(self.get(&vec![0; self.a.len()])?.value)
    }
}

/// An operator of the system, borrowed.
#[derive(Clone, Copy, Debug)]
pub enum Operator<'s> {
    Euler(&'s EulerOperator),
    Box(&'s BoxOperator),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Application {
    pub raw: Complex64,
    pub normalization: f64,
    /// Estimated size of the residual produced by evaluation noise alone.
    pub noise_floor: f64,
    pub disagreement: f64,
}

/// L Φ(a) for one operator, with the sum of term magnitudes.
pub fn apply_operator<F: CoefficientFunction>(op: Operator<'_>, cache: &DerivativeCache<'_, F>) -> Result<Application> {
    let n = cache.point().len();
    let noise = cache.f.noise_level() * 100.0;
    let mut disagreement: f64 = 0.0;
    let mut floor = 0.0;
    match op {
        Operator::Euler(e) => {
            if e.weights.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: e.weights.len() });
            }
            let phi = cache.get(&vec![0; n])?;
            let mut raw = -e.eigenvalue * phi.value;
            let mut normalization = raw.norm();
            floor += noise * phi.sample_scale * e.eigenvalue.norm();
            for (col, &w) in e.weights.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                let mut multi = vec![0; n];
                multi[col] = 1;
                let d = cache.get(&multi)?;
                let coef = cache.point()[col] * w as f64;
                let term = coef * d.value;
                raw += term;
                normalization += term.norm();
                floor += noise * coef.norm() * d.amplification * d.sample_scale;
                disagreement = disagreement.max(d.disagreement);
            }
            Ok(Application { raw, normalization, noise_floor: floor, disagreement })
        }
        Operator::Box(b) => {
            let plus = cache.get(b.plus_multiindex())?;
            let minus = cache.get(b.minus_multiindex())?;
            floor += noise * (plus.amplification * plus.sample_scale + minus.amplification * minus.sample_scale);
            disagreement = plus.disagreement.max(minus.disagreement);
            Ok(Application {
                raw: plus.value - minus.value,
                normalization: plus.value.norm() + minus.value.norm(),
                noise_floor: floor,
                disagreement,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellReport {
    pub operator: String,
    pub raw: f64,
    pub normalization: f64,
    pub relative: f64,
    /// Both the residual and its normalization sit at the noise floor.
    pub degenerate: bool,
    pub disagreement: f64,
    pub unreliable: bool,
    pub error: Option<String>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointReport {
    pub point: Vec<Complex64>,
    pub value: Option<Complex64>,
    pub error: Option<String>,
    pub cells: Vec<CellReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub points: Vec<PointReport>,
    pub max_relative: f64,
    pub threshold: f64,
    pub passed: bool,
    pub evaluation_errors: usize,
}

/// Names of all operators in report order: Euler operators, then boxes.
pub fn operator_names(system: &GkzSystem) -> Vec<String> {
    let labels: &[ColumnLabel] = &system.matrix.column_labels;
    system
        .eulers
        .iter()
        .map(|e| format!("euler {}: {}", e.label, render_euler(e, labels)))
        .chain(system.boxes.iter().map(|b| format!("box: {}", render_box(b, labels))))
        .collect()
}

fn cell_from(name: String, app: Result<Application>, threshold: f64) -> CellReport {
    match app {
        Ok(app) => {
            let raw = app.raw.norm();
            let degenerate = app.normalization <= app.noise_floor && raw <= app.noise_floor;
            let relative = if app.normalization > 0.0 {
                raw / app.normalization
            } else if raw == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let passed = degenerate || relative < threshold;
            CellReport {
                operator: name,
                raw,
                normalization: app.normalization,
                relative,
                degenerate,
                disagreement: app.disagreement,
                unreliable: app.disagreement > UNRELIABLE_DISAGREEMENT,
                error: None,
                passed,
            }
        }
        Err(e) => CellReport {
            operator: name,
            raw: f64::NAN,
            normalization: f64::NAN,
            relative: f64::INFINITY,
            degenerate: false,
            disagreement: 0.0,
            unreliable: false,
            error: Some(format!("{}", e)),
            passed: false,
        },
    }
}

/// All operators at one point. Evaluation failures mark cells without
/// aborting the others.
pub fn verify_point<F: CoefficientFunction>(
    system: &GkzSystem,
    f: &F,
    a: &[Complex64],
    settings: &DiffSettings,
    threshold: f64,
) -> PointReport {
    let names = operator_names(system);
    let localized = match f.localize(a) {
        Ok(l) => l,
        Err(e) => {
            return PointReport {
                point: a.to_vec(),
                value: None,
                error: Some(format!("{}", e)),
                cells: names.into_iter().map(|n| cell_from(n, Err(e.clone()), threshold)).collect(),
            }
        }
    };
    let target: &F = localized.as_ref().unwrap_or(f);
    let cache = DerivativeCache::new(target, a, *settings);
    let (value, error) = match cache.value() {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(format!("{}", e))),
    };
    let ops = system.eulers.iter().map(Operator::Euler).chain(system.boxes.iter().map(Operator::Box));
    let cells = ops.zip(names).map(|(op, name)| cell_from(name, apply_operator(op, &cache), threshold)).collect();
    PointReport { point: a.to_vec(), value, error, cells }
}

/// Combines point reports in order into the overall verdict.
pub fn assemble_report(points: Vec<PointReport>, threshold: f64) -> ResidualReport {
    let mut max_relative: f64 = 0.0;
    let mut passed = true;
    let mut evaluation_errors = 0;
    for p in &points {
        if p.error.is_some() {
            evaluation_errors += 1;
            passed = false;
        }
        for c in &p.cells {
            if c.error.is_some() {
                evaluation_errors += 1;
            }
            if !c.degenerate {
                max_relative = max_relative.max(c.relative);
            }
            passed &= c.passed;
        }
    }
    ResidualReport { points, max_relative, threshold, passed, evaluation_errors }
}

pub fn verify<F: CoefficientFunction>(
    system: &GkzSystem,
    f: &F,
    points: &[Vec<Complex64>],
    settings: &DiffSettings,
    threshold: f64,
) -> ResidualReport {
    let reports = points.iter().map(|a| verify_point(system, f, a, settings, threshold)).collect();
    assemble_report(reports, threshold)
}

/// The base point followed by `count − 1` seeded perturbations, each
/// coordinate moved uniformly within a disc of radius
/// `relative · max(1, |a_k|)`.
pub fn verification_points(base: &[Complex64], count: usize, seed: u64, relative: f64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(base.to_vec());
    }
    for _ in 1..count {
        let point = base
            .iter()
            .map(|z| {
                let r = relative * z.norm().max(1.0) * rng.gen::<f64>().sqrt();
                let theta = TAU * rng.gen::<f64>();
                z + Complex64::from_polar(r, theta)
            })
            .collect();
        out.push(point);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periods::FnFunction;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn derivative_examples() {
        let s = DiffSettings::default();
        let square = FnFunction { dimension: 1, f: |a: &[Complex64]| Ok(a[0] * a[0]) };
        let d = differentiate(&square, &[c(3.0, 0.0)], &[2], &s).unwrap();
        assert!((d.value - c(2.0, 0.0)).norm() < 1e-12);

        let exp = FnFunction { dimension: 1, f: |a: &[Complex64]| Ok(a[0].exp()) };
        let d = differentiate(&exp, &[c(0.0, 0.0)], &[3], &s).unwrap();
        assert!((d.value - c(1.0, 0.0)).norm() < 1e-12);

        let mixed = FnFunction { dimension: 2, f: |a: &[Complex64]| Ok(a[0] * a[1] * a[1]) };
        let d = differentiate(&mixed, &[c(1.0, 0.0), c(2.0, 0.0)], &[1, 1], &s).unwrap();
        assert!((d.value - c(4.0, 0.0)).norm() < 1e-12);

        let central = DiffSettings { method: DiffMethod::CentralDifference, ..s };
        let d = differentiate(&mixed, &[c(1.0, 0.0), c(2.0, 0.0)], &[1, 1], &central).unwrap();
        assert!((d.value - c(4.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn rejects_high_orders_and_bad_settings() {
        let f = FnFunction { dimension: 1, f: |a: &[Complex64]| Ok(a[0]) };
        let err = differentiate(&f, &[c(0.0, 0.0)], &[7], &DiffSettings::default()).unwrap_err();
        assert_eq!(err, Error::OrderTooHigh { order: 7, cap: 6 });
        let bad = DiffSettings { nodes: 7, ..DiffSettings::default() };
        assert!(differentiate(&f, &[c(0.0, 0.0)], &[1], &bad).is_err());
    }

    #[test]
    fn points_are_seeded() {
        let base = [c(-1.0, 0.0), c(0.1, 0.0), c(1.0, 0.0)];
        let p = verification_points(&base, 3, 7, 0.2);
        assert_eq!(p[0], base.to_vec());
        assert_eq!(p, verification_points(&base, 3, 7, 0.2));
        assert_ne!(p, verification_points(&base, 3, 8, 0.2));
        for point in &p[1..] {
            for (z, b) in point.iter().zip(&base) {
                assert!((z - b).norm() <= 0.2 * b.norm().max(1.0));
            }
        }
    }
}
