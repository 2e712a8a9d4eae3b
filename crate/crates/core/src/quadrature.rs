//! Adaptive quadrature over cycles. Every segment of a path gets a rule;
//! product chains use tensor products of the per-path node sets. Levels are
//! refined until successive values agree to the requested tolerance.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::paths::{
    anchor_sample, describe, resolve_path, transport_from_anchor, Coord, CycleSpec, Integrand, Path1D, PathParam,
    ResolvedPath, ResolvedShape, Sample,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// Equally spaced nodes on a closed loop with a periodic integrand.
    PeriodicTrapezoid,
    /// Composite 10-point Gauss–Legendre with 2^level panels.
    GaussLegendre,
    /// Double-exponential rule for endpoint singularities.
    TanhSinh,
    /// Gauss–Legendre on a ray cut at its decay length.
    TruncatedRay,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSettings {
    pub tol: f64,
    pub max_level: u32,
    pub min_level: u32,
    /// Evaluate at exactly this level, skipping refinement and the ray check.
    pub fixed_level: Option<u32>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings { tol: 1e-10, max_level: 14, min_level: 2, fixed_level: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermDiagnostic {
    pub value: Complex64,
    pub error_estimate: f64,
    pub level: u32,
    pub nodes: usize,
    pub paths: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub nodes_used: usize,
    pub converged: bool,
    pub terms: Vec<TermDiagnostic>,
}

const TANH_SINH_RANGE: f64 = 5.0;

/// Nodes and weights of the 10-point Gauss–Legendre rule on [-1, 1].
fn gauss_legendre_10() -> [(f64, f64); 10] {
    let n = 10;
    let mut out = [(0.0, 0.0); 10];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out[n - 1 - i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
    }
    out
}

/// Parameter nodes on [0, 1] with weights, ascending in t.
fn rule_nodes(rule: RuleKind, level: u32, gl: &[(f64, f64); 10]) -> Vec<(f64, f64, f64)> {
    match rule {
        RuleKind::PeriodicTrapezoid => {
            let n = 8usize << level;
            (0..n)
                .map(|k| {
                    let t = k as f64 / n as f64;
                    (t, 1.0 - t, 1.0 / n as f64)
                })
                .collect()
        }
        RuleKind::GaussLegendre | RuleKind::TruncatedRay => {
            let panels = 1usize << level;
            let width = 1.0 / panels as f64;
            let mut out = Vec::with_capacity(panels * 10);
            for k in 0..panels {
                for &(x, w) in gl {
                    let local = 0.5 * (x + 1.0);
                    let t = (k as f64 + local) * width;
                    let tc = ((panels - k) as f64 - local) * width;
                    out.push((t, tc, 0.5 * w * width));
                }
            }
            out
        }
        RuleKind::TanhSinh => {
            let h = 1.0 / (1u64 << level) as f64;
            let j_max = (TANH_SINH_RANGE / h).ceil() as i64;
            let mut out = Vec::with_capacity(2 * j_max as usize + 1);
            for j in -j_max..=j_max {
                let tau = j as f64 * h;
                let u = FRAC_PI_2 * tau.sinh();
                let t = 1.0 / (1.0 + (-2.0 * u).exp());
                let tc = 1.0 / (1.0 + (2.0 * u).exp());
                let e = (-2.0 * u.abs()).exp();
                let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
                let w = 0.5 * h * FRAC_PI_2 * tau.cosh() * sech2;
                if w > 0.0 && t > 0.0 && tc > 0.0 {
                    out.push((t, tc, w));
                }
            }
            out
        }
    }
}

/// All nodes of a path at a level, ascending along the path, with complex
/// weights including dx/dt.
pub fn path_nodes(path: &ResolvedPath, level: u32) -> Vec<(PathParam, Complex64)> {
    let gl = gauss_legendre_10();
    let mut out = Vec::new();
    for (seg_index, seg) in path.segments.iter().enumerate() {
        for (t, tc, w) in rule_nodes(seg.rule, level, &gl) {
            let param = PathParam { seg: seg_index, t, tc };
            out.push((param, seg.derivative(&param) * w));
        }
    }
    out
}

fn integrate_axis(
    integrand: &Integrand,
    paths: &[ResolvedPath],
    nodes: &[Vec<(PathParam, Complex64)>],
    params: &[Vec<PathParam>],
    axis: usize,
    anchor: &Sample,
) -> Result<Complex64> {
    let samples = transport_from_anchor(integrand, &paths[axis], axis, anchor, &params[axis])?;
    let mut sum = Complex64::zero();
    for (sample, &(_, w)) in samples.iter().zip(&nodes[axis]) {
        let inner = if axis + 1 == paths.len() {
            integrand.eval(&sample.values, &sample.state)?
        } else {
            let next = Sample { param: paths[axis + 1].anchor, ..sample.clone() };
            integrate_axis(integrand, paths, nodes, params, axis + 1, &next)?
        };
        sum += w * inner;
    }
    Ok(sum)
}

/// Tensor-product value of one product chain at a fixed level.
pub fn integrate_product(integrand: &Integrand, paths: &[ResolvedPath], level: u32) -> Result<(Complex64, usize)> {
    let (coords, state, values) = anchor_sample(integrand, paths)?;
    let nodes: Vec<Vec<(PathParam, Complex64)>> = paths.iter().map(|p| path_nodes(p, level)).collect();
    let params: Vec<Vec<PathParam>> = nodes.iter().map(|n| n.iter().map(|(p, _)| *p).collect()).collect();
    let count = nodes.iter().map(Vec::len).product();
    let anchor = Sample { param: paths[0].anchor, coords, values, state };
    Ok((integrate_axis(integrand, paths, &nodes, &params, 0, &anchor)?, count))
}

/// Resolves the paths of a product chain. A provisional pass places the
/// other coordinates at generic points; the final pass uses the anchors.
pub fn resolve_term(integrand: &Integrand, paths: &[Path1D]) -> Result<Vec<ResolvedPath>> {
    let m = paths.len();
    if m == 1 {
        return Ok(vec![resolve_path(integrand, &paths[0], 0, &[Coord::at(Complex64::zero())])?]);
    }
    let generic: Vec<Coord> = (0..m).map(|p| Coord::at(Complex64::new(0.37 + 0.11 * p as f64, 0.23))).collect();
    let mut provisional = Vec::with_capacity(m);
    for (p, path) in paths.iter().enumerate() {
        provisional.push(resolve_path(integrand, path, p, &generic)?);
    }
    let anchors: Vec<Coord> = provisional.iter().map(|r| r.point(&r.anchor)).collect();
    let mut out = Vec::with_capacity(m);
    for (p, path) in paths.iter().enumerate() {
        out.push(resolve_path(integrand, path, p, &anchors)?);
    }
    Ok(out)
}

fn converged(err: f64, value: Complex64, tol: f64) -> bool {
    err <= tol * value.norm().max(1.0)
}

/// Integrates one product chain with level refinement and, when rays were
/// truncated automatically, a check at doubled ray length.
pub fn integrate_term(
    integrand: &Integrand,
    paths: &[Path1D],
    settings: &QuadratureSettings,
) -> Result<TermDiagnostic> {
    let resolved = resolve_term(integrand, paths)?;
    if let Some(level) = settings.fixed_level {
        let (value, nodes) = integrate_product(integrand, &resolved, level)?;
        return Ok(TermDiagnostic {
            value,
            error_estimate: 0.0,
            level,
            nodes,
            paths: resolved.iter().map(describe).collect(),
        });
    }
    let mut nodes_used = 0;
    let (mut previous, n) = integrate_product(integrand, &resolved, settings.min_level.saturating_sub(1))?;
    nodes_used += n;
    let mut level = settings.min_level;
    let (mut value, mut err);
    loop {
        let (v, n) = integrate_product(integrand, &resolved, level)?;
        nodes_used += n;
        value = v;
        err = (v - previous).norm();
        if converged(err, v, settings.tol) || level >= settings.max_level {
            break;
        }
        previous = v;
        level += 1;
    }
    let auto_rays = resolved
        .iter()
        .any(|p| p.segments.iter().any(|s| matches!(s.shape, ResolvedShape::Ray { auto_length: true, .. })));
    if auto_rays {
        let doubled: Vec<ResolvedPath> = resolved.iter().map(|p| p.with_scaled_rays(2.0)).collect();
        let (v2, n) = integrate_product(integrand, &doubled, (level + 1).min(settings.max_level + 1))?;
        nodes_used += n;
        err = err.max((v2 - value).norm());
    }
    Ok(TermDiagnostic {
        value,
        error_estimate: err,
        level,
        nodes: nodes_used,
        paths: resolved.iter().map(describe).collect(),
    })
}

/// Σ_k c_k ∫_{γ_k} over the cycle; term error estimates combine in quadrature.
pub fn integrate_cycle(
    integrand: &Integrand,
    cycle: &CycleSpec,
    settings: &QuadratureSettings,
) -> Result<IntegralResult> {
    cycle.validate(integrand.m())?;
    let mut value = Complex64::zero();
    let mut error_sq = 0.0;
    let mut nodes_used = 0;
    let mut terms = Vec::with_capacity(cycle.terms.len());
    let mut all_converged = true;
    for term in &cycle.terms {
        let d = integrate_term(integrand, &term.paths, settings)?;
        value += term.multiplicity * d.value;
        let e = term.multiplicity.norm() * d.error_estimate;
        error_sq += e * e;
        nodes_used += d.nodes;
        all_converged &= converged(d.error_estimate, d.value, settings.tol);
        terms.push(d);
    }
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::NonFinite { location: Complex64::zero() });
    }
    Ok(IntegralResult { value, error_estimate: error_sq.sqrt(), nodes_used, converged: all_converged, terms })
}

/// Like [`integrate_cycle`] but reports a failure to converge as an error.
pub fn integrate_cycle_strict(
    integrand: &Integrand,
    cycle: &CycleSpec,
    settings: &QuadratureSettings,
) -> Result<IntegralResult> {
    let r = integrate_cycle(integrand, cycle, settings)?;
    if !r.converged {
        return Err(Error::Unconverged { value: r.value, error_estimate: r.error_estimate });
    }
    Ok(r)
}

pub fn rule_name(rule: RuleKind) -> String {
    format!("{:?}", rule)
}
