//! Integration chains and continuous branch selection for the multivalued
//! integrand `Π f_i^{λ_i} · Π exp(f_i) · Π x_p^{β_p − 1}`.
//!
//! A cycle is a complex-weighted sum of product chains; each factor of a
//! product is a planar path made of lines, arcs and rays. Along a path the
//! logarithm of every non-integer power is continued by requiring that each
//! step changes its imaginary part by less than π/2, bisecting where needed.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly;
use crate::quadrature::RuleKind;
use crate::scenario::{FactorKind, ScenarioSpec};

/// Maximum number of bisections per continuation step.
pub const MAX_REFINEMENT_DEPTH: usize = 40;
/// |f| below this multiple of its magnitude scale counts as a zero.
pub const SINGULAR_THRESHOLD: f64 = 1e-10;
/// A ray is truncated once the integrand tip is this small relative to its maximum.
pub const RAY_DECAY_RATIO: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Endpoint {
    Point(Complex64),
    /// The zero of a univariate factor (0-based index) closest to `near`,
    /// recomputed for every coefficient vector.
    RootOf {
        factor: usize,
        near: Complex64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentShape {
    Line {
        start: Endpoint,
        end: Endpoint,
    },
    Arc {
        center: Complex64,
        radius: f64,
        angle_start: f64,
        angle_end: f64,
    },
    /// `start + direction·s` for `s ∈ [0, length]`; traversed towards the
    /// start when `inward`. Without a length the decay policy picks one.
    Ray {
        start: Endpoint,
        direction: Complex64,
        length: Option<f64>,
        inward: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSegment {
    pub shape: SegmentShape,
    pub rule: Option<RuleKind>,
}

impl PathSegment {
    pub fn line(start: Complex64, end: Complex64) -> Self {
        PathSegment {
            shape: SegmentShape::Line { start: Endpoint::Point(start), end: Endpoint::Point(end) },
            rule: None,
        }
    }

    pub fn arc(center: Complex64, radius: f64, angle_start: f64, angle_end: f64) -> Self {
        PathSegment { shape: SegmentShape::Arc { center, radius, angle_start, angle_end }, rule: None }
    }

    pub fn circle(center: Complex64, radius: f64) -> Self {
        Self::arc(center, radius, 0.0, TAU)
    }

    pub fn ray(start: Complex64, direction: Complex64, inward: bool) -> Self {
        PathSegment {
            shape: SegmentShape::Ray {
                start: Endpoint::Point(start),
                direction: direction / direction.norm(),
                length: None,
                inward,
            },
            rule: None,
        }
    }

    pub fn with_rule(mut self, rule: RuleKind) -> Self {
        self.rule = Some(rule);
        self
    }

    fn reversed(&self) -> Self {
        let shape = match self.shape {
            SegmentShape::Line { start, end } => SegmentShape::Line { start: end, end: start },
            SegmentShape::Arc { center, radius, angle_start, angle_end } => {
                SegmentShape::Arc { center, radius, angle_start: angle_end, angle_end: angle_start }
            }
            SegmentShape::Ray { start, direction, length, inward } => {
                SegmentShape::Ray { start, direction, length, inward: !inward }
            }
        };
        PathSegment { shape, rule: self.rule }
    }
}

/// One planar path with optional branch offsets: `factor_turns[i]` adds
/// `2πi·k` to the starting log of factor i, `coordinate_turns` to the log of
/// the path's own coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct Path1D {
    pub segments: Vec<PathSegment>,
    pub closed: bool,
    pub factor_turns: Vec<i64>,
    pub coordinate_turns: i64,
}

impl Path1D {
    pub fn new(segments: Vec<PathSegment>, closed: bool) -> Self {
        Path1D { segments, closed, factor_turns: Vec::new(), coordinate_turns: 0 }
    }

    pub fn with_factor_turns(mut self, turns: Vec<i64>) -> Self {
        self.factor_turns = turns;
        self
    }

    /// Same point set traversed backwards.
    pub fn reversed(&self) -> Self {
        Path1D {
            segments: self.segments.iter().rev().map(PathSegment::reversed).collect(),
            closed: self.closed,
            factor_turns: self.factor_turns.clone(),
            coordinate_turns: self.coordinate_turns,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleTerm {
    pub multiplicity: Complex64,
    pub paths: Vec<Path1D>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleSpec {
    pub terms: Vec<CycleTerm>,
}

impl CycleSpec {
    pub fn single(path: Path1D) -> Self {
        CycleSpec { terms: vec![CycleTerm { multiplicity: Complex64::one(), paths: vec![path] }] }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::InvalidCycle("a cycle needs at least one term".into()));
        }
        for (k, term) in self.terms.iter().enumerate() {
            if term.paths.len() != m {
                return Err(Error::InvalidCycle(format!(
                    "term {} has {} path factors, expected m = {}",
                    k + 1,
                    term.paths.len(),
                    m
                )));
            }
            for path in &term.paths {
                if path.segments.is_empty() {
                    return Err(Error::InvalidCycle(format!("term {} has an empty path", k + 1)));
                }
            }
        }
        Ok(())
    }
}

/// Exponent of a power, split so integer powers avoid branch tracking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Integer(i32),
    General(Complex64),
}

impl Exponent {
    pub fn of(z: Complex64) -> Self {
        let r = z.re.round();
        if z.im == 0.0 && (z.re - r).abs() <= 1e-12 && r.abs() < 1e6 {
            Exponent::Integer(r as i32)
        } else {
            Exponent::General(z)
        }
    }

    fn needs_branch(&self) -> bool {
        matches!(self, Exponent::General(_))
    }

    /// Whether a zero of the base is a singularity (branch point or pole).
    fn singular_at_zero(&self) -> bool {
        match self {
            Exponent::Integer(k) => *k < 0,
            Exponent::General(_) => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum TermKind {
    Power(Exponent),
    Exp,
    Log,
}

#[derive(Clone, Debug)]
struct FactorTerm {
    kind: TermKind,
    monomials: Vec<Vec<u32>>,
    coeffs: Vec<Complex64>,
    /// Dense ascending coefficients when the factor involves one coordinate only.
    univariate: Option<(usize, Vec<Complex64>)>,
}

impl FactorTerm {
    fn tracked(&self) -> bool {
        match self.kind {
            TermKind::Power(e) => e.needs_branch(),
            TermKind::Log => true,
            TermKind::Exp => false,
        }
    }

    fn singular_at_zero(&self) -> bool {
        match self.kind {
            TermKind::Power(e) => e.singular_at_zero(),
            TermKind::Log => true,
            TermKind::Exp => false,
        }
    }
}

/// A coordinate value stored relative to a base point. Near singular segment
/// endpoints the offset is kept separately so factors vanishing at the
/// endpoint are evaluated without cancellation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coord {
    pub base: Complex64,
    pub offset: Complex64,
    pub near_singular_end: bool,
}

impl Coord {
    pub fn at(z: Complex64) -> Self {
        Coord { base: z, offset: Complex64::zero(), near_singular_end: false }
    }

    pub fn value(&self) -> Complex64 {
        self.base + self.offset
    }
}

/// Continuous logarithms of the tracked quantities at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchState {
    pub factor_logs: Vec<Option<Complex64>>,
    pub coord_logs: Vec<Option<Complex64>>,
}

/// Factor values and coordinate values at a point.
#[derive(Clone, Debug)]
pub struct PointValues {
    pub factors: Vec<Complex64>,
    pub coords: Vec<Complex64>,
}

/// The integrand `g(f(x))·x^(β−1)` of a scenario at fixed coefficients.
#[derive(Clone, Debug)]
pub struct Integrand {
    m: usize,
    factors: Vec<FactorTerm>,
    twist: Vec<Exponent>,
}

fn principal_log(z: Complex64) -> Complex64 {
    Complex64::new(z.norm().ln(), z.arg())
}

/// Log of `z` on the sheet closest to `guess`.
fn log_near(z: Complex64, guess: Complex64) -> Complex64 {
    let arg = z.arg();
    let k = ((guess.im - arg) / TAU).round();
    Complex64::new(z.norm().ln(), arg + TAU * k)
}

impl Integrand {
    pub fn new(scenario: &ScenarioSpec) -> Self {
        let m = scenario.m();
        let factors = scenario
            .factors()
            .iter()
            .map(|f| {
                let kind = match f.kind {
                    FactorKind::Power(l) => TermKind::Power(Exponent::of(l)),
                    FactorKind::Exp => TermKind::Exp,
                    FactorKind::Log => TermKind::Log,
                };
                let univariate = (0..m).find(|&p| f.is_univariate_in(p)).map(|p| {
                    let deg = f.monomials.iter().map(|mono| mono.0[p]).max().unwrap_or(0) as usize;
                    let mut dense = vec![Complex64::zero(); deg + 1];
                    for (mono, c) in f.monomials.iter().zip(&f.coefficients) {
                        dense[mono.0[p] as usize] += *c;
                    }
                    (p, dense)
                });
                FactorTerm {
                    kind,
                    monomials: f.monomials.iter().map(|mono| mono.0.clone()).collect(),
                    coeffs: f.coefficients.clone(),
                    univariate,
                }
            })
            .collect();
        let twist = scenario.twist().iter().map(|b| Exponent::of(b - 1.0)).collect();
        Integrand { m, factors, twist }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    /// Dense coefficients of factor `i` if it only involves coordinate `p`.
    pub fn univariate_coefficients(&self, i: usize, p: usize) -> Option<&[Complex64]> {
        match &self.factors[i].univariate {
            Some((q, c)) if *q == p => Some(c),
            _ => None,
        }
    }

    fn coord_tracked(&self, p: usize) -> bool {
        self.twist[p].needs_branch()
    }

    /// Value of factor `i`, its magnitude scale, and whether it was evaluated
    /// relative to an endpoint where it vanishes.
    fn factor_value(&self, i: usize, coords: &[Coord]) -> (Complex64, f64, bool) {
        let f = &self.factors[i];
        if let Some((p, dense)) = &f.univariate {
            let c = coords[*p];
            if c.near_singular_end {
                let scale_base = poly::magnitude_scale(dense, c.base);
                let at_base = poly::eval(dense, c.base);
                if at_base.norm() <= 1e-12 * scale_base {
                    let mut shifted = poly::taylor_shift(dense, c.base);
                    shifted[0] = Complex64::zero();
                    let v = poly::eval(&shifted, c.offset);
                    return (v, poly::magnitude_scale(dense, c.value()), true);
                }
            }
            let x = c.value();
            return (poly::eval(dense, x), poly::magnitude_scale(dense, x), false);
        }
        let xs: Vec<Complex64> = coords.iter().map(Coord::value).collect();
        let mut value = Complex64::zero();
        let mut scale = 0.0;
        for (mono, c) in f.monomials.iter().zip(&f.coeffs) {
            let mut term = *c;
            for (x, &e) in xs.iter().zip(mono) {
                if e > 0 {
                    term *= x.powu(e);
                }
            }
            value += term;
            scale += term.norm();
        }
        (value, scale, false)
    }

    /// Evaluates factors and coordinates at a point and checks that no
    /// singular quantity vanishes there.
    pub fn point_values(&self, coords: &[Coord]) -> Result<PointValues> {
        let mut factors = Vec::with_capacity(self.factors.len());
        for (i, term) in self.factors.iter().enumerate() {
            let (v, scale, anchored) = self.factor_value(i, coords);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite { location: coords[0].value() });
            }
            if term.singular_at_zero() {
                let vanishes = if anchored { v.is_zero() } else { v.norm() <= SINGULAR_THRESHOLD * scale };
                if vanishes {
                    return Err(Error::PathThroughSingularity {
                        location: coords[0].value(),
                        what: format!("factor {}", i + 1),
                    });
                }
            }
            factors.push(v);
        }
        let mut xs = Vec::with_capacity(self.m);
        for (p, c) in coords.iter().enumerate() {
            let x = c.value();
            if self.twist[p].singular_at_zero() {
                let vanishes = if c.near_singular_end && c.base.is_zero() {
                    x.is_zero()
                } else {
                    x.norm() <= 1e-14 * c.base.norm().max(1.0)
                };
                if vanishes {
                    return Err(Error::PathThroughSingularity { location: x, what: format!("x{}", p + 1) });
                }
            }
            xs.push(x);
        }
        Ok(PointValues { factors, coords: xs })
    }

    /// Principal-branch state at a point, shifted by whole turns.
    pub fn principal_state(&self, values: &PointValues, factor_turns: &[i64], coord_turns: &[i64]) -> BranchState {
        let factor_logs = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, term)| {
                term.tracked().then(|| {
                    let k = factor_turns.get(i).copied().unwrap_or(0) as f64;
                    principal_log(values.factors[i]) + Complex64::new(0.0, TAU * k)
                })
            })
            .collect();
        let coord_logs = (0..self.m)
            .map(|p| {
                self.coord_tracked(p).then(|| {
                    let k = coord_turns.get(p).copied().unwrap_or(0) as f64;
                    principal_log(values.coords[p]) + Complex64::new(0.0, TAU * k)
                })
            })
            .collect();
        BranchState { factor_logs, coord_logs }
    }

    /// Largest |Im Δlog| between two evaluated points, over tracked quantities.
    fn max_phase_step(&self, from: &PointValues, to: &PointValues) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, term) in self.factors.iter().enumerate() {
            if term.tracked() {
                worst = worst.max((to.factors[i] / from.factors[i]).arg().abs());
            }
        }
        for p in 0..self.m {
            if self.coord_tracked(p) {
                worst = worst.max((to.coords[p] / from.coords[p]).arg().abs());
            }
        }
        worst
    }

    fn advance_state(&self, from: &BranchState, from_v: &PointValues, to_v: &PointValues) -> BranchState {
        let step = |l: &Option<Complex64>, a: Complex64, b: Complex64| {
            l.map(|l| {
                let guess = l + principal_log(b / a);
                log_near(b, guess)
            })
        };
        BranchState {
            factor_logs: from
                .factor_logs
                .iter()
                .enumerate()
                .map(|(i, l)| step(l, from_v.factors[i], to_v.factors[i]))
                .collect(),
            coord_logs: from
                .coord_logs
                .iter()
                .enumerate()
                .map(|(p, l)| step(l, from_v.coords[p], to_v.coords[p]))
                .collect(),
        }
    }

    /// `Π power · Π exp · Π twist` at a point on the branch `state`. The dx
    /// factor is supplied by the quadrature.
    pub fn eval(&self, values: &PointValues, state: &BranchState) -> Result<Complex64> {
        let mut log_part = Complex64::zero();
        let mut mult = Complex64::one();
        for (i, term) in self.factors.iter().enumerate() {
            let f = values.factors[i];
            match term.kind {
                TermKind::Power(Exponent::Integer(k)) => mult *= f.powi(k),
                TermKind::Power(Exponent::General(l)) => {
                    log_part += l * state.factor_logs[i].expect("tracked factor has a log")
                }
                TermKind::Exp => log_part += f,
                TermKind::Log => mult *= state.factor_logs[i].expect("tracked factor has a log"),
            }
        }
        for (p, e) in self.twist.iter().enumerate() {
            match *e {
                Exponent::Integer(0) => {}
                Exponent::Integer(k) => mult *= values.coords[p].powi(k),
                Exponent::General(b) => log_part += b * state.coord_logs[p].expect("tracked coordinate"),
            }
        }
        let v = mult * log_part.exp();
        if !v.re.is_finite() || !v.im.is_finite() {
            let location = values.coords.first().copied().unwrap_or_default();
            return Err(Error::NonFinite { location });
        }
        Ok(v)
    }

    /// Convenience form of [`Integrand::eval`] taking raw coordinates.
    pub fn eval_at(&self, x: &[Complex64], state: &BranchState) -> Result<Complex64> {
        let coords: Vec<Coord> = x.iter().map(|&z| Coord::at(z)).collect();
        let values = self.point_values(&coords)?;
        self.eval(&values, state)
    }

    /// Principal-branch log-magnitude, used to pick ray truncation lengths.
    fn log_magnitude(&self, coords: &[Coord]) -> f64 {
        let mut total = 0.0;
        for (i, term) in self.factors.iter().enumerate() {
            let (f, _, _) = self.factor_value(i, coords);
            total += match term.kind {
                TermKind::Power(Exponent::Integer(k)) => k as f64 * f.norm().ln(),
                TermKind::Power(Exponent::General(l)) => (l * principal_log(f)).re,
                TermKind::Exp => f.re,
                TermKind::Log => principal_log(f).norm().ln(),
            };
        }
        for (p, e) in self.twist.iter().enumerate() {
            let x = coords[p].value();
            total += match *e {
                Exponent::Integer(0) => 0.0,
                Exponent::Integer(k) => k as f64 * x.norm().ln(),
                Exponent::General(b) => (b * principal_log(x)).re,
            };
        }
        total
    }

    /// Whether a point of coordinate `p` is a singular endpoint: a zero of a
    /// univariate singular factor, or 0 under a singular twist.
    fn is_singular_point(&self, p: usize, z: Complex64) -> bool {
        if self.twist[p].singular_at_zero() && z.norm() <= 1e-14 {
            return true;
        }
        self.factors.iter().any(|term| match &term.univariate {
            Some((q, dense)) if *q == p && term.singular_at_zero() => {
                poly::eval(dense, z).norm() <= 1e-12 * poly::magnitude_scale(dense, z)
            }
            _ => false,
        })
    }
}

/// Position on a path: segment index and the local parameter `t ∈ [0, 1]`
/// together with its complement `1 − t`, both kept to full relative accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathParam {
    pub seg: usize,
    pub t: f64,
    pub tc: f64,
}

impl PathParam {
    pub fn new(seg: usize, t: f64) -> Self {
        PathParam { seg, t, tc: 1.0 - t }
    }

    pub fn start_of(seg: usize) -> Self {
        PathParam { seg, t: 0.0, tc: 1.0 }
    }

    pub fn end_of(seg: usize) -> Self {
        PathParam { seg, t: 1.0, tc: 0.0 }
    }

    fn midpoint(&self, other: &PathParam) -> PathParam {
        PathParam { seg: self.seg, t: 0.5 * (self.t + other.t), tc: 0.5 * (self.tc + other.tc) }
    }

    pub fn cmp_along(&self, other: &PathParam) -> Ordering {
        self.seg
            .cmp(&other.seg)
            .then(self.t.partial_cmp(&other.t).unwrap_or(Ordering::Equal))
            .then(other.tc.partial_cmp(&self.tc).unwrap_or(Ordering::Equal))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResolvedShape {
    Line { start: Complex64, end: Complex64 },
    Arc { center: Complex64, radius: f64, angle_start: f64, angle_end: f64 },
    Ray { start: Complex64, direction: Complex64, length: f64, inward: bool, auto_length: bool },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedSegment {
    pub shape: ResolvedShape,
    pub rule: RuleKind,
    pub singular_start: bool,
    pub singular_end: bool,
}

impl ResolvedSegment {
    pub fn start_point(&self) -> Complex64 {
        self.point(&PathParam::start_of(0)).value()
    }

    pub fn end_point(&self) -> Complex64 {
        self.point(&PathParam::end_of(0)).value()
    }

    pub fn point(&self, p: &PathParam) -> Coord {
        let near = 1e-3;
        match self.shape {
            ResolvedShape::Line { start, end } => {
                let d = end - start;
                if p.t <= 0.5 {
                    Coord { base: start, offset: d * p.t, near_singular_end: self.singular_start && p.t < near }
                } else {
                    Coord { base: end, offset: -d * p.tc, near_singular_end: self.singular_end && p.tc < near }
                }
            }
            ResolvedShape::Arc { center, radius, angle_start, angle_end } => {
                let theta = angle_start + (angle_end - angle_start) * p.t;
                Coord::at(center + Complex64::from_polar(radius, theta))
            }
            ResolvedShape::Ray { start, direction, length, inward, .. } => {
                // distance from the finite end
                let s = if inward { p.tc } else { p.t };
                let singular = if inward { self.singular_end } else { self.singular_start };
                Coord { base: start, offset: direction * (length * s), near_singular_end: singular && s < near }
            }
        }
    }

    /// dx/dt.
    pub fn derivative(&self, p: &PathParam) -> Complex64 {
        match self.shape {
            ResolvedShape::Line { start, end } => end - start,
            ResolvedShape::Arc { radius, angle_start, angle_end, .. } => {
                let span = angle_end - angle_start;
                let theta = angle_start + span * p.t;
                Complex64::new(0.0, span) * Complex64::from_polar(radius, theta)
            }
            ResolvedShape::Ray { direction, length, inward, .. } => {
                if inward {
                    -direction * length
                } else {
                    direction * length
                }
            }
        }
    }
}

/// A path whose endpoints, ray lengths and quadrature rules have been fixed
/// for one coefficient vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedPath {
    pub segments: Vec<ResolvedSegment>,
    pub closed: bool,
    pub anchor: PathParam,
    pub factor_turns: Vec<i64>,
    pub coordinate_turns: i64,
}

impl ResolvedPath {
    pub fn point(&self, p: &PathParam) -> Coord {
        self.segments[p.seg].point(p)
    }

    pub fn has_rays(&self) -> bool {
        self.segments.iter().any(|s| matches!(s.shape, ResolvedShape::Ray { .. }))
    }

    pub fn with_scaled_rays(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for seg in &mut out.segments {
            if let ResolvedShape::Ray { length, .. } = &mut seg.shape {
                *length *= factor;
            }
        }
        out
    }
}

fn resolve_endpoint(integrand: &Integrand, p: usize, e: Endpoint) -> Result<(Complex64, bool)> {
    match e {
        Endpoint::Point(z) => Ok((z, integrand.is_singular_point(p, z))),
        Endpoint::RootOf { factor, near } => {
            if factor >= integrand.factor_count() {
                return Err(Error::InvalidCycle(format!("endpoint refers to missing factor {}", factor + 1)));
            }
            let dense = integrand.univariate_coefficients(factor, p).ok_or_else(|| {
                Error::InvalidCycle(format!(
                    "factor {} must depend on x{} only to serve as an endpoint",
                    factor + 1,
                    p + 1
                ))
            })?;
            let (root, ok) = poly::newton_polish(dense, near, 1e-14, 60);
            if !ok {
                return Err(Error::InvalidCycle(format!("no zero of factor {} found near {}", factor + 1, near)));
            }
            Ok((root, integrand.factors[factor].singular_at_zero() || integrand.is_singular_point(p, root)))
        }
    }
}

/// Smallest power-of-two length (times the distance scale of the start)
/// at which the integrand tip falls below [`RAY_DECAY_RATIO`] of the maximum
/// sampled along the ray.
fn ray_truncation(
    integrand: &Integrand,
    p: usize,
    fixed: &[Coord],
    start: Complex64,
    direction: Complex64,
) -> Result<f64> {
    let unit = start.norm().max(1.0);
    let threshold = RAY_DECAY_RATIO.ln();
    let mut coords = fixed.to_vec();
    let mut max_log = f64::NEG_INFINITY;
    let mut length = unit;
    for _ in 0..30 {
        for k in 1..=32 {
            let s = length * k as f64 / 32.0;
            coords[p] = Coord::at(start + direction * s);
            let lm = integrand.log_magnitude(&coords);
            if lm.is_finite() {
                max_log = max_log.max(lm);
            }
        }
        coords[p] = Coord::at(start + direction * length);
        let tip = integrand.log_magnitude(&coords);
        if tip.is_finite() && max_log.is_finite() && tip - max_log < threshold {
            return Ok(length);
        }
        if tip == f64::NEG_INFINITY {
            return Ok(length);
        }
        length *= 2.0;
    }
    Err(Error::NonDecayingRay { direction })
}

/// Resolves the path on axis `p`. `fixed` supplies the other coordinates (the
/// anchors of the other paths) for ray-length selection and loop checks.
pub fn resolve_path(integrand: &Integrand, path: &Path1D, p: usize, fixed: &[Coord]) -> Result<ResolvedPath> {
    let mut segments = Vec::with_capacity(path.segments.len());
    for seg in &path.segments {
        let resolved = match seg.shape {
            SegmentShape::Line { start, end } => {
                let (a, sa) = resolve_endpoint(integrand, p, start)?;
                let (b, sb) = resolve_endpoint(integrand, p, end)?;
                let rule = seg.rule.unwrap_or(if sa || sb { RuleKind::TanhSinh } else { RuleKind::GaussLegendre });
                ResolvedSegment {
                    shape: ResolvedShape::Line { start: a, end: b },
                    rule,
                    singular_start: sa,
                    singular_end: sb,
                }
            }
            SegmentShape::Arc { center, radius, angle_start, angle_end } => {
                if !(radius > 0.0) || !angle_start.is_finite() || !angle_end.is_finite() {
                    return Err(Error::InvalidCycle("arc needs a positive radius and finite angles".into()));
                }
                ResolvedSegment {
                    shape: ResolvedShape::Arc { center, radius, angle_start, angle_end },
                    rule: seg.rule.unwrap_or(RuleKind::GaussLegendre),
                    singular_start: false,
                    singular_end: false,
                }
            }
            SegmentShape::Ray { start, direction, length, inward } => {
                let (a, sa) = resolve_endpoint(integrand, p, start)?;
                let direction = direction / direction.norm();
                let (len, auto_length) = match length {
                    Some(l) if l > 0.0 => (l, false),
                    Some(_) => return Err(Error::InvalidCycle("ray length must be positive".into())),
                    None => (ray_truncation(integrand, p, fixed, a, direction)?, true),
                };
                let rule = seg.rule.unwrap_or(if sa { RuleKind::TanhSinh } else { RuleKind::TruncatedRay });
                let (singular_start, singular_end) = if inward { (false, sa) } else { (sa, false) };
                ResolvedSegment {
                    shape: ResolvedShape::Ray { start: a, direction, length: len, inward, auto_length },
                    rule,
                    singular_start,
                    singular_end,
                }
            }
        };
        segments.push(resolved);
    }

    for (k, w) in segments.windows(2).enumerate() {
        let gap = (w[0].end_point() - w[1].start_point()).norm();
        if gap > 1e-12 * w[0].end_point().norm().max(1.0) {
            return Err(Error::InvalidCycle(format!("segments {} and {} do not share an endpoint", k + 1, k + 2)));
        }
    }
    if path.closed {
        let first = segments[0].start_point();
        let last = segments[segments.len() - 1].end_point();
        if (first - last).norm() > 1e-12 * first.norm().max(1.0) {
            return Err(Error::InvalidCycle("closed path does not return to its start".into()));
        }
    }

    let first = &segments[0];
    let anchor = match first.shape {
        ResolvedShape::Ray { inward: true, .. } if !first.singular_end => PathParam::end_of(0),
        ResolvedShape::Ray { inward: true, .. } => PathParam::new(0, 0.5),
        _ if first.singular_start => PathParam::new(0, 0.5),
        _ => PathParam::start_of(0),
    };

    let mut resolved = ResolvedPath {
        segments,
        closed: path.closed,
        anchor,
        factor_turns: path.factor_turns.clone(),
        coordinate_turns: path.coordinate_turns,
    };

    // Periodic trapezoid only pays off when the integrand returns to itself.
    let single_loop = resolved.segments.len() == 1
        && path.closed
        && matches!(resolved.segments[0].shape, ResolvedShape::Arc { .. })
        && path.segments[0].rule.is_none();
    if single_loop {
        let params: Vec<PathParam> = (0..=64).map(|k| PathParam::new(0, k as f64 / 64.0)).collect();
        let mut coords = fixed.to_vec();
        coords[p] = resolved.point(&params[0]);
        let values = integrand.point_values(&coords)?;
        let start = integrand.principal_state(&values, &[], &[]);
        let states = continue_branch(integrand, &resolved, p, fixed, &params, start.clone())?;
        let end = states.last().expect("nonempty");
        let periodic =
            start.factor_logs.iter().chain(&start.coord_logs).zip(end.factor_logs.iter().chain(&end.coord_logs)).all(
                |(a, b)| match (a, b) {
                    (Some(a), Some(b)) => (a - b).norm() <= 1e-8,
                    _ => true,
                },
            );
        if periodic {
            resolved.segments[0].rule = RuleKind::PeriodicTrapezoid;
        }
    }
    Ok(resolved)
}

/// A sample along a path: where it is, what the factors are there and which
/// branch is selected.
#[derive(Clone, Debug)]
pub struct Sample {
    pub param: PathParam,
    pub coords: Vec<Coord>,
    pub values: PointValues,
    pub state: BranchState,
}

struct Walker<'a> {
    integrand: &'a Integrand,
    path: &'a ResolvedPath,
    axis: usize,
    coords: Vec<Coord>,
}

impl<'a> Walker<'a> {
    fn values_at(&mut self, param: &PathParam) -> Result<PointValues> {
        self.coords[self.axis] = self.path.point(param);
        self.integrand.point_values(&self.coords)
    }

    /// Continues from `from` to `to` on the same segment, bisecting until the
    /// phase of every tracked quantity changes by less than π/2 per step.
    fn step_within(&mut self, from: &Sample, to: &PathParam, depth: usize) -> Result<Sample> {
        let to_values = self.values_at(to)?;
        if self.integrand.max_phase_step(&from.values, &to_values) < FRAC_PI_2 {
            let state = self.integrand.advance_state(&from.state, &from.values, &to_values);
            return Ok(Sample { param: *to, coords: self.coords.clone(), values: to_values, state });
        }
        if depth >= MAX_REFINEMENT_DEPTH {
            return Err(Error::UnresolvableBranch { location: self.coords[self.axis].value() });
        }
        let mid = from.param.midpoint(to);
        let half = self.step_within(from, &mid, depth + 1)?;
        self.step_within(&half, to, depth + 1)
    }

    /// Continues across segment junctions as needed.
    fn step(&mut self, from: &Sample, to: &PathParam) -> Result<Sample> {
        let mut current = from.clone();
        while current.param.seg != to.seg {
            if current.param.seg < to.seg {
                let end = PathParam::end_of(current.param.seg);
                current = self.step_within(&current, &end, 0)?;
                let next = PathParam::start_of(current.param.seg + 1);
                current = self.step_within(&current, &next, 0)?;
            } else {
                let start = PathParam::start_of(current.param.seg);
                current = self.step_within(&current, &start, 0)?;
                let prev = PathParam::end_of(current.param.seg - 1);
                current = self.step_within(&current, &prev, 0)?;
            }
        }
        self.step_within(&current, to, 0)
    }

    fn sample(&mut self, param: &PathParam, state: BranchState) -> Result<Sample> {
        let values = self.values_at(param)?;
        Ok(Sample { param: *param, coords: self.coords.clone(), values, state })
    }
}

/// Continues the branch `start` (valid at `params[0]`) along the listed
/// parameters of `path` on coordinate `axis`, the other coordinates held at
/// `fixed`. Returns one state per parameter.
pub fn continue_branch(
    integrand: &Integrand,
    path: &ResolvedPath,
    axis: usize,
    fixed: &[Coord],
    params: &[PathParam],
    start: BranchState,
) -> Result<Vec<BranchState>> {
    let Some(first) = params.first() else {
        return Ok(Vec::new());
    };
    let mut walker = Walker { integrand, path, axis, coords: fixed.to_vec() };
    let mut current = walker.sample(first, start)?;
    let mut out = Vec::with_capacity(params.len());
    out.push(current.state.clone());
    for param in &params[1..] {
        current = walker.step(&current, param)?;
        out.push(current.state.clone());
    }
    Ok(out)
}

/// Samples at `params` (sorted along the path) with branches obtained by
/// continuation from the anchor sample `anchor`.
pub fn transport_from_anchor(
    integrand: &Integrand,
    path: &ResolvedPath,
    axis: usize,
    anchor: &Sample,
    params: &[PathParam],
) -> Result<Vec<Sample>> {
    let mut walker = Walker { integrand, path, axis, coords: anchor.coords.clone() };
    let split = params.iter().position(|p| p.cmp_along(&anchor.param) != Ordering::Less).unwrap_or(params.len());
    let mut out: Vec<Option<Sample>> = vec![None; params.len()];
    let mut current = anchor.clone();
    for k in split..params.len() {
        current = walker.step(&current, &params[k])?;
        out[k] = Some(current.clone());
    }
    let mut current = anchor.clone();
    for k in (0..split).rev() {
        current = walker.step(&current, &params[k])?;
        out[k] = Some(current.clone());
    }
    Ok(out.into_iter().map(|s| s.expect("every sample filled")).collect())
}

/// Anchor sample of a product chain: every path at its anchor, principal
/// branch shifted by the declared turns.
pub fn anchor_sample(integrand: &Integrand, paths: &[ResolvedPath]) -> Result<(Vec<Coord>, BranchState, PointValues)> {
    let coords: Vec<Coord> = paths.iter().map(|p| p.point(&p.anchor)).collect();
    let values = integrand.point_values(&coords)?;
    let nf = integrand.factor_count();
    let mut factor_turns = vec![0i64; nf];
    for path in paths {
        for (i, k) in path.factor_turns.iter().enumerate().take(nf) {
            factor_turns[i] += k;
        }
    }
    let coord_turns: Vec<i64> = paths.iter().map(|p| p.coordinate_turns).collect();
    let state = integrand.principal_state(&values, &factor_turns, &coord_turns);
    Ok((coords, state, values))
}

/// Human-readable description of a resolved path, for diagnostics.
pub fn describe(path: &ResolvedPath) -> String {
    let parts: Vec<String> = path
        .segments
        .iter()
        .map(|s| match s.shape {
            ResolvedShape::Line { start, end } => format!("line {} → {} [{:?}]", start, end, s.rule),
            ResolvedShape::Arc { center, radius, angle_start, angle_end } => {
                format!("arc c={} r={} {:.4}→{:.4} [{:?}]", center, radius, angle_start, angle_end, s.rule)
            }
            ResolvedShape::Ray { start, direction, length, inward, .. } => format!(
                "ray {} dir {} len {} {} [{:?}]",
                start,
                direction,
                length,
                if inward { "in" } else { "out" },
                s.rule
            ),
        })
        .collect();
    parts.join("; ")
}
