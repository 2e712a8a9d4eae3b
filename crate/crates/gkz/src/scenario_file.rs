//! JSON scenario files. Complex numbers are `[re, im]` pairs (a bare number
//! is accepted for a real value); factor indices are 1-based as in printed
//! column labels.

use std::path::Path;

use gkz_core::paths::{CycleSpec, CycleTerm, Endpoint, Path1D, PathSegment, SegmentShape};
use gkz_core::periods::{FunctionKind, PeriodFunction};
use gkz_core::quadrature::{QuadratureSettings, RuleKind};
use gkz_core::scenario::{FactorKind, FactorSupport, Monomial, ScenarioSpec};
use gkz_core::system::DEFAULT_DEGREE_BOUND;
use gkz_core::verifier::{DiffSettings, DEFAULT_THRESHOLD};
use gkz_core::Error as CoreError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Pair([f64; 2]),
    Real(f64),
}

impl ComplexValue {
    pub fn get(&self) -> Complex64 {
        match *self {
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
        }
    }

    pub fn pair(z: Complex64) -> Self {
        ComplexValue::Pair([z.re, z.im])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKindName {
    Power,
    Exp,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorEntry {
    pub kind: FactorKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<ComplexValue>,
    pub support: Vec<Vec<u32>>,
    pub coefficients: Vec<ComplexValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EndpointEntry {
    Point(ComplexValue),
    RootOf { factor: usize, near: ComplexValue },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    PeriodicTrapezoid,
    GaussLegendre,
    TanhSinh,
    TruncatedRay,
}

impl From<RuleName> for RuleKind {
    fn from(r: RuleName) -> Self {
        match r {
            RuleName::PeriodicTrapezoid => RuleKind::PeriodicTrapezoid,
            RuleName::GaussLegendre => RuleKind::GaussLegendre,
            RuleName::TanhSinh => RuleKind::TanhSinh,
            RuleName::TruncatedRay => RuleKind::TruncatedRay,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentEntry {
    Line {
        start: EndpointEntry,
        end: EndpointEntry,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rule: Option<RuleName>,
    },
    Arc {
        center: ComplexValue,
        radius: f64,
        angle_start: f64,
        angle_end: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rule: Option<RuleName>,
    },
    /// A full counter-clockwise circle.
    Circle {
        center: ComplexValue,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rule: Option<RuleName>,
    },
    Ray {
        start: EndpointEntry,
        direction: ComplexValue,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length: Option<f64>,
        #[serde(default)]
        inward: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rule: Option<RuleName>,
    },
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEntry {
    pub segments: Vec<SegmentEntry>,
    #[serde(default)]
    pub closed: bool,
    /// Whole turns added to the starting log of each factor.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factor_turns: Vec<i64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub coordinate_turns: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermEntry {
    #[serde(default = "one")]
    pub multiplicity: ComplexValue,
    pub paths: Vec<PathEntry>,
}

fn one() -> ComplexValue {
    ComplexValue::Pair([1.0, 0.0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleEntry {
    pub terms: Vec<TermEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionEntry {
    Period { cycle: CycleEntry },
    Root { base_root: ComplexValue },
    GlResidue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureEntry {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_level")]
    pub max_level: u32,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_level() -> u32 {
    14
}

impl Default for QuadratureEntry {
    fn default() -> Self {
        QuadratureEntry { tol: default_tol(), max_level: default_max_level() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationEntry {
    #[serde(default = "default_degree_bound")]
    pub degree_bound: u32,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of points including the base point.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Perturbation radius relative to max(1, |a_k|).
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default = "default_radius")]
    pub radius_factor: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_degree_bound() -> u32 {
    DEFAULT_DEGREE_BOUND
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_seed() -> u64 {
    1
}

fn default_points() -> usize {
    3
}

fn default_perturbation() -> f64 {
    0.2
}

fn default_radius() -> f64 {
    DiffSettings::default().radius_factor
}

fn default_nodes() -> usize {
    DiffSettings::default().nodes
}

impl Default for VerificationEntry {
    fn default() -> Self {
        VerificationEntry {
            degree_bound: default_degree_bound(),
            threshold: default_threshold(),
            seed: default_seed(),
            points: default_points(),
            perturbation: default_perturbation(),
            radius_factor: default_radius(),
            nodes: default_nodes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub m: usize,
    pub factors: Vec<FactorEntry>,
    pub twist: Vec<ComplexValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen: Vec<Option<ComplexValue>>,
    pub function: FunctionEntry,
    #[serde(default)]
    pub quadrature: QuadratureEntry,
    #[serde(default)]
    pub verification: VerificationEntry,
}

/// A scenario file turned into the objects the library works with.
#[derive(Clone, Debug)]
pub struct Model {
    pub file: ScenarioFile,
    pub function: PeriodFunction,
}

impl Model {
    pub fn scenario(&self) -> &ScenarioSpec {
        self.function.scenario()
    }

    pub fn diff_settings(&self) -> DiffSettings {
        DiffSettings {
            radius_factor: self.file.verification.radius_factor,
            nodes: self.file.verification.nodes,
            ..DiffSettings::default()
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Invalid { path: path.into(), message: message.into() }
}

fn endpoint(e: &EndpointEntry, path: &str, factors: usize) -> Result<Endpoint, CliError> {
    match e {
        EndpointEntry::Point(z) => Ok(Endpoint::Point(z.get())),
        EndpointEntry::RootOf { factor, near } => {
            if *factor == 0 || *factor > factors {
                return Err(invalid(
                    format!("{path}.root_of.factor"),
                    format!("no factor {factor} (factors are numbered from 1)"),
                ));
            }
            Ok(Endpoint::RootOf { factor: factor - 1, near: near.get() })
        }
    }
}

fn segment(s: &SegmentEntry, path: &str, factors: usize) -> Result<PathSegment, CliError> {
    let (shape, rule) = match s {
        SegmentEntry::Line { start, end, rule } => (
            SegmentShape::Line {
                start: endpoint(start, &format!("{path}.start"), factors)?,
                end: endpoint(end, &format!("{path}.end"), factors)?,
            },
            rule,
        ),
        SegmentEntry::Arc { center, radius, angle_start, angle_end, rule } => {
            if !(*radius > 0.0) {
                return Err(invalid(format!("{path}.radius"), "radius must be positive"));
            }
            if !angle_start.is_finite() || !angle_end.is_finite() {
                return Err(invalid(path, "arc angles must be finite"));
            }
            (
                SegmentShape::Arc {
                    center: center.get(),
                    radius: *radius,
                    angle_start: *angle_start,
                    angle_end: *angle_end,
                },
                rule,
            )
        }
        SegmentEntry::Circle { center, radius, rule } => {
            if !(*radius > 0.0) {
                return Err(invalid(format!("{path}.radius"), "radius must be positive"));
            }
            (
                SegmentShape::Arc {
                    center: center.get(),
                    radius: *radius,
                    angle_start: 0.0,
                    angle_end: std::f64::consts::TAU,
                },
                rule,
            )
        }
        SegmentEntry::Ray { start, direction, length, inward, rule } => {
            let d = direction.get();
            if d.norm() == 0.0 || !d.norm().is_finite() {
                return Err(invalid(format!("{path}.direction"), "direction must be a nonzero finite number"));
            }
            if let Some(l) = length {
                if !(*l > 0.0) {
                    return Err(invalid(format!("{path}.length"), "length must be positive"));
                }
            }
            (
                SegmentShape::Ray {
                    start: endpoint(start, &format!("{path}.start"), factors)?,
                    direction: d / d.norm(),
                    length: *length,
                    inward: *inward,
                },
                rule,
            )
        }
    };
    Ok(PathSegment { shape, rule: rule.map(RuleKind::from) })
}

fn map_core(e: CoreError) -> CliError {
    match e {
        CoreError::EmptySupport { factor } => invalid(format!("factors[{}].support", factor - 1), e.to_string()),
        CoreError::DuplicateMonomial { factor } => invalid(format!("factors[{}].support", factor - 1), e.to_string()),
        CoreError::InvalidCycle(_) => invalid("function.cycle", e.to_string()),
        other => invalid("$", other.to_string()),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| invalid(format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<Model, CliError> {
        let m = self.m;
        if m == 0 {
            return Err(invalid("m", "m must be at least 1"));
        }
        if self.factors.is_empty() {
            return Err(invalid("factors", "at least one factor is required"));
        }
        let mut factors = Vec::with_capacity(self.factors.len());
        for (i, f) in self.factors.iter().enumerate() {
            let here = format!("factors[{i}]");
            let kind = match (f.kind, f.lambda) {
                (FactorKindName::Power, Some(l)) => FactorKind::Power(l.get()),
                (FactorKindName::Power, None) => {
                    return Err(invalid(format!("{here}.lambda"), "power factors need an exponent"))
                }
                (FactorKindName::Exp, None) => FactorKind::Exp,
                (FactorKindName::Log, None) => FactorKind::Log,
                (_, Some(_)) => return Err(invalid(format!("{here}.lambda"), "only power factors take an exponent")),
            };
            if f.support.len() != f.coefficients.len() {
                return Err(invalid(
                    format!("{here}.coefficients"),
                    format!("{} coefficients for {} monomials", f.coefficients.len(), f.support.len()),
                ));
            }
            for (k, mono) in f.support.iter().enumerate() {
                if mono.len() != m {
                    return Err(invalid(
                        format!("{here}.support[{k}]"),
                        format!("expected {m} exponents, found {}", mono.len()),
                    ));
                }
            }
            for (k, c) in f.coefficients.iter().enumerate() {
                let z = c.get();
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(invalid(format!("{here}.coefficients[{k}]"), "coefficients must be finite"));
                }
            }
            factors.push(FactorSupport::new(
                kind,
                f.support.iter().map(|e| Monomial::new(e.clone())).collect(),
                f.coefficients.iter().map(ComplexValue::get).collect(),
            ));
        }
        if self.twist.len() != m {
            return Err(invalid("twist", format!("expected {m} entries, found {}", self.twist.len())));
        }
        let frozen: Vec<Option<Complex64>> = if self.frozen.is_empty() {
            vec![None; m]
        } else if self.frozen.len() != m {
            return Err(invalid("frozen", format!("expected {m} entries, found {}", self.frozen.len())));
        } else {
            self.frozen.iter().map(|z| z.map(|z| z.get())).collect()
        };
        let twist = self.twist.iter().map(ComplexValue::get).collect();
        let scenario = ScenarioSpec::new(m, factors, twist, frozen).map_err(map_core)?;

        let kind = match &self.function {
            FunctionEntry::Period { cycle } => {
                if cycle.terms.is_empty() {
                    return Err(invalid("function.cycle.terms", "a cycle needs at least one term"));
                }
                let mut terms = Vec::with_capacity(cycle.terms.len());
                for (t, term) in cycle.terms.iter().enumerate() {
                    let here = format!("function.cycle.terms[{t}]");
                    if term.paths.len() != m {
                        return Err(invalid(
                            format!("{here}.paths"),
                            format!("expected {m} paths, found {}", term.paths.len()),
                        ));
                    }
                    let mut paths = Vec::with_capacity(m);
                    for (p, path) in term.paths.iter().enumerate() {
                        let here = format!("{here}.paths[{p}]");
                        if path.segments.is_empty() {
                            return Err(invalid(format!("{here}.segments"), "a path needs at least one segment"));
                        }
                        let segments = path
                            .segments
                            .iter()
                            .enumerate()
                            .map(|(s, seg)| segment(seg, &format!("{here}.segments[{s}]"), self.factors.len()))
                            .collect::<Result<Vec<_>, _>>()?;
                        paths.push(Path1D {
                            segments,
                            closed: path.closed,
                            factor_turns: path.factor_turns.clone(),
                            coordinate_turns: path.coordinate_turns,
                        });
                    }
                    terms.push(CycleTerm { multiplicity: term.multiplicity.get(), paths });
                }
                FunctionKind::Period(CycleSpec { terms })
            }
            FunctionEntry::Root { base_root } => FunctionKind::Root { base_root: base_root.get() },
            FunctionEntry::GlResidue => FunctionKind::GlResidue,
        };
        let mut function = PeriodFunction::new(scenario, kind).map_err(|e| invalid("function", e.to_string()))?;
        if !(self.quadrature.tol > 0.0) {
            return Err(invalid("quadrature.tol", "tolerance must be positive"));
        }
        function.quadrature = QuadratureSettings {
            tol: self.quadrature.tol,
            max_level: self.quadrature.max_level,
            ..QuadratureSettings::default()
        };
        let v = &self.verification;
        if v.degree_bound == 0 {
            return Err(invalid("verification.degree_bound", "degree bound must be at least 1"));
        }
        if !(v.threshold > 0.0) {
            return Err(invalid("verification.threshold", "threshold must be positive"));
        }
        if v.points == 0 {
            return Err(invalid("verification.points", "at least one point is required"));
        }
        let model = Model { file: self.clone(), function };
        model.diff_settings().validate().map_err(|e| invalid("verification", e.to_string()))?;
        Ok(model)
    }

    /// Canonical form: monomials sorted with their coefficients, every
    /// number written as a pair and all defaults spelled out.
    pub fn normalized(&self) -> Result<ScenarioFile, CliError> {
        let model = self.validate()?;
        let mut out = self.clone();
        for (entry, factor) in out.factors.iter_mut().zip(model.scenario().factors()) {
            entry.support = factor.monomials.iter().map(|m| m.0.clone()).collect();
            entry.coefficients = factor.coefficients.iter().map(|&z| ComplexValue::pair(z)).collect();
            entry.lambda = entry.lambda.map(|l| ComplexValue::pair(l.get()));
        }
        out.twist = out.twist.iter().map(|z| ComplexValue::pair(z.get())).collect();
        out.frozen = model.scenario().frozen().iter().map(|z| z.map(ComplexValue::pair)).collect();
        if out.frozen.iter().all(Option::is_none) {
            out.frozen.clear();
        }
        if let FunctionEntry::Period { cycle } = &mut out.function {
            for term in &mut cycle.terms {
                term.multiplicity = ComplexValue::pair(term.multiplicity.get());
                for path in &mut term.paths {
                    for seg in &mut path.segments {
                        normalize_segment(seg);
                    }
                }
            }
        }
        if let FunctionEntry::Root { base_root } = &mut out.function {
            *base_root = ComplexValue::pair(base_root.get());
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }
}

fn normalize_endpoint(e: &mut EndpointEntry) {
    match e {
        EndpointEntry::Point(z) => *z = ComplexValue::pair(z.get()),
        EndpointEntry::RootOf { near, .. } => *near = ComplexValue::pair(near.get()),
    }
}

fn normalize_segment(s: &mut SegmentEntry) {
    match s {
        SegmentEntry::Line { start, end, .. } => {
            normalize_endpoint(start);
            normalize_endpoint(end);
        }
        SegmentEntry::Arc { center, .. } | SegmentEntry::Circle { center, .. } => {
            *center = ComplexValue::pair(center.get())
        }
        SegmentEntry::Ray { start, direction, .. } => {
            normalize_endpoint(start);
            *direction = ComplexValue::pair(direction.get());
        }
    }
}

/// Parses a `--point` argument: a JSON list of numbers or `[re, im]` pairs.
pub fn parse_point(text: &str, expected: usize) -> Result<Vec<Complex64>, CliError> {
    let values: Vec<ComplexValue> = serde_json::from_str(text)
        .map_err(|e| invalid("--point", format!("expected a JSON list of numbers or [re, im] pairs: {e}")))?;
    if values.len() != expected {
        return Err(invalid("--point", format!("expected {expected} coefficients, found {}", values.len())));
    }
    Ok(values.iter().map(ComplexValue::get).collect())
}
