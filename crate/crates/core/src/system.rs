//! The annihilating system: Euler operators `Σ c·a∂ − κ` for every row of the
//! exponent matrix and box operators `∂^{u⁺} − ∂^{u⁻}` for kernel vectors.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{
    build_exponent_matrix, enumerate_box_vectors, integer_kernel_basis, BoxVector, ExponentMatrix, LatticeBasis,
    RowLabel,
};
use crate::scenario::{ColumnLabel, FactorKind, ScenarioSpec};

/// Default bound on |u⁺|₁ and |u⁻|₁ for enumerated box vectors.
pub const DEFAULT_DEGREE_BOUND: u32 = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct EulerOperator {
    pub weights: Vec<i64>,
    pub eigenvalue: Complex64,
    pub label: RowLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxOperator {
    pub vector: BoxVector,
}

impl BoxOperator {
    pub fn plus_multiindex(&self) -> &[u32] {
        &self.vector.plus
    }

    pub fn minus_multiindex(&self) -> &[u32] {
        &self.vector.minus
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GkzSystem {
    pub matrix: ExponentMatrix,
    /// One entry per matrix row; `None` for exponent rows of frozen coordinates.
    pub parameters: Vec<Option<Complex64>>,
    pub eulers: Vec<EulerOperator>,
    pub boxes: Vec<BoxOperator>,
    pub kernel: LatticeBasis,
    /// β_p per coordinate, kept for reporting the sign convention.
    pub twist: Vec<Complex64>,
    pub warnings: Vec<String>,
}

impl GkzSystem {
    /// Adds one to the eigenvalue of Euler operator `index`. Used as a negative
    /// control: the corrupted system must fail verification.
    pub fn corrupt_eigenvalue(&mut self, index: usize) {
        let op = &mut self.eulers[index];
        op.eigenvalue += Complex64::new(1.0, 0.0);
        if let Some(row) = self.matrix.row_labels.iter().position(|l| *l == op.label) {
            self.parameters[row] = Some(op.eigenvalue);
        }
    }
}

/// Eigenvalue of an indicator row. Power factors are homogeneous of degree λ;
/// the log factor of root functions gets 0 (the root is invariant under a
/// common rescaling of its polynomial's coefficients).
fn indicator_eigenvalue(kind: FactorKind) -> Option<Complex64> {
    match kind {
        FactorKind::Power(lambda) => Some(lambda),
        FactorKind::Log => Some(Complex64::new(0.0, 0.0)),
        FactorKind::Exp => None,
    }
}

pub fn build_system(scenario: &ScenarioSpec, degree_bound: u32) -> GkzSystem {
    let matrix = build_exponent_matrix(scenario);
    let kernel = integer_kernel_basis(&matrix);
    let enumeration = enumerate_box_vectors(&kernel, degree_bound);

    let mut parameters = Vec::with_capacity(matrix.row_count());
    let mut eulers = Vec::new();
    for (row, label) in matrix.rows.iter().zip(&matrix.row_labels) {
        let eigenvalue = match *label {
            RowLabel::Indicator(i) => indicator_eigenvalue(scenario.factors()[i - 1].kind),
            RowLabel::Exponent(p) => {
                if scenario.is_frozen(p - 1) {
                    None
                } else {
                    Some(-scenario.twist()[p - 1])
                }
            }
        };
        parameters.push(eigenvalue);
        if let Some(eigenvalue) = eigenvalue {
            eulers.push(EulerOperator { weights: row.clone(), eigenvalue, label: *label });
        }
    }
    let boxes = enumeration.vectors.into_iter().map(|vector| BoxOperator { vector }).collect();
    GkzSystem {
        matrix,
        parameters,
        eulers,
        boxes,
        kernel,
        twist: scenario.twist().to_vec(),
        warnings: enumeration.warnings,
    }
}

/// Formats a complex number compactly: components below 1e-14 of the modulus
/// are printed as 0 and a vanishing imaginary part is omitted.
pub fn format_complex(z: Complex64) -> String {
    let scale = z.norm();
    let clean = |x: f64| if x.abs() <= 1e-14 * scale || x == 0.0 { 0.0 } else { x };
    let re = clean(z.re);
    let im = clean(z.im);
    if im == 0.0 {
        format!("{}", re)
    } else if im < 0.0 {
        format!("{}-{}i", re, -im)
    } else {
        format!("{}+{}i", re, im)
    }
}

fn format_monomial_derivative(labels: &[ColumnLabel], multi: &[u32]) -> String {
    let mut out = String::new();
    for (label, &k) in labels.iter().zip(multi) {
        match k {
            0 => {}
            1 => {
                let _ = write!(out, "∂{}", label);
            }
            _ => {
                let _ = write!(out, "∂{}^{}", label, k);
            }
        }
    }
    if out.is_empty() {
        out.push('1');
    }
    out
}

fn format_int_vector(v: &[i64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

pub fn render_euler(op: &EulerOperator, labels: &[ColumnLabel]) -> String {
    let mut terms = Vec::new();
    for (w, label) in op.weights.iter().zip(labels) {
        match *w {
            0 => {}
            1 => terms.push(format!("a{}∂{}", label, label)),
            w => terms.push(format!("{}·a{}∂{}", w, label, label)),
        }
    }
    let lhs = if terms.is_empty() { String::from("0") } else { terms.join(" + ") };
    format!("{} − ({})", lhs, format_complex(op.eigenvalue))
}

pub fn render_box(op: &BoxOperator, labels: &[ColumnLabel]) -> String {
    format!(
        "{} − {}",
        format_monomial_derivative(labels, op.plus_multiindex()),
        format_monomial_derivative(labels, op.minus_multiindex())
    )
}

/// Deterministic human-readable listing of a system.
pub fn render_system(system: &GkzSystem) -> String {
    let labels = &system.matrix.column_labels;
    let mut out = String::new();
    let _ = writeln!(out, "matrix ({} x {}):", system.matrix.row_count(), system.matrix.column_count());
    let cols: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
    let _ = writeln!(out, "  columns: {}", cols.join(" "));
    for (row, label) in system.matrix.rows.iter().zip(&system.matrix.row_labels) {
        let entries: Vec<String> = row.iter().map(|x| format!("{:>3}", x)).collect();
        let _ = writeln!(out, "  {:<14}|{}", label.to_string(), entries.join(""));
    }

    let indicators: Vec<String> = system
        .matrix
        .row_labels
        .iter()
        .filter_map(|l| match l {
            RowLabel::Indicator(i) => Some(i.to_string()),
            RowLabel::Exponent(_) => None,
        })
        .collect();
    if indicators.is_empty() {
        let _ = writeln!(out, "indicator rows: none (exp factor)");
    } else {
        let _ = writeln!(out, "indicator rows: {}", indicators.join(", "));
    }

    let params: Vec<String> = system
        .parameters
        .iter()
        .map(|p| match p {
            Some(z) => format_complex(*z),
            None => String::from("frozen"),
        })
        .collect();
    let _ = writeln!(out, "parameters: ({})", params.join(", "));
    let twist: Vec<String> =
        system.twist.iter().enumerate().map(|(p, b)| format!("β{} = {}", p + 1, format_complex(*b))).collect();
    let _ = writeln!(out, "twist: {}", twist.join(", "));

    if system.kernel.vectors.is_empty() {
        let _ = writeln!(out, "kernel basis: none");
    } else {
        let basis: Vec<String> = system.kernel.vectors.iter().map(|v| format_int_vector(v)).collect();
        let _ = writeln!(out, "kernel basis: {}", basis.join(" "));
    }

    let _ = writeln!(out, "euler operators:");
    for op in &system.eulers {
        let note = match op.label {
            RowLabel::Exponent(p) => format!(
                "  [β{} = {}, stored eigenvalue −β{} = {}]",
                p,
                format_complex(system.twist[p - 1]),
                p,
                format_complex(op.eigenvalue)
            ),
            RowLabel::Indicator(_) => String::new(),
        };
        let _ = writeln!(out, "  {}: {}{}", op.label, render_euler(op, labels), note);
    }
    if system.boxes.is_empty() {
        let _ = writeln!(out, "boxes: none");
    } else {
        let _ = writeln!(out, "boxes:");
        for op in &system.boxes {
            let _ = writeln!(out, "  box: {}", render_box(op, labels));
        }
    }
    for w in &system.warnings {
        let _ = writeln!(out, "warning: {}", w);
    }
    out
}

fn parse_column_label(token: &str) -> Result<ColumnLabel> {
    let bad = || Error::InvalidScenario(format!("bad column label {:?}", token));
    let inner = token.strip_prefix('(').and_then(|t| t.strip_suffix(')')).ok_or_else(bad)?;
    let mut parts = inner.split(',').map(|s| s.trim().parse::<u32>());
    let factor = parts.next().ok_or_else(bad)?.map_err(|_| bad())? as usize;
    let exponents = parts.collect::<core::result::Result<Vec<_>, _>>().map_err(|_| bad())?;
    Ok(ColumnLabel { factor, exponents })
}

fn parse_row_label(token: &str) -> Result<RowLabel> {
    let bad = || Error::InvalidScenario(format!("bad row label {:?}", token));
    let number = |prefix: &str| -> Option<usize> { token.strip_prefix(prefix)?.strip_suffix(')')?.parse().ok() };
    if let Some(i) = number("indicator(") {
        Ok(RowLabel::Indicator(i))
    } else if let Some(p) = number("exponent(") {
        Ok(RowLabel::Exponent(p))
    } else {
        Err(bad())
    }
}

/// Reads back the matrix block written by [`render_system`].
pub fn parse_matrix_block(text: &str) -> Result<ExponentMatrix> {
    let missing = |what: &str| Error::InvalidScenario(format!("matrix block: missing {}", what));
    let mut lines = text.lines().skip_while(|l| !l.starts_with("matrix ("));
    lines.next().ok_or_else(|| missing("header"))?;
    let columns_line = lines.next().ok_or_else(|| missing("columns line"))?;
    let columns = columns_line.trim().strip_prefix("columns:").ok_or_else(|| missing("columns line"))?;
    let column_labels = columns.split_whitespace().map(parse_column_label).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut row_labels = Vec::new();
    for line in lines {
        if !line.starts_with("  ") {
            break;
        }
        let (label, entries) = line.split_once('|').ok_or_else(|| missing("row separator"))?;
        row_labels.push(parse_row_label(label.trim())?);
        let row = entries
            .split_whitespace()
            .map(|t| t.parse::<i64>())
            .collect::<core::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidScenario("matrix block: bad entry".into()))?;
        if row.len() != column_labels.len() {
            return Err(Error::InvalidScenario("matrix block: ragged row".into()));
        }
        rows.push(row);
    }
    Ok(ExponentMatrix { rows, row_labels, column_labels })
}
