//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gkz_core::periods::FunctionKind;
use gkz_core::system::{build_system, format_complex, render_system};

use crate::error::CliError;
use crate::report::{
    beside, function_name, notes_for, pair, point_entries, residual_rows, sci, PeriodReport, ReportFile, ScenarioEcho,
    SettingsEcho, VerifyReport, SCHEMA_VERSION, TOOL, TOOL_VERSION,
};
use crate::run::{default_jobs, run_verify, VerifyOptions};
use crate::scenario_file::{parse_point, Model, ScenarioFile};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_RESIDUAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gkz", version, about = "Build GKZ systems and check them against numerically evaluated periods")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the matrix, parameters and operators of a scenario.
    System(SystemArgs),
    /// Evaluate the scenario's function at the base point or at --point.
    Period(PeriodArgs),
    /// Apply every operator to the function at seeded points.
    Verify(VerifyArgs),
    /// Pretty-print a report written by `period` or `verify`.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub degree_bound: Option<u32>,
    /// Rewrite the scenario file in canonical form.
    #[arg(long)]
    pub emit_normalized: bool,
    /// Write the normalized scenario here instead of over the input.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PeriodArgs {
    pub scenario: PathBuf,
    /// Coefficients as a JSON list, e.g. '[5, -3, [7, 0]]'.
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub scenario: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub degree_bound: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of points, the base point included.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Debugging aid: add 1 to the eigenvalue of Euler operator N (default 1).
    #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "1")]
    pub corrupt_eigenvalue: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
}

struct Loaded {
    bytes: Vec<u8>,
    file: ScenarioFile,
    model: Model,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Invalid { path: path.display().to_string(), message: "not UTF-8".into() })?;
    let file = ScenarioFile::parse(&text)?;
    let model = file.validate()?;
    Ok(Loaded { bytes, file, model })
}

fn display_name(loaded: &Loaded, path: &Path) -> String {
    if loaded.file.name.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        loaded.file.name.clone()
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
}

pub fn cmd_system(args: &SystemArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = load(&args.scenario)?;
    let bound = args.degree_bound.unwrap_or(loaded.file.verification.degree_bound);
    let system = build_system(loaded.model.scenario(), bound);
    let _ = write!(out, "{}", render_system(&system));
    if args.emit_normalized {
        let normal = loaded.file.normalized()?;
        let target = args.out.clone().unwrap_or_else(|| args.scenario.clone());
        write_text(&target, &normal.to_json())?;
        let _ = writeln!(out, "normalized scenario written to {}", target.display());
    }
    Ok(EXIT_PASS)
}

pub fn cmd_period(args: &PeriodArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = load(&args.scenario)?;
    let mut function = loaded.model.function.clone();
    if let Some(tol) = args.tol {
        function.quadrature.tol = tol;
    }
    let base = function.base_coefficients();
    let point = match &args.point {
        Some(text) => parse_point(text, base.len())?,
        None => base,
    };
    let start = Instant::now();
    let (value, estimate) = function.evaluate_with_estimate(&point)?;
    let report = PeriodReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL.into(),
        tool_version: TOOL_VERSION.into(),
        kind: "period".into(),
        scenario: ScenarioEcho::new(&display_name(&loaded, &args.scenario), &args.scenario, &loaded.bytes),
        function: function_name(function.kind()).into(),
        coefficients: point.iter().map(|&z| pair(z)).collect(),
        value: pair(value),
        error_estimate: estimate,
        timing_ms: start.elapsed().as_millis() as u64,
    };
    let _ = writeln!(out, "value = {}", format_complex(value));
    let _ = writeln!(out, "error estimate = {}", sci(estimate));
    let target = args.out.clone().unwrap_or_else(|| beside(&args.scenario, "period"));
    ReportFile::Period(report).write(&target)?;
    Ok(EXIT_PASS)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = load(&args.scenario)?;
    let mut options = VerifyOptions::from_model(&loaded.model);
    if let Some(t) = args.threshold {
        options.threshold = t;
    }
    if let Some(b) = args.degree_bound {
        options.degree_bound = b;
    }
    if let Some(s) = args.seed {
        options.seed = s;
    }
    if let Some(n) = args.points {
        options.points = n;
    }
    options.jobs = args.jobs.unwrap_or_else(default_jobs).max(1);
    if let Some(t) = args.tol {
        options.tol = t;
    }
    options.corrupt_eigenvalue = args.corrupt_eigenvalue;

    let start = Instant::now();
    let outcome = run_verify(&loaded.model, &options)?;
    let elapsed = start.elapsed();

    let kind = outcome.function.kind();
    let has_exp = outcome.function.scenario().factors().iter().any(|f| f.kind.is_exp());
    let mut notes = notes_for(kind, has_exp);
    notes.extend(outcome.system.warnings.iter().cloned());
    if let FunctionKind::Period(_) = kind {
        notes.push(format!("quadrature tolerance {}", sci(options.tol)));
    }
    let diff = loaded.model.diff_settings();
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        tool: TOOL.into(),
        tool_version: TOOL_VERSION.into(),
        kind: "verify".into(),
        scenario: ScenarioEcho::new(&display_name(&loaded, &args.scenario), &args.scenario, &loaded.bytes),
        function: function_name(kind).into(),
        system: render_system(&outcome.system),
        settings: SettingsEcho {
            degree_bound: options.degree_bound,
            threshold: options.threshold,
            seed: options.seed,
            points: options.points,
            perturbation: options.perturbation,
            radius_factor: diff.radius_factor,
            nodes: diff.nodes,
            tol: options.tol,
            corrupted_eigenvalue: options.corrupt_eigenvalue,
        },
        points: point_entries(&outcome.report),
        residuals: residual_rows(&outcome.report),
        max_relative: sci(outcome.report.max_relative),
        evaluation_errors: outcome.report.evaluation_errors,
        passed: outcome.report.passed,
        notes,
        timing_ms: elapsed.as_millis() as u64,
    };
    let code = exit_code_for(&report);
    let file = ReportFile::Verify(report);
    let _ = write!(out, "{}", file.render());
    let target = args.out.clone().unwrap_or_else(|| beside(&args.scenario, "report"));
    file.write(&target)?;
    let _ = writeln!(out, "report written to {}", target.display());
    Ok(code)
}

pub fn exit_code_for(report: &VerifyReport) -> i32 {
    if report.evaluation_errors > 0 {
        EXIT_INPUT
    } else if report.passed {
        EXIT_PASS
    } else {
        EXIT_RESIDUAL
    }
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.report)
        .map_err(|e| CliError::Io { path: args.report.display().to_string(), source: e })?;
    let report = ReportFile::parse(&text)?;
    let _ = write!(out, "{}", report.render());
    Ok(match &report {
        ReportFile::Verify(r) => exit_code_for(r),
        ReportFile::Period(_) => EXIT_PASS,
    })
}

pub fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::System(a) => cmd_system(a, out),
        Command::Period(a) => cmd_period(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Report(a) => cmd_report(a, out),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_PASS
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INPUT
                }
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
