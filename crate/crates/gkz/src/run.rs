//! Verification over several points on worker threads.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use gkz_core::periods::PeriodFunction;
use gkz_core::system::{build_system, GkzSystem};
use gkz_core::verifier::{
    assemble_report, verification_points, verify_point, DiffSettings, PointReport, ResidualReport,
};
use num_complex::Complex64;

use crate::error::CliError;
use crate::scenario_file::Model;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub degree_bound: u32,
    pub threshold: f64,
    pub seed: u64,
    pub points: usize,
    pub perturbation: f64,
    pub jobs: usize,
    pub tol: f64,
    /// 1-based index of an Euler operator whose eigenvalue is shifted by +1.
    pub corrupt_eigenvalue: Option<usize>,
}

impl VerifyOptions {
    pub fn from_model(model: &Model) -> Self {
        let v = &model.file.verification;
        VerifyOptions {
            degree_bound: v.degree_bound,
            threshold: v.threshold,
            seed: v.seed,
            points: v.points,
            perturbation: v.perturbation,
            jobs: default_jobs(),
            tol: model.file.quadrature.tol,
            corrupt_eigenvalue: None,
        }
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1)
}

pub struct VerifyOutcome {
    pub system: GkzSystem,
    pub function: PeriodFunction,
    pub points: Vec<Vec<Complex64>>,
    pub report: ResidualReport,
}

/// Verifies points concurrently; results are stored by point index so the
/// report does not depend on scheduling.
pub fn verify_parallel(
    system: &GkzSystem,
    function: &PeriodFunction,
    points: &[Vec<Complex64>],
    settings: &DiffSettings,
    threshold: f64,
    jobs: usize,
) -> ResidualReport {
    let slots: Vec<Mutex<Option<PointReport>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(points.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= points.len() {
                    break;
                }
                let r = verify_point(system, function, &points[k], settings, threshold);
                *slots[k].lock().expect("slot lock") = Some(r);
            });
        }
    });
    let reports =
        slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every point verified")).collect();
    assemble_report(reports, threshold)
}

pub fn run_verify(model: &Model, options: &VerifyOptions) -> Result<VerifyOutcome, CliError> {
    let mut function = model.function.clone();
    function.quadrature.tol = options.tol;
    let mut system = build_system(function.scenario(), options.degree_bound);
    if let Some(k) = options.corrupt_eigenvalue {
        if k == 0 || k > system.eulers.len() {
            return Err(CliError::Invalid {
                path: "--corrupt-eigenvalue".into(),
                message: format!("no euler operator {k} (the system has {})", system.eulers.len()),
            });
        }
        system.corrupt_eigenvalue(k - 1);
    }
    let points = verification_points(&function.base_coefficients(), options.points, options.seed, options.perturbation);
    let report = verify_parallel(&system, &function, &points, &model.diff_settings(), options.threshold, options.jobs);
    Ok(VerifyOutcome { system, function, points, report })
}
