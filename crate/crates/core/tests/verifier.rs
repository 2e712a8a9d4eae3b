mod common;

use common::*;
use gkz_core::paths::{Endpoint, Path1D, PathSegment, SegmentShape};
use gkz_core::periods::{CoefficientFunction, FnFunction, FunctionKind, PeriodFunction};
use gkz_core::system::build_system;
use gkz_core::verifier::{
    apply_operator, differentiate, verification_points, verify, DerivativeCache, DiffMethod, DiffSettings, Operator,
};
use gkz_core::Error;
use proptest::prelude::*;

fn gauss() -> PeriodFunction {
    let path = Path1D::new(
        vec![PathSegment {
            shape: SegmentShape::Line {
                start: Endpoint::RootOf { factor: 0, near: c(1.0) },
                end: Endpoint::RootOf { factor: 1, near: c(4.0) },
            },
            rule: None,
        }],
        false,
    );
    single(gauss_spec(), path)
}

fn quadratic_root() -> PeriodFunction {
    let s = spec(
        1,
        vec![factor(gkz_core::scenario::FactorKind::Log, &[(&[0], c(-1.0)), (&[1], c(0.1)), (&[2], c(1.0))])],
        &[1.0],
    );
    PeriodFunction::new(s, FunctionKind::Root { base_root: c(0.95) }).unwrap()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomials_are_differentiated_exactly(
        e0 in 0u32..7, e1 in 0u32..7,
        m0 in 0u32..4, m1 in 0u32..3,
        a0 in (-2.0..2.0f64, -2.0..2.0f64), a1 in (-2.0..2.0f64, -2.0..2.0f64),
    ) {
        // degree below the 16 nodes per circle: the trapezoid is exact
        let f = FnFunction { dimension: 2, f: move |a: &[C]| Ok(a[0].powu(e0) * a[1].powu(e1) + 2.0 * a[0]) };
        let a = [C::new(a0.0, a0.1), C::new(a1.0, a1.1)];
        let d = differentiate(&f, &a, &[m0, m1], &DiffSettings::default()).unwrap();
        let falling = |e: u32, m: u32| if m > e { 0.0 } else { factorial(e) / factorial(e - m) };
        let mut exact = a[0].powi(e0 as i32 - m0 as i32) * a[1].powi(e1 as i32 - m1 as i32) * falling(e0, m0) * falling(e1, m1);
        if m0 > e0 || m1 > e1 {
            exact = c(0.0);
        }
        exact += match (m0, m1) {
            (0, 0) => 2.0 * a[0],
            (1, 0) => c(2.0),
            _ => c(0.0),
        };
        let scale = (a[0].norm().max(1.0) + 0.1).powi(e0 as i32) * (a[1].norm().max(1.0) + 0.1).powi(e1 as i32) * 10.0;
        prop_assert!((d.value - exact).norm() <= 1e-12 * scale.max(exact.norm()), "{} vs {}", d.value, exact);
    }
}

#[test]
fn operator_application_is_linear() {
    let root = quadratic_root();
    let system = build_system(root.scenario(), 4);
    let a = root.base_coefficients();
    let poly = |z: &[C]| z[0] * z[0] * z[2] + z[1].powi(3);
    let phi = |z: &[C]| root.evaluate(z);
    let f1 = FnFunction { dimension: 3, f: phi };
    let f2 = FnFunction { dimension: 3, f: |z: &[C]| Ok(2.0 * root.evaluate(z)?) };
    let g = FnFunction { dimension: 3, f: move |z: &[C]| Ok(poly(z)) };
    let sum = FnFunction { dimension: 3, f: |z: &[C]| Ok(root.evaluate(z)? + poly(z)) };
    let ops = system.eulers.iter().map(Operator::Euler).chain(system.boxes.iter().map(Operator::Box));
    for op in ops {
        let settings = DiffSettings::default();
        let r1 = apply_operator(op, &DerivativeCache::new(&f1, &a, settings)).unwrap();
        let r2 = apply_operator(op, &DerivativeCache::new(&f2, &a, settings)).unwrap();
        let rg = apply_operator(op, &DerivativeCache::new(&g, &a, settings)).unwrap();
        let rs = apply_operator(op, &DerivativeCache::new(&sum, &a, settings)).unwrap();
        let scale = r1.normalization + rg.normalization;
        assert!((r2.raw - 2.0 * r1.raw).norm() < 1e-10 * scale);
        assert!((rs.raw - (r1.raw + rg.raw)).norm() < 1e-10 * scale);
    }
}

#[test]
fn gauss_mixed_partials_agree() {
    let f = gauss();
    let a = f.base_coefficients();
    let local = f.localize(&a).unwrap().unwrap();
    let labels = build_system(f.scenario(), 4).matrix.column_labels;
    let col = |i: usize, j: u32| labels.iter().position(|l| l.factor == i && l.exponents == vec![j]).unwrap();
    let mut left = vec![0; 4];
    left[col(1, 0)] = 1;
    left[col(2, 1)] = 1;
    let mut right = vec![0; 4];
    right[col(1, 1)] = 1;
    right[col(2, 0)] = 1;
    let settings = DiffSettings::default();
    let dl = differentiate(&local, &a, &left, &settings).unwrap();
    let dr = differentiate(&local, &a, &right, &settings).unwrap();
    assert!(rel(dl.value, dr.value) < 1e-6);
    // halving the radius changes nothing at this accuracy
    assert!(dl.disagreement < 1e-6 && dr.disagreement < 1e-6);
}

#[test]
fn cauchy_and_central_differences_agree() {
    let f = quadratic_root();
    let a = f.base_coefficients();
    let cauchy = DiffSettings::default();
    let central = DiffSettings { method: DiffMethod::CentralDifference, ..cauchy };
    for multi in [[1, 0, 0], [0, 1, 1], [0, 2, 0]] {
        let x = differentiate(&f, &a, &multi, &cauchy).unwrap().value;
        let y = differentiate(&f, &a, &multi, &central).unwrap().value;
        assert!(rel(y, x) < 1e-6, "{multi:?}: {x} vs {y}");
    }
}

#[test]
fn period_is_holomorphic_in_the_coefficients() {
    // Directional derivatives along 1 and i satisfy D_i = i·D_1.
    let f = gauss();
    let base = f.base_coefficients();
    let local = f.localize(&base).unwrap().unwrap();
    let a: Vec<C> = base.iter().map(|z| z + C::new(0.01, -0.02)).collect();
    assert!(rel(local.evaluate(&a).unwrap(), f.evaluate(&a).unwrap()) < 1e-10);
    let direction = [c(0.3), C::new(-0.2, 0.1), c(0.5), C::new(0.1, 0.4)];
    let derivative = |unit: C| {
        let at = |h: f64| {
            let plus: Vec<C> = a.iter().zip(&direction).map(|(z, d)| z + unit * d * h).collect();
            let minus: Vec<C> = a.iter().zip(&direction).map(|(z, d)| z - unit * d * h).collect();
            (local.evaluate(&plus).unwrap() - local.evaluate(&minus).unwrap()) / (2.0 * h)
        };
        let h = 4e-3;
        (4.0 * at(h / 2.0) - at(h)) / 3.0
    };
    let d1 = derivative(c(1.0));
    let di = derivative(C::new(0.0, 1.0));
    assert!(rel(di, C::new(0.0, 1.0) * d1) < 1e-8, "{di} vs i·{d1}");
}

#[test]
fn order_cap_is_enforced() {
    let f = FnFunction { dimension: 2, f: |a: &[C]| Ok(a[0] * a[1]) };
    let a = [c(1.0), c(1.0)];
    assert!(matches!(
        differentiate(&f, &a, &[4, 3], &DiffSettings::default()),
        Err(Error::OrderTooHigh { order: 7, cap: 6 })
    ));
}

#[test]
fn gauss_passes_and_a_corrupted_system_fails() {
    let f = gauss();
    let mut system = build_system(f.scenario(), 4);
    let points = verification_points(&f.base_coefficients(), 2, 3, 0.2);
    let report = verify(&system, &f, &points, &DiffSettings::default(), 1e-6);
    assert!(report.passed, "max relative {:e}", report.max_relative);
    assert_eq!(report.evaluation_errors, 0);
    system.corrupt_eigenvalue(2);
    let bad = verify(&system, &f, &points, &DiffSettings::default(), 1e-6);
    assert!(!bad.passed && bad.max_relative > 1e-2);
}

#[test]
fn verification_points_are_seeded() {
    let base = [c(-1.0), c(0.1), C::new(3.0, 4.0)];
    let p = verification_points(&base, 4, 9, 0.2);
    assert_eq!(p, verification_points(&base, 4, 9, 0.2));
    assert_ne!(p, verification_points(&base, 4, 10, 0.2));
    assert_eq!(p[0], base.to_vec());
    for q in &p[1..] {
        for (z, b) in q.iter().zip(&base) {
            assert!((z - b).norm() <= 0.2 * b.norm().max(1.0));
        }
    }
}
