use gkz_core::lattice::{build_exponent_matrix, enumerate_box_vectors, integer_kernel_basis, ExponentMatrix};
use gkz_core::scenario::{FactorKind, FactorSupport, Monomial, ScenarioSpec};
use gkz_core::system::build_system;
use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;

type Q = Ratio<i128>;

fn zero() -> Q {
    Q::from_integer(0)
}

/// Row-reduces over the rationals and returns (rank, reduced rows, pivot columns).
fn rref(mut m: Vec<Vec<Q>>, width: usize) -> (usize, Vec<Vec<Q>>, Vec<usize>) {
    let mut rank = 0;
    let mut pivots = Vec::new();
    for col in 0..width {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][col] != zero()) else { continue };
        m.swap(rank, piv);
        let p = m[rank][col];
        for x in m[rank].iter_mut() {
            *x /= p;
        }
        for r in 0..m.len() {
            if r != rank && m[r][col] != zero() {
                let f = m[r][col];
                let pivot_row = m[rank].clone();
                for (x, y) in m[r].iter_mut().zip(pivot_row) {
                    *x -= f * y;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    (rank, m, pivots)
}

fn to_q(rows: &[Vec<i64>]) -> Vec<Vec<Q>> {
    rows.iter().map(|r| r.iter().map(|&x| Q::from_integer(x as i128)).collect()).collect()
}

fn rational_nullspace(a: &ExponentMatrix) -> Vec<Vec<Q>> {
    let n = a.column_count();
    let (_, m, pivots) = rref(to_q(&a.rows), n);
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|f| {
            let mut v = vec![zero(); n];
            v[f] = Q::from_integer(1);
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m[r][f];
            }
            v
        })
        .collect()
}

/// Coordinates of `v` in the basis, if it lies in its rational span.
fn coordinates(basis: &[Vec<i64>], v: &[i128]) -> Option<Vec<Q>> {
    let k = basis.len();
    let rows: Vec<Vec<Q>> = (0..v.len())
        .map(|i| {
            let mut r: Vec<Q> = basis.iter().map(|b| Q::from_integer(b[i] as i128)).collect();
            r.push(Q::from_integer(v[i]));
            r
        })
        .collect();
    let (rank, m, pivots) = rref(rows, k + 1);
    if pivots.contains(&k) || rank < k {
        return None;
    }
    Some((0..k).map(|r| m[r][k]).collect())
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

prop_compose! {
    fn factor_strategy(m: usize)(
        kind in 0..3u8,
        lambda in -2.0..2.0f64,
        exps in prop::collection::btree_set(prop::collection::vec(0..4u32, m), 1..=4),
    ) -> FactorSupport {
        let kind = match kind {
            0 => FactorKind::Power(Complex64::new(lambda, 0.0)),
            1 => FactorKind::Log,
            _ => FactorKind::Exp,
        };
        let monos: Vec<Monomial> = exps.into_iter().map(Monomial::new).collect();
        let coeffs = vec![Complex64::new(1.0, 0.0); monos.len()];
        FactorSupport::new(kind, monos, coeffs)
    }
}

fn scenario_strategy() -> impl Strategy<Value = ScenarioSpec> {
    (1..=2usize)
        .prop_flat_map(|m| (Just(m), prop::collection::vec(factor_strategy(m), 1..=3)))
        .prop_filter("at most 8 columns", |(_, fs)| fs.iter().map(|f| f.monomials.len()).sum::<usize>() <= 8)
        .prop_map(|(m, fs)| ScenarioSpec::new(m, fs, vec![Complex64::new(0.5, 0.0); m], vec![None; m]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kernel_basis_is_exact_and_saturated(s in scenario_strategy(), weights in prop::collection::vec((-4i64..=4, 1i64..=3), 8)) {
        let a = build_exponent_matrix(&s);
        let basis = integer_kernel_basis(&a);
        for u in &basis.vectors {
            prop_assert!(a.apply(u).iter().all(|&x| x == 0), "A·u ≠ 0 for {:?}", u);
        }
        let (rank, _, _) = rref(to_q(&a.rows), a.column_count());
        prop_assert_eq!(rank + basis.vectors.len(), a.column_count());
        prop_assert_eq!(basis.rank, basis.vectors.len());
        let (basis_rank, _, _) = rref(to_q(&basis.vectors), a.column_count());
        prop_assert_eq!(basis_rank, basis.vectors.len());

        let null = rational_nullspace(&a);
        if !null.is_empty() {
            let mut v = vec![zero(); a.column_count()];
            for (b, (p, q)) in null.iter().zip(&weights) {
                for (x, y) in v.iter_mut().zip(b) {
                    *x += Q::new(*p as i128, *q as i128) * y;
                }
            }
            let denom = v.iter().fold(1i128, |acc, x| acc / gcd(acc, *x.denom()) * x.denom());
            let mut w: Vec<i128> = v.iter().map(|x| (x * Q::from_integer(denom)).to_integer()).collect();
            let g = w.iter().fold(0, |acc, &x| gcd(acc, x));
            if g != 0 {
                for x in w.iter_mut() {
                    *x /= g;
                }
                let c = coordinates(&basis.vectors, &w);
                prop_assert!(c.is_some(), "{:?} is outside the basis span", w);
                prop_assert!(c.unwrap().iter().all(|q| q.is_integer()), "{:?} is not an integer combination", w);
            }
        }
    }

    #[test]
    fn box_vectors_lie_in_the_kernel(s in scenario_strategy()) {
        let a = build_exponent_matrix(&s);
        let boxes = enumerate_box_vectors(&integer_kernel_basis(&a), 4);
        for b in &boxes.vectors {
            prop_assert!(a.apply(&b.u).iter().all(|&x| x == 0));
            prop_assert!(b.plus.iter().zip(&b.minus).all(|(p, m)| *p == 0 || *m == 0));
        }
    }

    #[test]
    fn column_order_is_deterministic(s in scenario_strategy()) {
        let reversed: Vec<FactorSupport> = s
            .factors()
            .iter()
            .map(|f| {
                let mut monos = f.monomials.clone();
                let mut coeffs = f.coefficients.clone();
                monos.reverse();
                coeffs.reverse();
                FactorSupport::new(f.kind, monos, coeffs)
            })
            .collect();
        let again = ScenarioSpec::new(s.m(), reversed, s.twist().to_vec(), s.frozen().to_vec()).unwrap();
        prop_assert_eq!(build_exponent_matrix(&s), build_exponent_matrix(&again));
    }

    #[test]
    fn euler_weights_match_matrix_rows(s in scenario_strategy()) {
        let system = build_system(&s, 4);
        for op in &system.eulers {
            let row = system.matrix.row_labels.iter().position(|l| *l == op.label).unwrap();
            prop_assert_eq!(&op.weights, &system.matrix.rows[row]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuting_factors_permutes_indicator_rows(s in scenario_strategy()) {
        use gkz_core::lattice::RowLabel;
        let nf = s.factors().len();
        let mut factors = s.factors().to_vec();
        factors.reverse();
        let permuted = ScenarioSpec::new(s.m(), factors, s.twist().to_vec(), s.frozen().to_vec()).unwrap();
        let a = build_system(&s, 4);
        let b = build_system(&permuted, 4);
        prop_assert_eq!(a.eulers.len(), b.eulers.len());
        for op in &a.eulers {
            let image = match op.label {
                RowLabel::Indicator(i) => RowLabel::Indicator(nf + 1 - i),
                other => other,
            };
            let matched = b.eulers.iter().find(|o| o.label == image).unwrap();
            prop_assert_eq!(matched.eigenvalue, op.eigenvalue);
            let mut wa = op.weights.clone();
            let mut wb = matched.weights.clone();
            wa.sort();
            wb.sort();
            prop_assert_eq!(wa, wb);
        }
    }
}
