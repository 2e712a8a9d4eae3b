//! Univariate polynomial helpers. Coefficients are stored in ascending order.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::error::{Error, Result};

pub fn eval(coeffs: &[Complex64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::zero(), |acc, &c| acc * x + c)
}

/// Value and first derivative by Horner's scheme.
pub fn eval_with_derivative(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::zero();
    let mut dp = Complex64::zero();
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Σ |c_k| |x|^k, the natural size against which |p(x)| is compared.
pub fn magnitude_scale(coeffs: &[Complex64], x: Complex64) -> f64 {
    let r = x.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

pub fn derivative(coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect()
}

/// Coefficients of `h ↦ p(base + h)`.
pub fn taylor_shift(coeffs: &[Complex64], base: Complex64) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    let n = c.len();
    for i in 0..n {
        for k in (i..n - 1).rev() {
            let next = c[k + 1];
            c[k] += base * next;
        }
    }
    c
}

/// Index of the highest nonzero coefficient.
pub fn degree(coeffs: &[Complex64]) -> Option<usize> {
    coeffs.iter().rposition(|c| !c.is_zero())
}

/// Newton iteration from `x0`; returns the last iterate and whether the
/// residual dropped below `rel_tol` times the magnitude scale.
pub fn newton_polish(coeffs: &[Complex64], x0: Complex64, rel_tol: f64, max_iter: usize) -> (Complex64, bool) {
    let mut x = x0;
    for _ in 0..max_iter {
        let (p, dp) = eval_with_derivative(coeffs, x);
        let scale = magnitude_scale(coeffs, x);
        if p.norm() <= rel_tol * scale {
            return (x, true);
        }
        if dp.is_zero() {
            return (x, false);
        }
        let step = p / dp;
        x -= step;
        if step.norm() <= f64::EPSILON * x.norm() {
            let (p, _) = eval_with_derivative(coeffs, x);
            return (x, p.norm() <= rel_tol * magnitude_scale(coeffs, x));
        }
    }
    let (p, _) = eval_with_derivative(coeffs, x);
    (x, p.norm() <= rel_tol * magnitude_scale(coeffs, x))
}

/// Eigenvalues of an upper Hessenberg matrix by shifted complex QR with
/// Givens rotations and deflation of negligible subdiagonal entries.
pub fn hessenberg_eigenvalues(mut h: Vec<Vec<Complex64>>) -> Result<Vec<Complex64>> {
    let n = h.len();
    let mut eig = vec![Complex64::zero(); n];
    if n == 0 {
        return Ok(eig);
    }
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut lo = 0;
        for l in (1..=hi).rev() {
            let s = h[l - 1][l - 1].norm() + h[l][l].norm();
            if h[l][l - 1].norm() <= f64::EPSILON * s || h[l][l - 1].is_zero() {
                h[l][l - 1] = Complex64::zero();
                lo = l;
                break;
            }
        }
        if lo == hi {
            eig[hi] = h[hi][hi];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 60 * n {
            return Err(Error::InvalidScenario("eigenvalue iteration did not converge".into()));
        }
        let shift = if iter.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[hi][hi] + Complex64::new(h[hi][hi - 1].norm(), 0.0)
        } else {
            let a = h[hi - 1][hi - 1];
            let b = h[hi - 1][hi];
            let c = h[hi][hi - 1];
            let d = h[hi][hi];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let mid = (a + d) * 0.5;
            let (m1, m2) = (mid + disc, mid - disc);
            if (m1 - d).norm() <= (m2 - d).norm() {
                m1
            } else {
                m2
            }
        };
        for k in lo..=hi {
            h[k][k] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let x = h[k][k];
            let y = h[k + 1][k];
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 { (Complex64::new(1.0, 0.0), Complex64::zero()) } else { (x / r, y / r) };
            for j in k..=hi {
                let top = h[k][j];
                let bottom = h[k + 1][j];
                h[k][j] = c.conj() * top + s.conj() * bottom;
                h[k + 1][j] = -s * top + c * bottom;
            }
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + offset;
            let last = (k + 2).min(hi);
            for row in h.iter_mut().take(last + 1).skip(lo) {
                let left = row[k];
                let right = row[k + 1];
                row[k] = left * c + right * s;
                row[k + 1] = -left * s.conj() + right * c.conj();
            }
        }
        for k in lo..=hi {
            h[k][k] += shift;
        }
    }
    eig[0] = h[0][0];
    Ok(eig)
}

/// All roots of a polynomial via companion-matrix eigenvalues, each polished
/// by Newton's method on the original coefficients.
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = degree(coeffs).ok_or_else(|| Error::InvalidScenario("zero polynomial has no roots".into()))?;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    let mut companion = vec![vec![Complex64::zero(); d]; d];
    for i in 0..d {
        if i + 1 < d {
            companion[i + 1][i] = Complex64::new(1.0, 0.0);
        }
        companion[i][d - 1] = -coeffs[i] / lead;
    }
    let eig = hessenberg_eigenvalues(companion)?;
    Ok(eig.into_iter().map(|z| newton_polish(&coeffs[..=d], z, 1e-15, 8).0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn horner_and_derivative() {
        let p = [c(1.0, 0.0), c(-3.0, 0.0), c(2.0, 0.0)];
        let (v, d) = eval_with_derivative(&p, c(2.0, 0.0));
        assert_eq!(v, c(3.0, 0.0));
        assert_eq!(d, c(5.0, 0.0));
        assert_eq!(derivative(&p), vec![c(-3.0, 0.0), c(4.0, 0.0)]);
    }

    #[test]
    fn taylor_shift_matches_direct_evaluation() {
        let p = [c(1.0, 2.0), c(-3.0, 0.5), c(2.0, 0.0), c(0.0, 1.0)];
        let base = c(0.7, -0.3);
        let shifted = taylor_shift(&p, base);
        for h in [c(0.1, 0.0), c(-0.4, 0.9)] {
            assert!((eval(&shifted, h) - eval(&p, base + h)).norm() < 1e-13);
        }
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn roots_of_known_polynomials() {
        // (x-1)(x-2)(x-3)
        let r = sorted(roots(&[c(-6.0, 0.0), c(11.0, 0.0), c(-6.0, 0.0), c(1.0, 0.0)]).unwrap());
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - c(want, 0.0)).norm() < 1e-12, "{:?}", r);
        }
        // x^4 + 1
        let r = roots(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 4);
        for z in r {
            assert!((z.powu(4) + 1.0).norm() < 1e-13);
        }
        // complex coefficients
        let p = [c(0.3, -1.0), c(2.0, 0.5), c(-1.0, 1.0), c(0.5, 0.0), c(1.0, 2.0)];
        for z in roots(&p).unwrap() {
            assert!(eval(&p, z).norm() < 1e-12 * magnitude_scale(&p, z));
        }
    }

    #[test]
    fn degree_zero_has_no_roots() {
        assert!(roots(&[c(2.0, 0.0), c(0.0, 0.0)]).unwrap().is_empty());
        assert!(roots(&[c(0.0, 0.0)]).is_err());
    }
}
