//! Real-coefficient polynomial roots via companion-matrix eigenvalues.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::{Error, Result};

/// Evaluates `coeffs` (highest degree first) at `z` by Horner's rule.
pub fn eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of the polynomial with coefficients `coeffs`, highest
/// degree first, counted with multiplicity.
///
/// Exactly-zero leading coefficients lower the degree. Roots come from the
/// eigenvalues of the companion matrix, then get a few Newton polishing steps
/// that are kept only when they shrink the residual. The result is sorted by
/// real part, then imaginary part.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("polynomial coefficients must be finite"));
    }
    let first = coeffs.iter().position(|&c| c != 0.0);
    let Some(first) = first else {
        return Err(Error::invalid("the zero polynomial has no isolated roots"));
    };
    let coeffs = &coeffs[first..];
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }

    let lead = coeffs[0];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        // last column holds -a_i / a_n for the monic polynomial
        companion[(i, degree - 1)] = -coeffs[degree - i] / lead;
    }
    let eig = Schur::new(companion).complex_eigenvalues();
    let mut roots: Vec<Complex64> = eig.iter().copied().collect();

    for z in &mut roots {
        let mut best = *z;
        let mut best_res = eval(coeffs, best).norm();
        let mut cur = best;
        for _ in 0..4 {
            let (p, dp) = eval_with_derivative(coeffs, cur);
            if dp.norm() == 0.0 {
                break;
            }
            cur -= p / dp;
            let res = eval(coeffs, cur).norm();
            if res < best_res {
                best = cur;
                best_res = res;
            } else {
                break;
            }
        }
        *z = best;
    }

    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_cubic() {
        // (x - 1)(x - 2)(x + 3) = x^3 - 7x + 6
        let r = polynomial_roots(&[1.0, 0.0, -7.0, 6.0]).unwrap();
        let expected = [-3.0, 1.0, 2.0];
        for (z, e) in r.iter().zip(expected) {
            assert!((z.re - e).abs() < 1e-12 && z.im.abs() < 1e-12, "{z}");
        }
    }

    #[test]
    fn complex_pair() {
        // x^2 + 1
        let r = polynomial_roots(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn degree_drops_on_zero_lead() {
        let r = polynomial_roots(&[0.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].re + 0.5).abs() < 1e-15);
        assert!(polynomial_roots(&[0.0, 3.0]).unwrap().is_empty());
        assert!(polynomial_roots(&[0.0, 0.0]).is_err());
        assert!(polynomial_roots(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn double_root_stays_close() {
        // (x + 0.5)^2 (x - 0.25)
        let c = [1.0, 0.75, 0.0, -0.0625];
        let r = polynomial_roots(&c).unwrap();
        assert!((r[0] + 0.5).norm() < 1e-7 && (r[1] + 0.5).norm() < 1e-7);
        assert!((r[2].re - 0.25).abs() < 1e-14);
    }
}
