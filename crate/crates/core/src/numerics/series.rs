//! Truncated exponential series and Taylor-coefficient extraction by
//! circle quadrature.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Coefficients of a power series together with the extraction radius.
#[derive(Debug, Clone)]
pub struct ComplexSeries {
    pub coefficients: Vec<Complex64>,
    pub radius: f64,
}

/// exp_N(z) = sum_{n >= N} z^n / n!.
///
/// Computed as exp(z) minus the leading Taylor terms (compensated summation)
/// for moderate |z|, by direct tail summation beyond.
pub fn truncated_exp(n_trunc: u32, z: Complex64) -> Complex64 {
    if n_trunc == 0 {
        return z.exp();
    }
    if z.norm() <= 1.0 {
        // tail series directly: no cancellation, full relative accuracy even
        // for tiny |z| where exp(z) - head would lose every digit
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..n_trunc {
            term = term * z / (k + 1) as f64;
        }
        let mut sum = term;
        let mut k = n_trunc as f64;
        for _ in 0..60 {
            term = term * z / (k + 1.0);
            sum += term;
            k += 1.0;
            if term.norm() <= 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        return sum;
    }
    if z.norm() <= 30.0 {
        // head = sum_{n < N} z^n/n! with Kahan compensation
        let mut sum = Complex64::new(0.0, 0.0);
        let mut comp = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..n_trunc {
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            term = term * z / (k + 1) as f64;
        }
        z.exp() - sum
    } else {
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..n_trunc {
            term = term * z / (k + 1) as f64;
        }
        let mut sum = term;
        let mut k = n_trunc as f64;
        for _ in 0..2000 {
            term = term * z / (k + 1.0);
            sum += term;
            k += 1.0;
            if term.norm() <= 1e-18 * sum.norm().max(1e-300) && k > z.norm() {
                break;
            }
        }
        sum
    }
}

/// Taylor coefficients c_0..c_{count-1} of an analytic g around 0, by the
/// trapezoid rule on the circle |z| = radius.
pub fn cauchy_taylor_coefficients<G: Fn(Complex64) -> Complex64>(
    g: G,
    radius: f64,
    count: usize,
) -> Result<ComplexSeries> {
    if !(radius > 0.0) {
        return Err(Error::Precondition("radius must be positive".into()));
    }
    if count < 1 {
        return Err(Error::Precondition("count must be >= 1".into()));
    }
    let m = (4 * count).max(64);
    let mut samples = Vec::with_capacity(m);
    for k in 0..m {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
        let z = Complex64::from_polar(radius, theta);
        let v = g(z);
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite evaluation on the circle at z = {z}"
            )));
        }
        samples.push(v);
    }
    let mut coefficients = Vec::with_capacity(count);
    for n in 0..count {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &v) in samples.iter().enumerate() {
            let theta = 2.0 * std::f64::consts::PI * (k * n % m) as f64 / m as f64;
            acc += v * Complex64::from_polar(1.0, -theta);
        }
        coefficients.push(acc / (m as f64 * radius.powi(n as i32)));
    }
    Ok(ComplexSeries {
        coefficients,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trunc_zero_is_exp() {
        let z = Complex64::new(1.7, 0.0);
        assert_relative_eq!(truncated_exp(0, z).re, 1.7f64.exp(), max_relative = 1e-14);
    }

    #[test]
    fn trunc_one_at_zero_is_zero() {
        assert_eq!(truncated_exp(1, Complex64::new(0.0, 0.0)).norm(), 0.0);
    }

    #[test]
    fn trunc_two_at_one() {
        let v = truncated_exp(2, Complex64::new(1.0, 0.0));
        assert_relative_eq!(v.re, std::f64::consts::E - 2.0, max_relative = 1e-13);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn tiny_argument_keeps_relative_accuracy() {
        for &x in &[1e-10f64, -1e-8, 1e-4] {
            let v = truncated_exp(1, Complex64::new(x, 0.0));
            assert_relative_eq!(v.re, x.exp_m1(), max_relative = 1e-14);
        }
        // N=2 tail at tiny x is x^2/2 to leading order
        let x = 1e-6f64;
        let v = truncated_exp(2, Complex64::new(x, 0.0));
        assert_relative_eq!(v.re, x.exp_m1() - x, max_relative = 1e-9);
    }

    #[test]
    fn head_plus_tail_reconstructs_exp() {
        for &re in &[-10.0, -3.0, 0.5, 10.0] {
            for &im in &[0.0, 2.0, -7.5] {
                let z = Complex64::new(re, im);
                for n in [1u32, 5, 20] {
                    let mut head = Complex64::new(0.0, 0.0);
                    let mut term = Complex64::new(1.0, 0.0);
                    for k in 0..n {
                        head += term;
                        term = term * z / (k + 1) as f64;
                    }
                    let total = truncated_exp(n, z) + head;
                    // conditioning scale: the head terms are what get cancelled
                    let scale = z.exp().norm().max(head.norm()).max(1.0);
                    assert!(
                        (total - z.exp()).norm() <= 1e-12 * scale,
                        "z={z}, N={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn large_argument_tail_summation() {
        let z = Complex64::new(40.0, 0.0);
        let mut head = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..3u32 {
            head += term;
            term = term * z / (k + 1) as f64;
        }
        let total = truncated_exp(3, z) + head;
        assert_relative_eq!(total.re, 40f64.exp(), max_relative = 1e-11);
    }

    #[test]
    fn exp_coefficients() {
        let s = cauchy_taylor_coefficients(|z| z.exp(), 1.0, 5).unwrap();
        let expect = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
        for (c, e) in s.coefficients.iter().zip(expect) {
            assert!((c - Complex64::new(e, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn square_coefficients() {
        let s = cauchy_taylor_coefficients(|z| z * z, 2.0, 4).unwrap();
        let expect = [0.0, 0.0, 1.0, 0.0];
        for (c, e) in s.coefficients.iter().zip(expect) {
            assert!((c - Complex64::new(e, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn radius_invariance_for_entire_functions() {
        let g = |z: Complex64| (2.0 * z - z * z).exp();
        let a = cauchy_taylor_coefficients(g, 0.5, 8).unwrap();
        let b = cauchy_taylor_coefficients(g, 1.0, 8).unwrap();
        for (ca, cb) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((ca - cb).norm() < 1e-8, "{ca} vs {cb}");
        }
    }

    #[test]
    fn non_finite_on_circle_is_an_error() {
        let r = cauchy_taylor_coefficients(|z| 1.0 / (z - z), 1.0, 2);
        assert!(r.is_err());
    }
}
