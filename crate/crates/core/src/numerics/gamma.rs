//! Upper incomplete gamma for any real first argument, including zero and
//! negative integers.

use crate::error::{Error, Result};
use statrs::function::gamma::{gamma, gamma_ur};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Gamma(0, u) = E_1(u): power series below 1, continued fraction above.
fn exponential_integral_e1(u: f64) -> f64 {
    if u <= 1.0 {
        // E_1(u) = -gamma - ln u + sum_{k>=1} (-1)^{k+1} u^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0; // (-u)^k / k!
        for k in 1..=60 {
            term *= -u / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * (sum.abs() + 1.0) {
                break;
            }
        }
        -EULER_GAMMA - u.ln() + sum
    } else {
        // modified Lentz on the standard continued fraction for Gamma(a, u)
        // with a = 0: e^{-u} / (u+1 - 1^2/(u+3 - 2^2/(u+5 - ...)))
        let tiny = 1e-300;
        let mut b = u + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=300 {
            let an = -(i as f64) * (i as f64);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-u).exp() * h
    }
}

/// Gamma(a, u) = int_u^inf y^{a-1} e^{-y} dy, u > 0.
///
/// For a <= 0 the value is reached by downward recurrence
/// Gamma(s, u) = (Gamma(s+1, u) - u^s e^{-u}) / s, seeded at the fractional
/// part of a (or at Gamma(0, u) = E_1(u) when a is an integer).
pub fn upper_incomplete_gamma(a: f64, u: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("upper_incomplete_gamma needs u > 0, got {u}")));
    }
    if !a.is_finite() {
        return Err(Error::Domain("non-finite first argument".into()));
    }
    if a > 0.0 {
        return Ok(gamma(a) * gamma_ur(a, u));
    }
    let (seed_a, mut g) = if a == a.floor() {
        (0.0, exponential_integral_e1(u))
    } else {
        let frac = a - a.floor(); // in (0, 1)
        (frac, gamma(frac) * gamma_ur(frac, u))
    };
    let steps = (seed_a - a).round() as i64;
    let ln_u = u.ln();
    for j in 1..=steps {
        let s = seed_a - j as f64;
        g = (g - (s * ln_u - u).exp()) / s;
    }
    Ok(g)
}
