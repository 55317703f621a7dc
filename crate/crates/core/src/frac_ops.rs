//! The fractional operators M-^H and M+^H, the normalization constant K_H,
//! the kernels eta_t = M-^H 1_[0,t), and operator duality.

use crate::error::{Error, Result};
use crate::numerics::quad::{
    adaptive_integrate, integrate_semi_infinite, EndpointTransform, QuadratureSpec,
};
use statrs::function::gamma::gamma;
use std::collections::HashMap;
use std::sync::Mutex;

/// Hurst regime relative to the Brownian point H = 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    SubHalf,
    Half,
    SuperHalf,
}

/// Validated Hurst parameter H in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstParam {
    h: f64,
    regime: Regime,
}

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Precondition(format!("H out of (0,1): {h}")));
        }
        let regime = if h < 0.5 {
            Regime::SubHalf
        } else if h == 0.5 {
            Regime::Half
        } else {
            Regime::SuperHalf
        };
        Ok(Self { h, regime })
    }

    pub fn value(&self) -> f64 {
        self.h
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }
}

/// Tail behaviour of a function outside its effective support; the operators
/// need it to place quadrature cutoffs.
#[derive(Debug, Clone, Copy)]
pub enum Decay {
    CompactSupport,
    Gaussian { alpha: f64 },
    Polynomial { power: f64 },
}

/// One term coef * (x - center)^power * exp(-alpha (x - center)^2).
#[derive(Debug, Clone, Copy)]
pub struct GaussPolyTerm {
    pub coef: f64,
    pub power: u32,
    pub alpha: f64,
    pub center: f64,
}

impl GaussPolyTerm {
    fn eval(&self, x: f64) -> f64 {
        let u = x - self.center;
        self.coef * u.powi(self.power as i32) * (-self.alpha * u * u).exp()
    }

    /// Half-width r with |term| < ~1e-18 for |x - center| > r.
    fn envelope_radius(&self) -> f64 {
        let target = 42.0 + self.coef.abs().max(1.0).ln();
        let mut r = (60.0 / self.alpha).sqrt();
        for _ in 0..4 {
            r = ((target + self.power as f64 * r.max(1.0).ln()) / self.alpha).sqrt();
        }
        r
    }
}

/// A real function of one variable in one of the supported representations.
#[derive(Debug, Clone)]
pub enum RealFunction1D {
    /// 1_[a, b)
    Indicator { a: f64, b: f64 },
    /// Finite sum of Gaussian-damped monomials.
    GaussPoly { terms: Vec<GaussPolyTerm> },
    /// Uniform-grid samples with linear interpolation, zero outside.
    Grid {
        x0: f64,
        dx: f64,
        values: Vec<f64>,
        decay: Option<Decay>,
    },
}

impl RealFunction1D {
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Precondition(format!("bad indicator segment [{a}, {b})")));
        }
        Ok(RealFunction1D::Indicator { a, b })
    }

    pub fn gauss_poly(terms: Vec<GaussPolyTerm>) -> Result<Self> {
        if terms.iter().any(|t| !(t.alpha > 0.0)) {
            return Err(Error::Precondition("GaussPoly terms need alpha > 0".into()));
        }
        Ok(RealFunction1D::GaussPoly { terms })
    }

    pub fn gaussian(alpha: f64) -> Self {
        RealFunction1D::GaussPoly {
            terms: vec![GaussPolyTerm {
                coef: 1.0,
                power: 0,
                alpha,
                center: 0.0,
            }],
        }
    }

    pub fn grid(x0: f64, dx: f64, values: Vec<f64>, decay: Option<Decay>) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::Precondition("grid spacing must be > 0".into()));
        }
        if values.len() < 2 {
            return Err(Error::Precondition("grid needs at least two samples".into()));
        }
        Ok(RealFunction1D::Grid {
            x0,
            dx,
            values,
            decay,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RealFunction1D::Indicator { a, b } => {
                if x >= *a && x < *b {
                    1.0
                } else {
                    0.0
                }
            }
            RealFunction1D::GaussPoly { terms } => terms.iter().map(|t| t.eval(x)).sum(),
            RealFunction1D::Grid { x0, dx, values, .. } => {
                let u = (x - x0) / dx;
                if u < 0.0 || u > (values.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (u.floor() as usize).min(values.len() - 2);
                let frac = u - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        }
    }

    /// Effective support [lo, hi]: |f| is negligible outside.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            RealFunction1D::Indicator { a, b } => (*a, *b),
            RealFunction1D::GaussPoly { terms } => {
                if terms.is_empty() {
                    return (0.0, 0.0);
                }
                let lo = terms
                    .iter()
                    .map(|t| t.center - t.envelope_radius())
                    .fold(f64::INFINITY, f64::min);
                let hi = terms
                    .iter()
                    .map(|t| t.center + t.envelope_radius())
                    .fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            RealFunction1D::Grid { x0, dx, values, .. } => {
                (*x0, x0 + dx * (values.len() - 1) as f64)
            }
        }
    }

    pub fn has_decay_metadata(&self) -> bool {
        match self {
            RealFunction1D::Grid { decay, .. } => decay.is_some(),
            _ => true,
        }
    }

    /// Discontinuity locations (quadrature panels are split there).
    pub fn jump_points(&self) -> Vec<f64> {
        match self {
            RealFunction1D::Indicator { a, b } => vec![*a, *b],
            _ => vec![],
        }
    }
}

static K_CACHE: Mutex<Option<HashMap<u64, f64>>> = Mutex::new(None);

/// Normalization constant K_H with |M-^H 1_[0,t)|_0^2 = t^{2H}:
/// Gamma(H+1/2) (1/(2H) + int_0^inf ((1+s)^{H-1/2} - s^{H-1/2})^2 ds)^{-1/2}.
pub fn k_constant(h: HurstParam) -> Result<f64> {
    let key = h.value().to_bits();
    if let Some(cache) = K_CACHE.lock().unwrap().as_ref() {
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
    }
    let v = k_constant_uncached(h.value())?;
    let mut guard = K_CACHE.lock().unwrap();
    guard.get_or_insert_with(HashMap::new).insert(key, v);
    Ok(v)
}

fn k_constant_uncached(h: f64) -> Result<f64> {
    if h == 0.5 {
        return Ok(1.0);
    }
    let a = h - 0.5;
    let f = move |s: f64| {
        // (1+s)^a - s^a; for large s the direct difference cancels, so use
        // s^a * ((1 + 1/s)^a - 1) via expm1/ln_1p there
        let d = if s <= 1.0 {
            (1.0 + s).powf(a) - s.powf(a)
        } else {
            s.powf(a) * (a * (1.0 / s).ln_1p()).exp_m1()
        };
        d * d
    };
    let de = QuadratureSpec::default().with_transform(EndpointTransform::DoubleExponential);
    // near-origin panel carries the s^{2H-1} singularity for H < 1/2
    let head = adaptive_integrate(f, 0.0, 1.0, &de)?;
    let tail = integrate_semi_infinite(f, 1.0, &de)?;
    let integral = head.value + tail.value;
    Ok(gamma(h + 0.5) * (1.0 / (2.0 * h) + integral).powf(-0.5))
}

fn coef_eta(h: HurstParam) -> Result<f64> {
    Ok(k_constant(h)? / gamma(h.value() + 0.5))
}

/// hi^e - lo^e for 0 <= lo <= hi, stable against cancellation when the
/// two bases are close (or both large).
fn stable_pow_diff(e: f64, hi: f64, lo: f64) -> f64 {
    if lo <= 0.0 {
        return if hi > 0.0 { hi.powf(e) } else { 0.0 };
    }
    if hi <= lo {
        return 0.0;
    }
    lo.powf(e) * (e * ((hi - lo) / lo).ln_1p()).exp_m1()
}

/// (M-^H 1_[a,b))(x) in closed form, valid in every Hurst regime.
fn m_minus_indicator(h: HurstParam, a: f64, b: f64, x: f64) -> Result<f64> {
    if h.regime() == Regime::Half {
        return Ok(if x >= a && x < b { 1.0 } else { 0.0 });
    }
    let e = h.value() - 0.5;
    let c = coef_eta(h)?;
    Ok(c * stable_pow_diff(e, b - x, a - x))
}

/// (M+^H 1_[a,b))(x) in closed form (mirror image of the minus case).
fn m_plus_indicator(h: HurstParam, a: f64, b: f64, x: f64) -> Result<f64> {
    if h.regime() == Regime::Half {
        return Ok(if x >= a && x < b { 1.0 } else { 0.0 });
    }
    let e = h.value() - 0.5;
    let c = coef_eta(h)?;
    Ok(c * stable_pow_diff(e, x - a, x - b))
}

/// Direction of the fractional kernel: minus looks ahead (f(x + .)),
/// plus looks back (f(x - .)).
#[derive(Clone, Copy)]
enum Side {
    Minus,
    Plus,
}

fn shifted(f: &RealFunction1D, x: f64, y: f64, side: Side) -> f64 {
    match side {
        Side::Minus => f.eval(x + y),
        Side::Plus => f.eval(x - y),
    }
}

/// Riemann-Liouville branch for H > 1/2:
/// K_H / Gamma(H-1/2) * int_0^inf f(x -+ t) t^{H-3/2} dt.
fn fractional_integral(h: HurstParam, f: &RealFunction1D, x: f64, side: Side) -> Result<f64> {
    let hv = h.value();
    let c = k_constant(h)? / gamma(hv - 0.5);
    let (lo, hi) = f.bounds();
    // range of t with x -+ t inside the support
    let upper = match side {
        Side::Minus => hi - x,
        Side::Plus => x - lo,
    };
    if upper <= 0.0 {
        return Ok(0.0);
    }
    // substitution t = u^p with p = 1/(H - 1/2) turns t^{H-3/2} dt into p du,
    // removing the endpoint singularity exactly (robust even as H -> 1/2+)
    let order = hv - 0.5;
    let p = 1.0 / order;
    let u_max = upper.powf(order);
    let g = |u: f64| shifted(f, x, u.powf(p), side);
    let spec = QuadratureSpec::default();
    let total = adaptive_integrate(g, 0.0, u_max, &spec)?.value * p;
    Ok(c * total)
}

const MARCHAUD_EPS0: f64 = 1e-2;
const MARCHAUD_LEVELS: usize = 8;
const MARCHAUD_TOL: f64 = 1e-10;

/// Marchaud branch for H < 1/2, evaluated on a geometric epsilon sequence
/// with Richardson extrapolation (leading truncation order H + 1/2).
fn marchaud(h: HurstParam, f: &RealFunction1D, x: f64, side: Side) -> Result<f64> {
    let hv = h.value();
    let c = (0.5 - hv) * k_constant(h)? / gamma(hv + 0.5);
    let fx = f.eval(x);
    let (lo, hi) = f.bounds();
    let y_cut = match side {
        Side::Minus => (hi - x).max(2.0 * MARCHAUD_EPS0),
        Side::Plus => (x - lo).max(2.0 * MARCHAUD_EPS0),
    };
    let g = |y: f64| (fx - shifted(f, x, y, side)) * y.powf(hv - 1.5);
    let spec = QuadratureSpec::default();

    // int_{y_cut}^inf: f(x -+ y) is negligible there, so the f(x) part is
    // analytic and the rest is a fast-decaying correction.
    let tail_const = fx * y_cut.powf(hv - 0.5) / (0.5 - hv);
    let tail_corr = integrate_semi_infinite(
        |y| shifted(f, x, y, side) * y.powf(hv - 1.5),
        y_cut,
        &spec,
    )?
    .value;

    let mut eps = MARCHAUD_EPS0;
    let mut value = adaptive_integrate(g, eps, y_cut, &spec)?.value + tail_const - tail_corr;
    let q = hv + 0.5;
    let r1 = 2f64.powf(-q);
    let r2 = 2f64.powf(-(q + 1.0));
    let mut prev_i = value;
    let mut prev_r: Option<f64> = None;
    let mut prev_t: Option<f64> = None;
    for _ in 1..MARCHAUD_LEVELS {
        let next_eps = eps / 2.0;
        let increment = adaptive_integrate(g, next_eps, eps, &spec)?.value;
        let i_k = prev_i + increment;
        let r_k = (i_k - r1 * prev_i) / (1.0 - r1);
        if let Some(rp) = prev_r {
            let t_k = (r_k - r2 * rp) / (1.0 - r2);
            if let Some(tp) = prev_t {
                if (t_k - tp).abs() < MARCHAUD_TOL * (1.0 + t_k.abs()) {
                    return Ok(c * t_k);
                }
            }
            prev_t = Some(t_k);
        }
        prev_r = Some(r_k);
        prev_i = i_k;
        eps = next_eps;
        value = i_k;
    }
    if let Some(t_k) = prev_t {
        // extrapolants stopped moving at coarse tolerance; accept, else fail
        if let Some(rp) = prev_r {
            if (t_k - rp).abs() < 1e-6 * (1.0 + t_k.abs()) {
                return Ok(c * t_k);
            }
        }
        return Err(Error::convergence(
            "Marchaud extrapolation did not settle",
            c * t_k,
            (t_k - value).abs(),
        ));
    }
    Err(Error::convergence(
        "Marchaud extrapolation produced no extrapolant",
        c * value,
        f64::NAN,
    ))
}

fn apply_m(h: HurstParam, f: &RealFunction1D, x: f64, side: Side) -> Result<f64> {
    if !f.has_decay_metadata() {
        return Err(Error::Precondition(
            "grid function lacks decay metadata".into(),
        ));
    }
    if let RealFunction1D::Indicator { a, b } = f {
        return match side {
            Side::Minus => m_minus_indicator(h, *a, *b, x),
            Side::Plus => m_plus_indicator(h, *a, *b, x),
        };
    }
    match h.regime() {
        Regime::Half => Ok(f.eval(x)),
        Regime::SuperHalf => fractional_integral(h, f, x, side),
        Regime::SubHalf => marchaud(h, f, x, side),
    }
}

/// (M-^H f)(x).
pub fn apply_m_minus(h: HurstParam, f: &RealFunction1D, x: f64) -> Result<f64> {
    apply_m(h, f, x, Side::Minus)
}

/// (M+^H f)(x).
pub fn apply_m_plus(h: HurstParam, f: &RealFunction1D, x: f64) -> Result<f64> {
    apply_m(h, f, x, Side::Plus)
}

/// eta_t = M-^H 1_[0,t); square-integrable with |eta_t|_0^2 = t^{2H}.
#[derive(Debug, Clone)]
pub struct EtaKernel {
    h: HurstParam,
    t: f64,
    coef: f64,
}

impl EtaKernel {
    pub fn h(&self) -> HurstParam {
        self.h
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.t {
            return 0.0;
        }
        if self.h.regime() == Regime::Half {
            return if x >= 0.0 { 1.0 } else { 0.0 };
        }
        let e = self.h.value() - 0.5;
        if x >= 0.0 {
            self.coef * (self.t - x).powf(e)
        } else {
            self.coef * stable_pow_diff(e, self.t - x, -x)
        }
    }

    /// |eta_t|_0^2 by quadrature (the closed form is t^{2H}; this is the
    /// independent route used by the norm-identity checks).
    pub fn norm_sq_quadrature(&self) -> Result<f64> {
        let t = self.t;
        let hv = self.h.value();
        let e = hv - 0.5;
        let de = eta_quad_spec();
        let sq = |x: f64| {
            let v = self.eval(x);
            v * v
        };
        // body in the distance variable y = t - x: the kernel there is
        // coef * y^e, and working in y avoids the catastrophic t - (t - y)
        // cancellation next to the singular endpoint; the substitution
        // y = u^{1/(2H)} then flattens y^{2H-1} exactly
        let ps = QuadratureSpec::new(
            1e-11,
            1e-9,
            4000,
            EndpointTransform::PowerSubstitution { exponent: 1.0 / (2.0 * hv) },
        )?;
        let coef = self.coef;
        let is_half = self.h.regime() == Regime::Half;
        let body = adaptive_integrate(
            |y| {
                if is_half {
                    return 1.0;
                }
                let v = coef * y.powf(e);
                v * v
            },
            0.0,
            t,
            &ps,
        )?;
        // split the left tail at -1: the u^{2H-1} divergence at 0- (H < 1/2)
        // again yields to the power map; for H >= 1/2 the integrand is
        // bounded there and tanh-sinh suffices
        let near = if hv < 0.5 {
            adaptive_integrate(|u| sq(-u), 0.0, 1.0, &ps)?
        } else {
            adaptive_integrate(|u| sq(-u), 0.0, 1.0, &de)?
        };
        // far tail decays like u^{2H-3}, too slowly for a generic map at
        // large H; u = 1/v turns it into v^{1-2H} on (0,1], which the power
        // substitution v = w^{1/(2-2H)} flattens exactly
        let ps_far = QuadratureSpec::new(
            1e-11,
            1e-9,
            4000,
            EndpointTransform::PowerSubstitution { exponent: 1.0 / (2.0 - 2.0 * hv) },
        )?;
        let far = adaptive_integrate(|v| sq(-1.0 / v) / (v * v), 0.0, 1.0, &ps_far)?;
        Ok(body.value + near.value + far.value)
    }
}

// eta^2 has power singularities at both 0 and t; asking for the default
// 1e-12 there burns the subdivision budget for digits nobody consumes.
fn eta_quad_spec() -> QuadratureSpec {
    QuadratureSpec::new(1e-11, 1e-9, 4000, EndpointTransform::DoubleExponential).unwrap()
}

pub fn eta(h: HurstParam, t: f64) -> Result<EtaKernel> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("eta needs t > 0, got {t}")));
    }
    Ok(EtaKernel {
        h,
        t,
        coef: coef_eta(h)?,
    })
}

/// <eta_s, eta_t> by quadrature over the union of supports.
pub fn eta_inner(h: HurstParam, s: f64, t: f64) -> Result<f64> {
    let ks = eta(h, s)?;
    let kt = eta(h, t)?;
    let m = s.min(t);
    let de = eta_quad_spec();
    let prod = |x: f64| ks.eval(x) * kt.eval(x);
    let body = adaptive_integrate(prod, 0.0, m, &de)?;
    let near = adaptive_integrate(|u| prod(-u), 0.0, 1.0, &de)?;
    let far = integrate_semi_infinite(|u| prod(-u), 1.0, &de)?;
    Ok(body.value + near.value + far.value)
}

/// |int f1 (M- f2) - int (M+ f1) f2|, both sides by quadrature.
pub fn duality_residual(h: HurstParam, f1: &RealFunction1D, f2: &RealFunction1D) -> Result<f64> {
    let lhs = pair_with_operator(h, f1, f2, Side::Minus)?;
    let rhs = pair_with_operator(h, f2, f1, Side::Plus)?;
    Ok((lhs - rhs).abs())
}

/// int plain(x) * (M_side operated)(x) dx.
fn pair_with_operator(
    h: HurstParam,
    plain: &RealFunction1D,
    operated: &RealFunction1D,
    side: Side,
) -> Result<f64> {
    let (plo, phi) = plain.bounds();
    let (olo, ohi) = operated.bounds();
    // M- g(x) lives on x < sup supp g; M+ g(x) on x > inf supp g.
    let (lo, hi) = match side {
        Side::Minus => (plo, phi.min(ohi)),
        Side::Plus => (plo.max(olo), phi),
    };
    if !(lo < hi) {
        return Ok(0.0);
    }
    // panel breaks at indicator jumps of either factor
    let mut cuts: Vec<f64> = vec![lo, hi];
    for p in plain.jump_points().into_iter().chain(operated.jump_points()) {
        if p > lo && p < hi {
            cuts.push(p);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let de = QuadratureSpec::default().with_transform(EndpointTransform::DoubleExponential);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let g = |x: f64| -> f64 {
            let m = apply_m(h, operated, x, side).unwrap_or(f64::NAN);
            plain.eval(x) * m
        };
        total += adaptive_integrate(g, a, b, &de)?.value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn hurst_validation_and_regimes() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert_eq!(h(0.3).regime(), Regime::SubHalf);
        assert_eq!(h(0.5).regime(), Regime::Half);
        assert_eq!(h(0.7).regime(), Regime::SuperHalf);
    }

    #[test]
    fn k_constant_is_one_at_half() {
        assert_relative_eq!(k_constant(h(0.5)).unwrap(), 1.0);
    }

    // Independent oracle for K_H: fixed-step tanh-sinh trapezoid sums for the
    // defining s-integral, no shared code with the adaptive GK path.
    fn tanh_sinh_unit<F: Fn(f64) -> f64>(f: F) -> f64 {
        let step = 5e-3;
        let mut acc = 0.0;
        let mut k = -800i64;
        while k <= 800 {
            let u = k as f64 * step;
            let w = std::f64::consts::FRAC_PI_2 * u.sinh();
            let sech = 1.0 / w.cosh();
            let jac = 0.5 * std::f64::consts::FRAC_PI_2 * u.cosh() * sech * sech;
            let x = if w <= 0.0 {
                let e = (2.0 * w).exp();
                e / (1.0 + e)
            } else {
                let e = (-2.0 * w).exp();
                1.0 - e / (1.0 + e)
            };
            let v = f(x) * jac;
            if v.is_finite() {
                acc += v;
            }
            k += 1;
        }
        acc * step
    }

    fn k_oracle(hv: f64) -> f64 {
        let a = hv - 0.5;
        let d2 = move |s: f64| {
            let d = (1.0 + s).powf(a) - s.powf(a);
            d * d
        };
        // [0,1] directly, [1,inf) via s = 1/v
        let head = tanh_sinh_unit(d2);
        let tail = tanh_sinh_unit(|v| d2(1.0 / v) / (v * v));
        gamma(hv + 0.5) * (1.0 / (2.0 * hv) + head + tail).powf(-0.5)
    }

    #[test]
    fn k_constant_matches_brute_force_quadrature() {
        for hv in [0.25, 0.75] {
            let fast = k_constant(h(hv)).unwrap();
            let slow = k_oracle(hv);
            assert_relative_eq!(fast, slow, max_relative = 1e-8);
        }
    }

    #[test]
    fn identity_at_half() {
        let f = RealFunction1D::gaussian(1.0);
        for x in [-1.0, 0.0, 0.7] {
            assert_relative_eq!(apply_m_minus(h(0.5), &f, x).unwrap(), f.eval(x));
            assert_relative_eq!(apply_m_plus(h(0.5), &f, x).unwrap(), f.eval(x));
        }
    }

    #[test]
    fn m_minus_indicator_norm_is_horizon_power() {
        // H = 0.7, f = 1_[0,1): int (M- f)^2 = 1^{2H} = 1
        let k = eta(h(0.7), 1.0).unwrap();
        assert_relative_eq!(k.norm_sq_quadrature().unwrap(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn marchaud_matches_small_epsilon_oracle() {
        // H = 0.3, f = exp(-x^2), x = 0: brute-force direct integral at eps = 1e-8
        let hv = h(0.3);
        let f = RealFunction1D::gaussian(1.0);
        let fast = apply_m_minus(hv, &f, 0.0).unwrap();
        let c = (0.5 - 0.3) * k_constant(hv).unwrap() / gamma(0.8);
        let eps = 1e-8;
        let spec = QuadratureSpec::default();
        let g = |y: f64| (1.0 - (-(y * y)).exp()) * y.powf(0.3 - 1.5);
        let head = adaptive_integrate(g, eps, 10.0, &spec).unwrap().value;
        let tail = 10f64.powf(0.3 - 0.5) / (0.5 - 0.3)
            - integrate_semi_infinite(|y| (-(y * y)).exp() * y.powf(0.3 - 1.5), 10.0, &spec)
                .unwrap()
                .value;
        let oracle = c * (head + tail);
        assert!((fast - oracle).abs() < 1e-5, "fast={fast} oracle={oracle}");
    }

    #[test]
    fn eta_is_indicator_at_half() {
        let k = eta(h(0.5), 2.0).unwrap();
        assert_eq!(k.eval(-0.5), 0.0);
        assert_eq!(k.eval(0.0), 1.0);
        assert_eq!(k.eval(1.9), 1.0);
        assert_eq!(k.eval(2.0), 0.0);
    }

    #[test]
    fn eta_vanishes_ahead_of_horizon() {
        for hv in [0.3, 0.5, 0.7] {
            let k = eta(h(hv), 1.0).unwrap();
            for x in [1.0, 1.5, 10.0] {
                assert_eq!(k.eval(x), 0.0);
            }
        }
    }

    #[test]
    fn eta_norm_identity() {
        for hv in [0.3, 0.5, 0.7] {
            for t in [0.5, 1.0, 2.0] {
                let k = eta(h(hv), t).unwrap();
                let n2 = k.norm_sq_quadrature().unwrap();
                assert_relative_eq!(n2, t.powf(2.0 * hv), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn eta_inner_brownian_overlap() {
        assert_relative_eq!(eta_inner(h(0.5), 1.0, 2.0).unwrap(), 1.0, max_relative = 1e-9);
        assert_relative_eq!(eta_inner(h(0.5), 2.0, 0.5).unwrap(), 0.5, max_relative = 1e-9);
    }

    #[test]
    fn eta_inner_matches_fbm_covariance() {
        let hv = 0.7;
        let got = eta_inner(h(hv), 1.0, 2.0).unwrap();
        let want = 0.5 * (1f64 + 2f64.powf(2.0 * hv) - 1f64.powf(2.0 * hv));
        assert_relative_eq!(got, want, max_relative = 1e-6);
    }

    #[test]
    fn duality_trivial_at_half() {
        let f1 = RealFunction1D::gaussian(1.0);
        let f2 = RealFunction1D::indicator(0.0, 1.0).unwrap();
        assert!(duality_residual(h(0.5), &f1, &f2).unwrap() < 1e-9);
    }

    #[test]
    fn duality_sub_half() {
        let f1 = RealFunction1D::gaussian(1.0);
        let f2 = RealFunction1D::indicator(0.0, 1.0).unwrap();
        assert!(duality_residual(h(0.3), &f1, &f2).unwrap() < 1e-5);
    }

    #[test]
    fn duality_super_half_gauss_poly_pair() {
        let f1 = RealFunction1D::gauss_poly(vec![GaussPolyTerm {
            coef: 1.0,
            power: 1,
            alpha: 0.5,
            center: 0.2,
        }])
        .unwrap();
        let f2 = RealFunction1D::gaussian(1.0);
        assert!(duality_residual(h(0.8), &f1, &f2).unwrap() < 1e-6);
    }

    #[test]
    fn grid_without_decay_metadata_rejected() {
        let g = RealFunction1D::grid(0.0, 0.1, vec![0.0, 1.0, 0.0], None).unwrap();
        assert!(apply_m_minus(h(0.3), &g, 0.05).is_err());
    }

    #[test]
    fn grid_operator_close_to_gaussian_reference() {
        // densely sampled gaussian should reproduce the closed-form route
        let n = 4001;
        let x0 = -10.0;
        let dx = 20.0 / (n - 1) as f64;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let x = x0 + i as f64 * dx;
                (-x * x).exp()
            })
            .collect();
        let g = RealFunction1D::grid(x0, dx, values, Some(Decay::CompactSupport)).unwrap();
        let f = RealFunction1D::gaussian(1.0);
        let hv = h(0.7);
        let a = apply_m_plus(hv, &g, 0.5).unwrap();
        let b = apply_m_plus(hv, &f, 0.5).unwrap();
        assert!((a - b).abs() < 1e-4, "grid {a} vs analytic {b}");
    }

    #[test]
    fn h_continuity_toward_half() {
        let f = RealFunction1D::gaussian(1.0);
        let x = 0.3;
        let fx = f.eval(x);
        let mut prev = f64::INFINITY;
        for dh in [5e-2, 1e-2, 1e-3] {
            let below = (apply_m_minus(h(0.5 - dh), &f, x).unwrap() - fx).abs();
            assert!(below < prev, "not shrinking at dh={dh}: {below} vs {prev}");
            prev = below;
        }
        let mut prev = f64::INFINITY;
        for dh in [5e-2, 1e-2, 1e-3] {
            let above = (apply_m_minus(h(0.5 + dh), &f, x).unwrap() - fx).abs();
            assert!(above < prev, "not shrinking at dh={dh}: {above} vs {prev}");
            prev = above;
        }
    }
}
