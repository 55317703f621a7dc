//! Test functions, U-functionals, and S-transforms: Donsker delta (full and
//! truncated), fractional noise, Wick products, growth-bound verification,
//! and the Monte Carlo oracle that cross-checks the closed forms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frac_ops::{
    apply_m_plus, eta, EtaKernel, GaussPolyTerm, HurstParam, RealFunction1D,
};
use crate::gaussian::{joint_gaussian_sample, JointGaussianSpec};
use crate::numerics::quad::{
    adaptive_integrate, integrate_semi_infinite, EndpointTransform, QuadratureSpec,
};
use crate::numerics::series::truncated_exp;

/// Highest Hermite-function index the expansion builder accepts; the monomial
/// representation stays well-conditioned in this range.
pub const MAX_HERMITE_INDEX: usize = 40;

/// Monomial coefficients p with h_k(x) = (sum_i p_i x^i) e^{-x^2/2}, for the
/// orthonormal Hermite functions h_0, ..., h_k.
fn hermite_poly_coeffs(k_max: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = Vec::with_capacity(k_max + 1);
    all.push(vec![std::f64::consts::PI.powf(-0.25)]);
    for k in 0..k_max {
        let prev = &all[k];
        let mut next = vec![0.0; k + 2];
        let a = (2.0 / (k as f64 + 1.0)).sqrt();
        for (i, &c) in prev.iter().enumerate() {
            next[i + 1] += a * c;
        }
        if k >= 1 {
            let b = (k as f64 / (k as f64 + 1.0)).sqrt();
            for (i, &c) in all[k - 1].iter().enumerate() {
                next[i] -= b * c;
            }
        }
        all.push(next);
    }
    all
}

/// The orthonormal Hermite function h_k as a Gaussian-damped polynomial.
pub fn hermite_function(k: usize) -> Result<RealFunction1D> {
    expansion_function(&{
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        c
    })
}

fn expansion_function(coeffs: &[f64]) -> Result<RealFunction1D> {
    if coeffs.len() > MAX_HERMITE_INDEX + 1 {
        return Err(Error::Precondition(format!(
            "Hermite expansion degree {} exceeds {MAX_HERMITE_INDEX}",
            coeffs.len() - 1
        )));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Precondition("expansion coefficients must be finite".into()));
    }
    let basis = hermite_poly_coeffs(coeffs.len().saturating_sub(1));
    let mut mono = vec![0.0; coeffs.len()];
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (i, &p) in basis[k].iter().enumerate() {
            mono[i] += c * p;
        }
    }
    let terms: Vec<GaussPolyTerm> = mono
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| GaussPolyTerm {
            coef: c,
            power: i as u32,
            alpha: 0.5,
            center: 0.0,
        })
        .collect();
    RealFunction1D::gauss_poly(terms)
}

enum Component {
    // coefficients on the orthonormal Hermite functions; func is the same
    // object as a GaussPoly so the fractional operators can act on it
    Hermite { coeffs: Vec<f64>, func: RealFunction1D },
    // grid override: norms and inner products fall back to quadrature
    Grid { func: RealFunction1D, norm_sq: f64 },
}

impl Component {
    fn func(&self) -> &RealFunction1D {
        match self {
            Component::Hermite { func, .. } => func,
            Component::Grid { func, .. } => func,
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Component::Hermite { coeffs, .. } => coeffs.iter().map(|c| c * c).sum(),
            Component::Grid { norm_sq, .. } => *norm_sq,
        }
    }
}

/// A vector-valued Schwartz test function: d components, each a finite
/// expansion in the orthonormal Hermite family (or a grid override).
pub struct TestFunction {
    components: Vec<Component>,
}

impl TestFunction {
    pub fn from_hermite(component_coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if component_coeffs.is_empty() {
            return Err(Error::Precondition("test function needs d >= 1 components".into()));
        }
        let components = component_coeffs
            .into_iter()
            .map(|coeffs| {
                let func = expansion_function(&coeffs)?;
                Ok(Component::Hermite { coeffs, func })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TestFunction { components })
    }

    /// The zero function in d components.
    pub fn zero(d: usize) -> Result<Self> {
        Self::from_hermite(vec![vec![]; d])
    }

    /// Replace component j with a grid representation; its L2 norm is then
    /// computed by quadrature over the grid's support.
    pub fn with_grid_component(mut self, j: usize, func: RealFunction1D) -> Result<Self> {
        if j >= self.components.len() {
            return Err(Error::Precondition(format!("component index {j} out of range")));
        }
        if !func.has_decay_metadata() {
            return Err(Error::Precondition(
                "grid override needs decay metadata to be square-integrable".into(),
            ));
        }
        let (lo, hi) = func.bounds();
        let spec = QuadratureSpec::default();
        let sq = |x: f64| {
            let v = func.eval(x);
            v * v
        };
        let norm_sq = adaptive_integrate(sq, lo, hi, &spec)?.value;
        self.components[j] = Component::Grid { func, norm_sq };
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, j: usize) -> &RealFunction1D {
        self.components[j].func()
    }

    pub fn component_norm_sq(&self, j: usize) -> f64 {
        self.components[j].norm_sq()
    }

    /// |phi|_0^2 = sum_j |phi_j|^2, closed form for Hermite components.
    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sq()).sum()
    }

    /// <phi_i, psi_j>: coefficient dot product when both sides are Hermite
    /// expansions, quadrature otherwise.
    pub fn l2_inner(&self, i: usize, other: &TestFunction, j: usize) -> Result<f64> {
        match (&self.components[i], &other.components[j]) {
            (Component::Hermite { coeffs: a, .. }, Component::Hermite { coeffs: b, .. }) => {
                Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
            }
            (ca, cb) => {
                let (fa, fb) = (ca.func(), cb.func());
                let (alo, ahi) = fa.bounds();
                let (blo, bhi) = fb.bounds();
                let (lo, hi) = (alo.max(blo), ahi.min(bhi));
                if !(lo < hi) {
                    return Ok(0.0);
                }
                let spec = QuadratureSpec::default();
                Ok(adaptive_integrate(|x| fa.eval(x) * fb.eval(x), lo, hi, &spec)?.value)
            }
        }
    }
}

/// <f, eta_t> by quadrature: body over [0, t], then the negative axis split
/// at -1 (power singularity at 0-, power decay beyond).
pub fn l2_inner_eta(f: &RealFunction1D, kernel: &EtaKernel) -> Result<f64> {
    let t = kernel.horizon();
    let de = QuadratureSpec::new(1e-11, 1e-9, 4000, EndpointTransform::DoubleExponential)?;
    let prod = |x: f64| f.eval(x) * kernel.eval(x);
    let body = adaptive_integrate(prod, 0.0, t, &de)?;
    let near = adaptive_integrate(|u| prod(-u), 0.0, 1.0, &de)?;
    let far = integrate_semi_infinite(|u| prod(-u), 1.0, &de)?;
    Ok(body.value + near.value + far.value)
}

/// Point evaluation data for a Donsker delta of d-dimensional fBm at time t.
#[derive(Clone, Debug)]
pub struct DonskerSpec {
    pub x: Vec<f64>,
    pub h: HurstParam,
    pub t: f64,
    pub truncation: Option<u32>,
}

impl DonskerSpec {
    pub fn new(x: Vec<f64>, h: HurstParam, t: f64) -> Result<Self> {
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("x must be nonempty and finite".into()));
        }
        if !(t > 0.0) {
            return Err(Error::Precondition(format!("t > 0 required, got {t}")));
        }
        Ok(DonskerSpec {
            x,
            h,
            t,
            truncation: None,
        })
    }

    pub fn with_truncation(mut self, n: u32) -> Self {
        self.truncation = Some(n);
        self
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }
}

fn check_dims(spec: &DonskerSpec, phi: &TestFunction) -> Result<()> {
    if spec.d() != phi.d() {
        return Err(Error::Precondition(format!(
            "dimension mismatch: spec d={}, phi d={}",
            spec.d(),
            phi.d()
        )));
    }
    Ok(())
}

/// Gaussian-exponent argument of the Donsker S-transform at dilation z and
/// the prefactor (2 pi t^{2H})^{-d/2}.
fn donsker_parts(spec: &DonskerSpec, z: Complex64, phi: &TestFunction) -> Result<(f64, Complex64)> {
    check_dims(spec, phi)?;
    let v = spec.t.powf(2.0 * spec.h.value());
    let kernel = eta(spec.h, spec.t)?;
    let mut arg = Complex64::new(0.0, 0.0);
    for j in 0..spec.d() {
        let a = l2_inner_eta(phi.component(j), &kernel)?;
        let dev = Complex64::new(spec.x[j], 0.0) - z * a;
        arg -= dev * dev / (2.0 * v);
    }
    let pref = (2.0 * std::f64::consts::PI * v).powf(-(spec.d() as f64) / 2.0);
    Ok((pref, arg))
}

/// S-transform of the Donsker delta at z phi:
/// (2 pi t^{2H})^{-d/2} exp(-sum_j (x_j - z<phi_j, eta_t>)^2 / (2 t^{2H})).
pub fn donsker_s(spec: &DonskerSpec, z: Complex64, phi: &TestFunction) -> Result<Complex64> {
    if spec.truncation.is_some() {
        return Err(Error::Precondition(
            "spec carries a truncation; use donsker_s_truncated".into(),
        ));
    }
    let (pref, arg) = donsker_parts(spec, z, phi)?;
    Ok(pref * arg.exp())
}

/// Truncated variant: the exponential is replaced by its tail series from
/// order N on (N = 0 recovers donsker_s).
pub fn donsker_s_truncated(spec: &DonskerSpec, z: Complex64, phi: &TestFunction) -> Result<Complex64> {
    let n = spec.truncation.ok_or_else(|| {
        Error::Precondition("spec has no truncation order; use donsker_s".into())
    })?;
    let (pref, arg) = donsker_parts(spec, z, phi)?;
    Ok(pref * truncated_exp(n, arg))
}

/// S-transform of fractional noise in component i at time t: (M_+^H phi_i)(t).
pub fn fractional_noise_s(h: HurstParam, t: f64, i: usize, phi: &TestFunction) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("t > 0 required, got {t}")));
    }
    if i >= phi.d() {
        return Err(Error::Precondition(format!("component {i} out of range")));
    }
    apply_m_plus(h, phi.component(i), t)
}

/// Norm used in growth bounds: plain L2, or L2 plus the sup of M_+^H phi over
/// a (0, T] grid (the stronger norm the current bound needs).
#[derive(Clone, Debug, PartialEq)]
pub enum GrowthNorm {
    L2,
    L2PlusSupMPlus { h: HurstParam, horizon: f64 },
}

impl GrowthNorm {
    /// Ordering by strength so Wick products can take the stronger of the two.
    fn rank(&self) -> u8 {
        match self {
            GrowthNorm::L2 => 0,
            GrowthNorm::L2PlusSupMPlus { .. } => 1,
        }
    }

    pub fn eval(&self, phi: &TestFunction) -> Result<f64> {
        let l2 = phi.norm_sq().sqrt();
        match self {
            GrowthNorm::L2 => Ok(l2),
            GrowthNorm::L2PlusSupMPlus { h, horizon } => {
                let mut sup = 0.0f64;
                let grid = 32;
                for k in 1..=grid {
                    let t = horizon * k as f64 / grid as f64;
                    for i in 0..phi.d() {
                        sup = sup.max(apply_m_plus(*h, phi.component(i), t)?.abs());
                    }
                }
                Ok(l2 + sup)
            }
        }
    }
}

type Evaluator = Box<dyn Fn(Complex64, &TestFunction) -> Result<Complex64> + Send + Sync>;

/// A U-functional: the (z, phi) evaluator together with its growth metadata
/// |U(z, phi)| <= K1 exp(K2 |z|^2 ||phi||^2).
pub struct UFunctional {
    eval: Evaluator,
    pub k1: f64,
    pub k2: f64,
    pub norm: GrowthNorm,
}

impl UFunctional {
    pub fn new(eval: Evaluator, k1: f64, k2: f64, norm: GrowthNorm) -> Result<Self> {
        if !(k1 >= 0.0) || !(k2 >= 0.0) {
            return Err(Error::Precondition("growth constants must be >= 0".into()));
        }
        Ok(UFunctional { eval, k1, k2, norm })
    }

    pub fn eval(&self, z: Complex64, phi: &TestFunction) -> Result<Complex64> {
        (self.eval)(z, phi)
    }

    /// The constant-one functional (Wick unit).
    pub fn unit() -> Self {
        UFunctional {
            eval: Box::new(|_, _| Ok(Complex64::new(1.0, 0.0))),
            k1: 1.0,
            k2: 0.0,
            norm: GrowthNorm::L2,
        }
    }
}

/// Donsker delta as a U-functional; K1 = (2 pi t^{2H})^{-d/2}, K2 = 1.
pub fn donsker_functional(spec: DonskerSpec) -> Result<UFunctional> {
    if spec.truncation.is_some() {
        return Err(Error::Precondition("truncated specs are not U-functionals here".into()));
    }
    let v = spec.t.powf(2.0 * spec.h.value());
    let k1 = (2.0 * std::f64::consts::PI * v).powf(-(spec.d() as f64) / 2.0);
    UFunctional::new(
        Box::new(move |z, phi| donsker_s(&spec, z, phi)),
        k1,
        1.0,
        GrowthNorm::L2,
    )
}

/// Fractional noise in component i at time t as a U-functional of z phi:
/// z (M_+^H phi_i)(t). |z| c <= exp(|z|^2 c^2 / 2) gives K1 = 1, K2 = 1/2
/// with the sup-augmented norm.
pub fn fractional_noise_functional(h: HurstParam, horizon: f64, t: f64, i: usize) -> Result<UFunctional> {
    if !(t > 0.0 && t <= horizon) {
        return Err(Error::Precondition(format!("need 0 < t <= horizon, got t={t}")));
    }
    UFunctional::new(
        Box::new(move |z, phi| {
            let m = fractional_noise_s(h, t, i, phi)?;
            Ok(z * m)
        }),
        1.0,
        0.5,
        GrowthNorm::L2PlusSupMPlus { h, horizon },
    )
}

/// Wick product: the S-evaluations multiply pointwise and the growth
/// constants compose (K1 multiplies, K2 adds, the stronger norm wins).
pub fn wick_product(u1: UFunctional, u2: UFunctional) -> UFunctional {
    let norm = if u1.norm.rank() >= u2.norm.rank() {
        u1.norm.clone()
    } else {
        u2.norm.clone()
    };
    let (e1, e2) = (u1.eval, u2.eval);
    UFunctional {
        eval: Box::new(move |z, phi| Ok(e1(z, phi)? * e2(z, phi)?)),
        k1: u1.k1 * u2.k1,
        k2: u1.k2 + u2.k2,
        norm,
    }
}

#[derive(Debug)]
pub struct GrowthReport {
    pub max_ratio: f64,
    pub pass: bool,
    /// (z, ratio) of the worst violation, when pass is false
    pub witness: Option<(Complex64, f64)>,
}

/// Check |u(z, phi)| <= K1 exp(K2 |z|^2 ||phi||^2) at every sample.
pub fn growth_bound_check(
    u: &UFunctional,
    phi: &TestFunction,
    z_samples: &[Complex64],
) -> Result<GrowthReport> {
    let nsq = {
        let n = u.norm.eval(phi)?;
        n * n
    };
    let mut max_ratio = 0.0f64;
    let mut worst = None;
    for &z in z_samples {
        let bound = u.k1 * (u.k2 * z.norm_sqr() * nsq).exp();
        let val = u.eval(z, phi)?.norm();
        let ratio = if bound > 0.0 { val / bound } else { f64::INFINITY };
        if ratio > max_ratio {
            max_ratio = ratio;
            worst = Some(z);
        }
    }
    let pass = max_ratio <= 1.0 + 1e-10;
    Ok(GrowthReport {
        max_ratio,
        pass,
        witness: if pass { None } else { worst.map(|z| (z, max_ratio)) },
    })
}

/// Mollifier widths for the MC oracle; Richardson in eps^2 over (eps, eps/2).
const MC_EPS: f64 = 0.05;
pub const MC_MIN_SAMPLES: usize = 1000;

/// Monte Carlo estimate of the Donsker S-transform at real dilation z:
/// E[delta_eps(x - G_t) exp(z W - z^2 |phi|^2 / 2)] with (G_t, W) the joint
/// Gaussian from eta_inner / l2_inner, Richardson-extrapolated in the
/// mollifier width. Returns (estimate, standard error).
pub fn mc_donsker_s(
    spec: &DonskerSpec,
    z: f64,
    phi: &TestFunction,
    n_samples: usize,
    seed: u64,
) -> Result<(Complex64, f64)> {
    if spec.truncation.is_some() {
        return Err(Error::Precondition("MC oracle handles untruncated specs only".into()));
    }
    if n_samples < MC_MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "MC oracle needs at least {MC_MIN_SAMPLES} samples, got {n_samples}"
        )));
    }
    check_dims(spec, phi)?;
    let d = spec.d();
    let v = spec.t.powf(2.0 * spec.h.value());
    let kernel = eta(spec.h, spec.t)?;
    // block-diagonal covariance over (G_j, W_j) pairs; components independent
    let mut cov = vec![vec![0.0; 2 * d]; 2 * d];
    let mut phi_norm_sq = 0.0;
    for j in 0..d {
        let a = l2_inner_eta(phi.component(j), &kernel)?;
        let b = phi.component_norm_sq(j);
        phi_norm_sq += b;
        cov[2 * j][2 * j] = v;
        cov[2 * j][2 * j + 1] = a;
        cov[2 * j + 1][2 * j] = a;
        cov[2 * j + 1][2 * j + 1] = b;
    }
    let draws = joint_gaussian_sample(&JointGaussianSpec::new(cov)?, n_samples, seed)?;
    let gauss_weight = (-0.5 * z * z * phi_norm_sq).exp();
    let mollified = |eps: f64, dev: f64| {
        (-dev * dev / (2.0 * eps * eps)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * eps)
    };
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for draw in &draws {
        let mut w_exp = 0.0;
        let mut moll_full = 1.0;
        let mut moll_half = 1.0;
        for j in 0..d {
            let g = draw[2 * j];
            let w = draw[2 * j + 1];
            w_exp += z * w;
            let dev = spec.x[j] - g;
            moll_full *= mollified(MC_EPS, dev);
            moll_half *= mollified(MC_EPS / 2.0, dev);
        }
        // common-random-number Richardson pair in eps^2
        let val = w_exp.exp() * gauss_weight * (4.0 * moll_half - moll_full) / 3.0;
        sum += val;
        sumsq += val * val;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    let se = (var / n).sqrt();
    Ok((Complex64::new(mean, 0.0), se))
}
