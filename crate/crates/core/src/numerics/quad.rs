//! Adaptive Gauss-Kronrod quadrature with endpoint-singularity transforms.

use crate::error::{Error, Result};
use std::collections::BinaryHeap;

// 15-point Kronrod nodes/weights and embedded 7-point Gauss weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// How the integrand is remapped before adaptive refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndpointTransform {
    None,
    /// Substitute t = a + u^exponent at the lower endpoint; softens power
    /// singularities t^alpha when exponent is chosen as 1/(alpha+1) or larger.
    PowerSubstitution { exponent: f64 },
    /// tanh-sinh map of the whole panel; handles integrable singularities at
    /// either endpoint.
    DoubleExponential,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub endpoint_transform: EndpointTransform,
}

impl QuadratureSpec {
    pub fn new(
        abs_tol: f64,
        rel_tol: f64,
        max_subdivisions: usize,
        endpoint_transform: EndpointTransform,
    ) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::Precondition("abs_tol must be > 0".into()));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::Precondition("rel_tol must be > 0".into()));
        }
        if max_subdivisions < 1 {
            return Err(Error::Precondition("max_subdivisions must be >= 1".into()));
        }
        if let EndpointTransform::PowerSubstitution { exponent } = endpoint_transform {
            if !(exponent > 0.0) || !exponent.is_finite() {
                return Err(Error::Precondition(
                    "power substitution exponent must be positive and finite".into(),
                ));
            }
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            endpoint_transform,
        })
    }

    pub fn with_transform(mut self, t: EndpointTransform) -> Self {
        self.endpoint_transform = t;
        self
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
            endpoint_transform: EndpointTransform::None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub subdivisions: usize,
}

/// One GK15 pass over [a, b]. Non-finite integrand values are treated as 0;
/// the contract only admits integrable endpoint singularities, where the
/// true contribution of the offending node vanishes with the panel.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let sample = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut fv = [0.0f64; 15];
    fv[7] = sample(c);
    let mut kronrod = WGK[7] * fv[7];
    let mut gauss = WG[3] * fv[7];
    let mut resabs = WGK[7] * fv[7].abs();
    for (i, &xi) in XGK.iter().enumerate().take(7) {
        fv[i] = sample(c - h * xi);
        fv[14 - i] = sample(c + h * xi);
        kronrod += WGK[i] * (fv[i] + fv[14 - i]);
        resabs += WGK[i] * (fv[i].abs() + fv[14 - i].abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (fv[i] + fv[14 - i]);
        }
    }
    // QUADPACK-style rescaling: on rough panels the raw |K - G| estimate is
    // optimistic, so damp it against the variation resasc.
    let mean = kronrod * 0.5;
    let mut resasc = WGK[7] * (fv[7] - mean).abs();
    for (i, &w) in WGK.iter().enumerate().take(7) {
        resasc += w * ((fv[i] - mean).abs() + (fv[14 - i] - mean).abs());
    }
    let resasc = resasc * h.abs();
    let resabs = resabs * h.abs();
    let value = kronrod * h;
    let mut err = ((kronrod - gauss) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * 1.0f64.min((200.0 * err / resasc).powf(1.5));
    }
    (value, err.max(50.0 * f64::EPSILON * resabs))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn adaptive_core<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(f, a, b);
    heap.push(Panel { a, b, value: v, err: e });
    let mut subdivisions = 1usize;
    loop {
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let toterr: f64 = heap.iter().map(|p| p.err).sum();
        if toterr <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(QuadResult {
                value: total,
                error_estimate: toterr,
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::convergence(
                "quadrature subdivision budget exhausted",
                total,
                toterr,
            ));
        }
        let worst = heap.pop().expect("heap non-empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Panel narrower than machine resolution: freeze it.
            let mut frozen = worst;
            frozen.err = 0.0;
            heap.push(frozen);
            continue;
        }
        let (v1, e1) = gk15(f, worst.a, m);
        let (v2, e2) = gk15(f, m, worst.b);
        heap.push(Panel { a: worst.a, b: m, value: v1, err: e1 });
        heap.push(Panel { a: m, b: worst.b, value: v2, err: e2 });
        subdivisions += 1;
    }
}

/// Integrate f over (a, b) to the requested tolerance, applying the
/// endpoint transform named in `spec` first.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(a < b) {
        return Err(Error::Precondition(format!("need a < b, got a={a}, b={b}")));
    }
    match spec.endpoint_transform {
        EndpointTransform::None => adaptive_core(&f, a, b, spec),
        EndpointTransform::PowerSubstitution { exponent } => {
            let p = exponent;
            let upper = (b - a).powf(1.0 / p);
            let g = |u: f64| f(a + u.powf(p)) * p * u.powf(p - 1.0);
            let inner = QuadratureSpec {
                endpoint_transform: EndpointTransform::None,
                ..*spec
            };
            adaptive_core(&g, 0.0, upper, &inner)
        }
        EndpointTransform::DoubleExponential => {
            let h = 0.5 * (b - a);
            let g = |u: f64| {
                let w = std::f64::consts::FRAC_PI_2 * u.sinh();
                let sech = 1.0 / w.cosh();
                let jac = h * std::f64::consts::FRAC_PI_2 * u.cosh() * sech * sech;
                // abscissa measured from the nearer endpoint, so the distance
                // to a singular endpoint keeps full relative precision
                let x = if w <= 0.0 {
                    let e = (2.0 * w).exp();
                    a + h * (2.0 * e / (1.0 + e))
                } else {
                    let e = (-2.0 * w).exp();
                    b - h * (2.0 * e / (1.0 + e))
                };
                f(x) * jac
            };
            let inner = QuadratureSpec {
                endpoint_transform: EndpointTransform::None,
                ..*spec
            };
            // wide window: the underflow region contributes exact zeros, and
            // strong (but integrable) endpoint singularities need the reach
            adaptive_core(&g, -6.5, 6.5, &inner)
        }
    }
}

/// Integrate f over (a, +inf) via x = a + (1-v)/v; infinity maps to v = 0,
/// where abscissas keep absolute precision for slowly decaying tails.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let g = |v: f64| {
        let jac = 1.0 / (v * v);
        f(a + (1.0 - v) / v) * jac
    };
    adaptive_integrate(g, 0.0, 1.0, spec)
}

/// Integrate f over the whole real line (split at 0).
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<QuadResult> {
    let right = integrate_semi_infinite(|x| f(x), 0.0, spec)?;
    let left = integrate_semi_infinite(|x| f(-x), 0.0, spec)?;
    Ok(QuadResult {
        value: left.value + right.value,
        error_estimate: left.error_estimate + right.error_estimate,
        subdivisions: left.subdivisions + right.subdivisions,
    })
}
