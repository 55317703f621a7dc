//! Chaos decomposition of the current: Hermite polynomials, kernel pairings
//! against test functions (full and truncated), and reconstruction of the
//! S-transform from the kernel expansion.

use num_complex::Complex64;

use crate::current::{CurrentEvaluator, CurrentSpec};
use crate::error::{Error, Result};
use crate::numerics::quad::{adaptive_integrate, EndpointTransform, QuadratureSpec};
use crate::stransform::TestFunction;

/// Guard for the Hermite recurrence: values stay inside f64 range and retain
/// useful precision up to here.
pub const MAX_HERMITE_ORDER: u32 = 60;

/// Physicists' Hermite polynomial H_n(x) by the three-term recurrence.
pub fn hermite(n: u32, x: f64) -> Result<f64> {
    if n > MAX_HERMITE_ORDER {
        return Err(Error::Precondition(format!(
            "hermite order {n} exceeds the double-precision guard {MAX_HERMITE_ORDER}"
        )));
    }
    let mut prev = 1.0;
    if n == 0 {
        return Ok(prev);
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Multi-index over d components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndex {
    entries: Vec<u32>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Precondition("multi-index needs d >= 1 entries".into()));
        }
        Ok(MultiIndex { entries })
    }

    pub fn d(&self) -> usize {
        self.entries.len()
    }

    pub fn entry(&self, j: usize) -> u32 {
        self.entries[j]
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn total(&self) -> u32 {
        self.entries.iter().sum()
    }

    /// product of entry factorials
    pub fn factorial(&self) -> f64 {
        self.entries
            .iter()
            .map(|&n| (1..=n as u64).map(|k| k as f64).product::<f64>())
            .product()
    }
}

/// All multi-indices over d slots with the given total.
pub fn indices_with_total(total: u32, d: usize) -> Vec<MultiIndex> {
    fn rec(total: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            prefix.push(total);
            out.push(MultiIndex {
                entries: prefix.clone(),
            });
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            rec(total - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, d, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug)]
pub struct KernelPairing {
    pub index: MultiIndex,
    pub value: f64,
    pub error_estimate: f64,
}

fn real_quadrature<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let slot = std::cell::RefCell::new(None::<Error>);
    let g = |t: f64| match f(t) {
        Ok(v) => v,
        Err(e) => {
            slot.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let r = adaptive_integrate(g, a, b, spec);
    if let Some(e) = slot.borrow_mut().take() {
        return Err(e);
    }
    let r = r?;
    Ok((r.value, r.error_estimate))
}

fn pairing_quad_spec(alpha: f64) -> Result<QuadratureSpec> {
    let transform = if alpha >= 0.0 {
        EndpointTransform::DoubleExponential
    } else {
        EndpointTransform::PowerSubstitution {
            exponent: 1.0 / (1.0 + alpha),
        }
    };
    QuadratureSpec::new(1e-10, 1e-9, 2000, transform)
}

/// Pairing of the chaos kernel of order total(index) + 1 against
/// phi^{(x) index} x phi_i: the coefficient of z^{total+1} restricted to one
/// multi-index of the Donsker expansion under the t-integral.
pub fn kernel_pairing_with(ev: &CurrentEvaluator, index: &MultiIndex) -> Result<KernelPairing> {
    let spec = ev.spec();
    if spec.truncation.is_some() {
        return Err(Error::Precondition(
            "spec carries a truncation; use truncated_kernel_pairing".into(),
        ));
    }
    if index.d() != spec.d() {
        return Err(Error::Precondition(format!(
            "index has {} slots, spec d = {}",
            index.d(),
            spec.d()
        )));
    }
    let hv = spec.h.value();
    let d = spec.d() as f64;
    let hd = hv * d;
    let n = index.total() as f64;
    let q: f64 = spec.x.iter().map(|v| v * v).sum();
    let inv_fact = 1.0 / index.factorial();
    // envelope near 0 for x = 0: a_j ~ O(t) gives t^{n(1-H) - Hd}
    let alpha = if q > 0.0 { 0.0 } else { n * (1.0 - hv) - hd };
    let quad = pairing_quad_spec(alpha)?;
    let horizon = spec.horizon;
    let x = spec.x.clone();
    let (value, err) = real_quadrature(
        |t| {
            if t <= 0.0 {
                return Ok(0.0);
            }
            let v = t.powf(2.0 * hv);
            let sigma = (2.0 * v).sqrt();
            // t^{-Hd} e^{-|x|^2/(2v)} folded into one exponential
            let damp = (-hd * t.ln() - q / (2.0 * v)).exp();
            if damp == 0.0 {
                return Ok(0.0);
            }
            let mut prod = 1.0;
            for (j, &xj) in x.iter().enumerate() {
                let nj = index.entry(j);
                prod *= hermite(nj, xj / sigma)?;
                if nj > 0 {
                    prod *= ev.inner(j, t)?.powi(nj as i32);
                }
            }
            Ok(damp * prod * sigma.powf(-n) * inv_fact * ev.noise(t)?)
        },
        0.0,
        horizon,
        &quad,
    )?;
    let pref = ev.prefactor();
    Ok(KernelPairing {
        index: index.clone(),
        value: pref * value,
        error_estimate: pref * err,
    })
}

pub fn kernel_pairing(
    spec: &CurrentSpec,
    index: &MultiIndex,
    phi: TestFunction,
) -> Result<KernelPairing> {
    kernel_pairing_with(&CurrentEvaluator::new(spec.clone(), phi)?, index)
}

/// Truncated-current kernels: nonzero only for full indices that are even in
/// every slot except one extra unit in slot i, with reduced total >= N. All
/// other pairings are exactly zero.
pub fn truncated_kernel_pairing_with(
    ev: &CurrentEvaluator,
    index: &MultiIndex,
) -> Result<KernelPairing> {
    let spec = ev.spec();
    let n_trunc = spec.truncation.ok_or_else(|| {
        Error::Precondition("spec has no truncation order; use kernel_pairing".into())
    })?;
    if index.d() != spec.d() {
        return Err(Error::Precondition(format!(
            "index has {} slots, spec d = {}",
            index.d(),
            spec.d()
        )));
    }
    let zero = |index: &MultiIndex| KernelPairing {
        index: index.clone(),
        value: 0.0,
        error_estimate: 0.0,
    };
    // structural form: slot i odd (the +1), all other slots even
    let mut reduced = Vec::with_capacity(index.d());
    for (j, &m) in index.entries().iter().enumerate() {
        if j == spec.i {
            if m % 2 == 0 {
                return Ok(zero(index));
            }
            reduced.push((m - 1) / 2);
        } else {
            if m % 2 == 1 {
                return Ok(zero(index));
            }
            reduced.push(m / 2);
        }
    }
    let reduced = MultiIndex::new(reduced)?;
    let n = reduced.total();
    if n < n_trunc {
        return Ok(zero(index));
    }
    let hv = spec.h.value();
    let hd = hv * spec.d() as f64;
    let nf = n as f64;
    let sign_half = (-0.5f64).powi(n as i32);
    let inv_fact = 1.0 / reduced.factorial();
    let alpha = 2.0 * nf * (1.0 - hv) - hd;
    let quad = pairing_quad_spec(alpha)?;
    let (value, err) = real_quadrature(
        |t| {
            if t <= 0.0 {
                return Ok(0.0);
            }
            let mut prod = 1.0;
            for j in 0..reduced.d() {
                let nj = reduced.entry(j);
                if nj > 0 {
                    prod *= ev.inner(j, t)?.powi(2 * nj as i32);
                }
            }
            Ok(sign_half * t.powf(-2.0 * hv * nf - hd) * inv_fact * prod * ev.noise(t)?)
        },
        0.0,
        spec.horizon,
        &quad,
    )?;
    let pref = ev.prefactor();
    Ok(KernelPairing {
        index: index.clone(),
        value: pref * value,
        error_estimate: pref * err,
    })
}

pub fn truncated_kernel_pairing(
    spec: &CurrentSpec,
    index: &MultiIndex,
    phi: TestFunction,
) -> Result<KernelPairing> {
    truncated_kernel_pairing_with(&CurrentEvaluator::new(spec.clone(), phi)?, index)
}

#[derive(Clone, Debug)]
pub struct ReconstructReport {
    /// chaos orders included in each partial sum (0..=max_order)
    pub orders: Vec<u32>,
    pub partial_sums: Vec<f64>,
    /// closed-form S-transform at z = 1
    pub target: f64,
    /// |partial - target| per order
    pub errors: Vec<f64>,
}

/// Sum kernel pairings through max_order and compare with the closed-form
/// S-transform at z = 1. Chaos order m collects pairings of total m - 1
/// (untruncated) or the even-plus-one indices of total m (truncated); the
/// order-0 kernel is zero.
pub fn taylor_reconstruct(
    spec: &CurrentSpec,
    phi: TestFunction,
    max_order: u32,
) -> Result<ReconstructReport> {
    let ev = CurrentEvaluator::new(spec.clone(), phi)?;
    let one = Complex64::new(1.0, 0.0);
    let target = match spec.truncation {
        None => ev.s_value(one)?.re,
        Some(_) => ev.s_value_truncated(one)?.re,
    };
    let d = spec.d();
    let mut partial = 0.0;
    let mut orders = Vec::new();
    let mut partial_sums = Vec::new();
    let mut errors = Vec::new();
    for m in 0..=max_order {
        if m > 0 {
            match spec.truncation {
                None => {
                    for index in indices_with_total(m - 1, d) {
                        partial += kernel_pairing_with(&ev, &index)?.value;
                    }
                }
                Some(_) => {
                    for index in indices_with_total(m, d) {
                        partial += truncated_kernel_pairing_with(&ev, &index)?.value;
                    }
                }
            }
        }
        orders.push(m);
        partial_sums.push(partial);
        errors.push((partial - target).abs());
    }
    Ok(ReconstructReport {
        orders,
        partial_sums,
        target,
        errors,
    })
}
