//! Fractional Brownian motion: closed-form covariance, path sampling by
//! circulant embedding of fractional Gaussian noise (dense factorization for
//! short grids or when the embedding fails), and a generic joint-Gaussian
//! sampler used as the Monte Carlo oracle elsewhere.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::frac_ops::HurstParam;
use crate::numerics::linalg::{check_symmetric, cholesky, psd_factor};
use crate::par::map_indexed;
use crate::rng::derive_stream;

/// E[B_H(s) B_H(t)] = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
pub fn fbm_covariance(h: HurstParam, s: f64, t: f64) -> f64 {
    let p = 2.0 * h.value();
    0.5 * (s.powf(p) + t.powf(p) - (t - s).abs().powf(p))
}

/// Autocovariance of unit-spaced, unit-variance fractional Gaussian noise at
/// lag k.
fn fgn_autocov(h: HurstParam, k: usize) -> f64 {
    let p = 2.0 * h.value();
    let k = k as f64;
    0.5 * ((k - 1.0).abs().powf(p) - 2.0 * k.powf(p) + (k + 1.0).powf(p))
}

/// Grids longer than this go through circulant embedding; shorter ones use a
/// dense Cholesky factor directly.
const DENSE_CUTOFF_STEPS: usize = 512;
const EMBEDDING_EIG_TOL: f64 = 1e-8;

/// A batch of sampled fBm paths on the uniform grid t_k = k T/(n_steps-1),
/// k = 0..n_steps. Every path starts at 0 in every component.
pub struct FbmPathBatch {
    pub h: HurstParam,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub d: usize,
    pub seed: u64,
    /// true when the circulant embedding was rejected (or skipped for a short
    /// grid) and sampling used the dense factorization instead
    pub used_dense_fallback: bool,
    values: Vec<f64>,
}

impl FbmPathBatch {
    pub fn value(&self, path: usize, step: usize, component: usize) -> f64 {
        debug_assert!(path < self.n_paths && step < self.n_steps && component < self.d);
        self.values[(path * self.n_steps + step) * self.d + component]
    }

    pub fn time(&self, step: usize) -> f64 {
        self.horizon * step as f64 / (self.n_steps - 1) as f64
    }

    /// CSV rows: path_id,step,t,component,value (no header, caller owns it).
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for p in 0..self.n_paths {
            for k in 0..self.n_steps {
                let t = self.time(k);
                for c in 0..self.d {
                    writeln!(w, "{p},{k},{t:.17e},{c},{:.17e}", self.value(p, k, c))?;
                }
            }
        }
        Ok(())
    }
}

enum IncrementSampler {
    // sqrt of circulant eigenvalues, shared FFT plan of the embedding size
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    // lower Cholesky factor of the n x n fGn covariance
    Dense { factor: Vec<Vec<f64>> },
}

impl IncrementSampler {
    /// n unit-variance fGn values for one (path, component) stream.
    fn draw(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            IncrementSampler::Circulant { sqrt_eig, fft } => {
                let m = sqrt_eig.len();
                let half = m / 2;
                let mut w = vec![Complex64::new(0.0, 0.0); m];
                let z0: f64 = rng.sample(StandardNormal);
                w[0] = Complex64::new(sqrt_eig[0] * z0, 0.0);
                let zh: f64 = rng.sample(StandardNormal);
                w[half] = Complex64::new(sqrt_eig[half] * zh, 0.0);
                for k in 1..half {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    let s = sqrt_eig[k] * std::f64::consts::FRAC_1_SQRT_2;
                    w[k] = Complex64::new(s * a, s * b);
                    w[m - k] = w[k].conj();
                }
                fft.process(&mut w);
                let scale = 1.0 / (m as f64).sqrt();
                w[..n].iter().map(|c| c.re * scale).collect()
            }
            IncrementSampler::Dense { factor } => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                (0..n)
                    .map(|i| (0..=i).map(|j| factor[i][j] * z[j]).sum())
                    .collect()
            }
        }
    }
}

fn dense_sampler(h: HurstParam, n: usize) -> Result<IncrementSampler> {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocov(h, k)).collect();
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| gamma[i.abs_diff(j)]).collect())
        .collect();
    Ok(IncrementSampler::Dense {
        factor: cholesky(&cov)?,
    })
}

fn circulant_sampler(h: HurstParam, n: usize) -> Result<IncrementSampler> {
    let m = 2 * n;
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    for (k, slot) in c.iter_mut().enumerate() {
        *slot = Complex64::new(fgn_autocov(h, k.min(m - k)), 0.0);
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut c);
    let eig: Vec<f64> = c.iter().map(|v| v.re).collect();
    let max = eig.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -EMBEDDING_EIG_TOL * max {
        return Err(Error::Evaluation(format!(
            "circulant embedding not nonnegative: min eigenvalue {min:.3e} vs max {max:.3e}"
        )));
    }
    Ok(IncrementSampler::Circulant {
        sqrt_eig: eig.iter().map(|&v| v.max(0.0).sqrt()).collect(),
        fft,
    })
}

pub fn sample_fbm_paths(
    h: HurstParam,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    d: usize,
    seed: u64,
) -> Result<FbmPathBatch> {
    if n_steps < 2 {
        return Err(Error::Precondition(format!("n_steps >= 2 required, got {n_steps}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::Precondition(format!("horizon > 0 required, got {horizon}")));
    }
    if d < 1 {
        return Err(Error::Precondition("d >= 1 required".into()));
    }
    let n = n_steps - 1; // increments
    let (sampler, used_dense_fallback) = if n_steps > DENSE_CUTOFF_STEPS {
        match circulant_sampler(h, n) {
            Ok(s) => (s, false),
            Err(_) => (dense_sampler(h, n)?, true),
        }
    } else {
        (dense_sampler(h, n)?, true)
    };
    let dt = horizon / n as f64;
    let scale = dt.powf(h.value());
    let rows: Vec<Vec<f64>> = map_indexed(n_paths, |p| {
        let mut row = vec![0.0; n_steps * d];
        for c in 0..d {
            let mut rng = derive_stream(seed, &[p as u64, c as u64]);
            let incs = sampler.draw(n, &mut rng);
            let mut acc = 0.0;
            for (k, inc) in incs.iter().enumerate() {
                acc += inc * scale;
                row[(k + 1) * d + c] = acc;
            }
        }
        row
    });
    let mut values = Vec::with_capacity(n_paths * n_steps * d);
    for row in rows {
        values.extend(row);
    }
    Ok(FbmPathBatch {
        h,
        horizon,
        n_steps,
        n_paths,
        d,
        seed,
        used_dense_fallback,
        values,
    })
}

/// Covariance spec for the joint-Gaussian oracle. Entries typically come from
/// eta_inner and closed-form test-function inner products.
pub struct JointGaussianSpec {
    covariance: Vec<Vec<f64>>,
}

impl JointGaussianSpec {
    pub fn new(covariance: Vec<Vec<f64>>) -> Result<Self> {
        if covariance.is_empty() {
            return Err(Error::Precondition("covariance must be nonempty".into()));
        }
        check_symmetric(&covariance)?;
        Ok(JointGaussianSpec { covariance })
    }

    pub fn dim(&self) -> usize {
        self.covariance.len()
    }
}

const JOINT_EIG_CLIP_TOL: f64 = 1e-10;
const DRAW_CHUNK: usize = 1024;

/// n mean-zero draws with the spec's covariance. Deterministic in (spec, n,
/// seed) and independent of thread scheduling (per-chunk derived seeds).
pub fn joint_gaussian_sample(
    spec: &JointGaussianSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let m = spec.dim();
    let factor = psd_factor(&spec.covariance, JOINT_EIG_CLIP_TOL)?;
    let n_chunks = n.div_ceil(DRAW_CHUNK);
    let chunks: Vec<Vec<Vec<f64>>> = map_indexed(n_chunks, |ci| {
        let count = DRAW_CHUNK.min(n - ci * DRAW_CHUNK);
        let mut rng = derive_stream(seed, &[ci as u64]);
        (0..count)
            .map(|_| {
                let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                (0..m)
                    .map(|i| (0..m).map(|k| factor[i][k] * z[k]).sum())
                    .collect()
            })
            .collect()
    });
    Ok(chunks.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac_ops::eta_inner;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn covariance_diagonal_and_brownian() {
        for hv in [0.2, 0.5, 0.8] {
            assert_relative_eq!(fbm_covariance(h(hv), 1.0, 1.0), 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(fbm_covariance(h(0.5), 0.3, 1.7), 0.3, epsilon = 1e-15);
        assert_relative_eq!(fbm_covariance(h(0.5), 2.0, 0.4), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn covariance_matches_eta_inner_quadrature() {
        let hv = h(0.7);
        let byquad = eta_inner(hv, 1.0, 2.0).unwrap();
        assert_relative_eq!(fbm_covariance(hv, 1.0, 2.0), byquad, epsilon = 1e-6);
    }

    #[test]
    fn covariance_self_similarity_exact() {
        let hv = h(0.35);
        let lam: f64 = 2.7;
        for (s, t) in [(0.4, 1.1), (0.9, 0.9), (0.0, 2.0)] {
            let lhs = fbm_covariance(hv, lam * s, lam * t);
            let rhs = lam.powf(2.0 * hv.value()) * fbm_covariance(hv, s, t);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-13, max_relative = 1e-13);
        }
    }

    fn terminal_variance(batch: &FbmPathBatch) -> (f64, f64) {
        let n = batch.n_paths;
        let last = batch.n_steps - 1;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for p in 0..n {
            let v = batch.value(p, last, 0);
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // SE of the sample variance of a Gaussian
        let se = var * (2.0 / (n as f64 - 1.0)).sqrt();
        (var, se)
    }

    #[test]
    fn brownian_terminal_variance() {
        let batch = sample_fbm_paths(h(0.5), 1.0, 8, 100_000, 1, 11).unwrap();
        let (var, se) = terminal_variance(&batch);
        assert!((var - 1.0).abs() < 3.0 * se, "var={var}, se={se}");
    }

    #[test]
    fn rough_terminal_variance() {
        let batch = sample_fbm_paths(h(0.3), 1.0, 8, 100_000, 1, 12).unwrap();
        let (var, se) = terminal_variance(&batch);
        assert!((var - 1.0).abs() < 3.0 * se, "var={var}, se={se}");
    }

    #[test]
    fn circulant_route_terminal_variance() {
        let batch = sample_fbm_paths(h(0.7), 1.0, 600, 20_000, 1, 13).unwrap();
        assert!(!batch.used_dense_fallback);
        let (var, se) = terminal_variance(&batch);
        assert!((var - 1.0).abs() < 3.0 * se, "var={var}, se={se}");
    }

    #[test]
    fn grid_covariance_matches_closed_form() {
        let hv = h(0.7);
        let batch = sample_fbm_paths(hv, 2.0, 9, 100_000, 1, 14).unwrap();
        let n = batch.n_paths as f64;
        for (i, j) in [(2, 2), (2, 6), (4, 8), (8, 8)] {
            let (ti, tj) = (batch.time(i), batch.time(j));
            let mut acc = 0.0;
            for p in 0..batch.n_paths {
                acc += batch.value(p, i, 0) * batch.value(p, j, 0);
            }
            let sample = acc / n;
            let cij = fbm_covariance(hv, ti, tj);
            let cii = fbm_covariance(hv, ti, ti);
            let cjj = fbm_covariance(hv, tj, tj);
            let se = ((cii * cjj + cij * cij) / n).sqrt();
            assert!(
                (sample - cij).abs() < 3.0 * se,
                "({i},{j}): sample={sample}, expect={cij}, se={se}"
            );
        }
    }

    #[test]
    fn paths_start_at_zero_and_seeds_reproduce() {
        let a = sample_fbm_paths(h(0.4), 1.5, 16, 50, 3, 42).unwrap();
        let b = sample_fbm_paths(h(0.4), 1.5, 16, 50, 3, 42).unwrap();
        let c = sample_fbm_paths(h(0.4), 1.5, 16, 50, 3, 43).unwrap();
        for p in 0..50 {
            for comp in 0..3 {
                assert_eq!(a.value(p, 0, comp), 0.0);
            }
        }
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn increment_stationarity() {
        let hv = h(0.7);
        let batch = sample_fbm_paths(hv, 1.0, 64, 50_000, 1, 15).unwrap();
        let lag = 4usize;
        let var_at = |k0: usize| {
            let n = batch.n_paths as f64;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for p in 0..batch.n_paths {
                let d = batch.value(p, k0 + lag, 0) - batch.value(p, k0, 0);
                sum += d;
                sumsq += d * d;
            }
            let mean = sum / n;
            let var = sumsq / n - mean * mean;
            (var, var * (2.0 / (n - 1.0)).sqrt())
        };
        let (v0, s0) = var_at(0);
        let (v1, s1) = var_at(30);
        let se = (s0 * s0 + s1 * s1).sqrt();
        assert!((v0 - v1).abs() < 4.0 * se, "v0={v0}, v1={v1}, se={se}");
    }

    #[test]
    fn joint_identity_covariance() {
        let spec = JointGaussianSpec::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let draws = joint_gaussian_sample(&spec, 100_000, 3).unwrap();
        let n = draws.len() as f64;
        for c in 0..2 {
            let var: f64 = draws.iter().map(|d| d[c] * d[c]).sum::<f64>() / n;
            let se = var * (2.0 / (n - 1.0)).sqrt();
            assert!((var - 1.0).abs() < 3.0 * se, "var={var}");
        }
    }

    #[test]
    fn joint_rank_one_components_coincide() {
        let spec = JointGaussianSpec::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let draws = joint_gaussian_sample(&spec, 1000, 4).unwrap();
        for d in draws {
            assert!((d[0] - d[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn joint_eta_covariance_reproduced() {
        let hv = h(0.3);
        let (s, t): (f64, f64) = (0.5, 1.0);
        let css = s.powf(2.0 * hv.value());
        let ctt = t.powf(2.0 * hv.value());
        let cst = eta_inner(hv, s, t).unwrap();
        let spec = JointGaussianSpec::new(vec![vec![css, cst], vec![cst, ctt]]).unwrap();
        let draws = joint_gaussian_sample(&spec, 200_000, 5).unwrap();
        let n = draws.len() as f64;
        let emp: f64 = draws.iter().map(|d| d[0] * d[1]).sum::<f64>() / n;
        let se = ((css * ctt + cst * cst) / n).sqrt();
        assert!((emp - cst).abs() < 3.0 * se, "emp={emp}, expect={cst}, se={se}");
    }

    #[test]
    fn joint_rejects_asymmetric() {
        assert!(JointGaussianSpec::new(vec![vec![1.0, 0.3], vec![0.1, 1.0]]).is_err());
    }

    #[test]
    fn sampler_rejects_bad_grid() {
        assert!(sample_fbm_paths(h(0.5), 1.0, 1, 10, 1, 0).is_err());
        assert!(sample_fbm_paths(h(0.5), 0.0, 8, 10, 1, 0).is_err());
        assert!(sample_fbm_paths(h(0.5), 1.0, 8, 10, 0, 0).is_err());
    }
}
