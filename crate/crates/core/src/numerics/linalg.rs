//! Dense symmetric linear algebra for the small covariance matrices used by
//! the samplers. Sizes here are a few entries (joint Gaussian specs) up to a
//! few hundred (dense fBm fallback), so cyclic Jacobi and unblocked Cholesky
//! are plenty.

use crate::error::{Error, Result};

/// Max |a_ij - a_ji| relative to the largest entry before we refuse to call a
/// matrix symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn check_symmetric(a: &[Vec<f64>]) -> Result<()> {
    let n = a.len();
    let mut scale: f64 = 0.0;
    for row in a {
        if row.len() != n {
            return Err(Error::Precondition(format!(
                "matrix is {}x{}, expected square of side {n}",
                n,
                row.len()
            )));
        }
        for &v in row {
            if !v.is_finite() {
                return Err(Error::Precondition("matrix entry is not finite".into()));
            }
            scale = scale.max(v.abs());
        }
    }
    let tol = SYMMETRY_TOL * scale.max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[i][j] - a[j][i]).abs() > tol {
                return Err(Error::Precondition(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    a[i][j], a[j][i]
                )));
            }
        }
    }
    Ok(())
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns: vecs[i][k] = component i of
/// eigenvector k), unsorted.
pub fn sym_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_symmetric(a)?;
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() <= 1e-15 * frob_norm(&m).max(1.0) {
            let vals = (0..n).map(|i| m[i][i]).collect();
            return Ok((vals, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    Err(Error::Convergence {
        reason: "Jacobi eigensolver did not converge in 100 sweeps".into(),
        partial: None,
        error_estimate: None,
    })
}

fn frob_norm(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_symmetric(a)?;
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Precondition(format!(
                        "matrix not positive definite (pivot {s:.3e} at {i})"
                    )));
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// Symmetric square-root-style factor A with A Aᵀ = M, where eigenvalues in
/// [-tol·λ_max, 0) are clipped to zero. Rejects eigenvalues below that band.
pub fn psd_factor(a: &[Vec<f64>], clip_rel_tol: f64) -> Result<Vec<Vec<f64>>> {
    let (vals, vecs) = sym_eigen(a)?;
    let n = vals.len();
    let vmax = vals.iter().cloned().fold(0.0f64, f64::max).max(0.0);
    let floor = -clip_rel_tol * vmax.max(1e-300);
    let mut sqrt_vals = Vec::with_capacity(n);
    for &lam in &vals {
        if lam < floor {
            return Err(Error::Precondition(format!(
                "matrix has eigenvalue {lam:.3e} below the clipping band (max {vmax:.3e})"
            )));
        }
        sqrt_vals.push(lam.max(0.0).sqrt());
    }
    let mut f = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            f[i][k] = vecs[i][k] * sqrt_vals[k];
        }
    }
    Ok(f)
}
