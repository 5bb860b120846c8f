//! Symmetric eigendecomposition, PSD inverse square roots and a one-sided
//! Jacobi SVD. All routines are plain cyclic Jacobi sweeps: slow-ish in the
//! dimension but deterministic and accurate at the sizes this crate targets
//! (d up to about a thousand).

use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, Matrix};

/// Sweep cap for both Jacobi solvers.
pub const MAX_JACOBI_SWEEPS: usize = 100;

/// Input asymmetry above this (relative to the largest entry) is rejected.
const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SymEig {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Matrix,
}

impl SymEig {
    /// `Q diag(f(λ)) Qᵀ`, skipping eigenpairs where `f` returns `None`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> Option<f64>) -> Matrix {
        let n = self.values.len();
        let weights: Vec<Option<f64>> = self.values.iter().map(|&l| f(l)).collect();
        let q = &self.vectors;
        Matrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for (k, w) in weights.iter().enumerate() {
                if let Some(w) = w {
                    s += q.get(i, k) * w * q.get(j, k);
                }
            }
            s
        })
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(S + Sᵀ)/2` first. Eigenvectors are signed so
/// that their largest-magnitude component (lowest index on ties) is positive.
pub fn sym_eig(s: &Matrix) -> Result<SymEig> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "sym_eig needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let n = s.rows();
    let scale = s.max_abs();
    let asym = s.max_abs_diff(&s.transpose());
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max |S - S^T| = {asym:e})"
        )));
    }
    let mut a = s.symmetrized();
    let mut v = Matrix::identity(n);
    let fro = a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut converged = n < 2 || fro == 0.0;
    let mut sweep = 0;
    while !converged {
        converged = true;
        if sweep == MAX_JACOBI_SWEEPS {
            return Err(Error::Numerical(format!(
                "symmetric eigensolver did not converge within {MAX_JACOBI_SWEEPS} sweeps"
            )));
        }
        sweep += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                if apq.abs() <= f64::EPSILON * (app * aqq).abs().sqrt()
                    || apq.abs() <= 1e-3 * f64::EPSILON * fro
                {
                    continue;
                }
                converged = false;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    let new_rp = c * arp - sn * arq;
                    let new_rq = c * arq + sn * arp;
                    a.set(r, p, new_rp);
                    a.set(p, r, new_rp);
                    a.set(r, q, new_rq);
                    a.set(q, r, new_rq);
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                for r in 0..n {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, c * vrp - sn * vrq);
                    v.set(r, q, sn * vrp + c * vrq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        let mut lead = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, x) in col.into_iter().enumerate() {
            vectors.set(i, k, x);
        }
    }
    Ok(SymEig { values, vectors })
}

/// Pseudo-inverse square root of a PSD matrix and its pseudo-inverse.
///
/// Returns `(W, W⁺)` with `W = Q Λ^{-1/2} Qᵀ` and `W⁺ = Q Λ^{1/2} Qᵀ`, both
/// restricted to eigenvalues above `rel_tol · λ_max`. Negative eigenvalues no
/// further below zero than `rel_tol · λ_max` are treated as zero; anything
/// more negative is an error.
pub fn psd_inv_sqrt(s: &Matrix, rel_tol: f64) -> Result<(Matrix, Matrix)> {
    if !(rel_tol >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "rel_tol must be non-negative, got {rel_tol}"
        )));
    }
    let eig = sym_eig(s)?;
    let n = eig.values.len();
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    let lambda_min = eig.values.last().copied().unwrap_or(0.0);
    let floor = rel_tol * lambda_max.abs();
    if lambda_min < -floor || (lambda_max <= 0.0 && lambda_min < 0.0) {
        return Err(Error::Numerical(format!(
            "matrix is indefinite: smallest eigenvalue {lambda_min:e} against largest {lambda_max:e}"
        )));
    }
    if lambda_max <= 0.0 {
        return Ok((Matrix::zeros(n, n), Matrix::zeros(n, n)));
    }
    let cut = rel_tol * lambda_max;
    let w = eig.spectral_map(|l| (l > cut).then(|| 1.0 / l.sqrt()));
    let w_pinv = eig.spectral_map(|l| (l > cut).then(|| l.sqrt()));
    Ok((w, w_pinv))
}

/// Result of [`jacobi_svd`]: singular values with their left singular vectors.
#[derive(Clone, Debug)]
pub struct ColumnSvd {
    /// Descending singular values, one per input column.
    pub values: Vec<f64>,
    /// Left singular vectors as rows, aligned with `values`. Vectors for
    /// exactly zero singular values are zero.
    pub left: Vec<Vec<f64>>,
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Rotates pairs of columns until all are mutually orthogonal; the column
/// norms are then the singular values. Works directly on the data, so small
/// singular values keep their relative accuracy, unlike an eigendecomposition
/// of `MᵀM`.
pub fn jacobi_svd(m: &Matrix) -> Result<ColumnSvd> {
    let (rows, n) = m.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    // columns reduced to rounding residue keep rotating forever otherwise
    let frob_sq: f64 = m.as_slice().iter().map(|v| v * v).sum();
    let negligible = f64::EPSILON * f64::EPSILON * frob_sq;
    let ortho_tol = f64::EPSILON * (rows.max(1) as f64).sqrt();
    let mut converged = n < 2;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_JACOBI_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi SVD did not converge within {MAX_JACOBI_SWEEPS} sweeps"
            )));
        }
        sweep += 1;
        converged = true;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let alpha = dot(&cols[i], &cols[i]);
                let beta = dot(&cols[j], &cols[j]);
                let gamma = dot(&cols[i], &cols[j]);
                if gamma == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || gamma.abs() <= ortho_tol * (alpha * beta).sqrt()
                {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = cols.split_at_mut(j);
                let (ci, cj) = (&mut head[i], &mut tail[0]);
                for r in 0..rows {
                    let x = ci[r];
                    let y = cj[r];
                    ci[r] = c * x - s * y;
                    cj[r] = s * x + c * y;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = cols
        .into_iter()
        .map(|c| {
            let sigma = dot(&c, &c).sqrt();
            let u = if sigma > 0.0 {
                c.iter().map(|x| x / sigma).collect()
            } else {
                vec![0.0; rows]
            };
            (sigma, u)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (values, left) = pairs.into_iter().unzip();
    Ok(ColumnSvd { values, left })
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    // rotate whichever side is shorter
    if m.cols() > m.rows() {
        Ok(jacobi_svd(&m.transpose())?.values)
    } else {
        Ok(jacobi_svd(m)?.values)
    }
}
