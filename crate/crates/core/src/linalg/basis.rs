use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, norm, Matrix};

/// Rows of `vectors` form an orthonormal set in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    pub fn empty(dim: usize) -> Self {
        OrthonormalBasis {
            dim,
            vectors: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// The basis as a `k × dim` matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.len(), self.dim, |i, j| self.vectors[i][j])
    }

    /// Deflates `v` against the current basis and appends the normalized
    /// residual when its norm reaches `tol`. Returns whether it was kept.
    ///
    /// Modified Gram-Schmidt, run twice: the second pass removes the
    /// cancellation error the first one leaves behind.
    pub fn push(&mut self, v: &[f64], tol: f64) -> Result<bool> {
        if v.len() != self.dim {
            return Err(Error::Dimension(format!(
                "vector of length {} offered to a basis of dimension {}",
                v.len(),
                self.dim
            )));
        }
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in &self.vectors {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let n = norm(&w);
        if !(n >= tol) || self.vectors.len() == self.dim {
            return Ok(false);
        }
        w.iter_mut().for_each(|x| *x /= n);
        self.vectors.push(w);
        Ok(true)
    }

    /// Pushes every row of `m`; returns how many were kept.
    pub fn extend_rows(&mut self, m: &Matrix, tol: f64) -> Result<usize> {
        let mut kept = 0;
        for r in m.row_iter() {
            if self.push(r, tol)? {
                kept += 1;
            }
        }
        Ok(kept)
    }

    /// Largest deviation of `B Bᵀ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((dot(a, b) - target).abs());
            }
        }
        err
    }
}

/// Orthonormal basis for the row span of `vectors`.
///
/// Rows whose residual after deflation falls below `tol` are dropped, so the
/// basis size equals the numerical rank of the input. An all-zero input gives
/// an empty basis.
pub fn orthonormal_basis(vectors: &Matrix, tol: f64) -> Result<OrthonormalBasis> {
    if vectors.rows() == 0 {
        return Err(Error::InvalidInput(
            "orthonormal_basis needs at least one vector".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "basis tolerance must be positive, got {tol}"
        )));
    }
    let mut basis = OrthonormalBasis::empty(vectors.cols());
    basis.extend_rows(vectors, tol)?;
    Ok(basis)
}

/// `I − BᵀB`: the orthogonal projector onto the complement of span(B).
///
/// Each entry is accumulated in the same order for `(i, j)` and `(j, i)`, so
/// the result is exactly symmetric.
pub fn complement_projector(basis: &OrthonormalBasis) -> Matrix {
    let d = basis.dim();
    let mut p = Matrix::identity(d);
    if basis.len() == d {
        // full-space removal is exactly the zero map
        return Matrix::zeros(d, d);
    }
    for i in 0..d {
        for j in i..d {
            let s: f64 = basis.vectors().iter().map(|b| b[i] * b[j]).sum();
            let v = p.get(i, j) - s;
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    p
}
