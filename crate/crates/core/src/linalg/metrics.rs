use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::decomp::singular_values;
use crate::linalg::matrix::{dot, norm, Matrix};

/// Base relative rank tolerance, multiplied by the larger matrix dimension.
pub const RANK_TOL_BASE: f64 = 1e-10;

/// Default relative tolerance for [`matrix_rank`] on a `rows × cols` matrix.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    RANK_TOL_BASE * rows.max(cols).max(1) as f64
}

/// Number of singular values strictly above `rel_tol × σ_max`.
pub fn matrix_rank(x: &Matrix, rel_tol: f64) -> Result<usize> {
    if x.rows() == 0 || x.cols() == 0 {
        return Ok(0);
    }
    let sv = singular_values(x)?;
    let top = sv[0];
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * top).count())
}

/// Mean cosine similarity between corresponding rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineSummary {
    /// `None` when every row pair was skipped.
    pub mean: Option<f64>,
    pub rows_used: usize,
    /// Row pairs where either side had zero norm.
    pub rows_skipped: usize,
}

/// Average of `cos(x_i, y_i)` over rows. Rows where either vector is zero
/// have no defined cosine; they are skipped and counted.
pub fn mean_row_cosine(x: &Matrix, y: &Matrix) -> Result<CosineSummary> {
    if x.shape() != y.shape() {
        return Err(Error::Dimension(format!(
            "cosine of {}x{} against {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for (a, b) in x.row_iter().zip(y.row_iter()) {
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            skipped += 1;
            continue;
        }
        sum += (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
        used += 1;
    }
    Ok(CosineSummary {
        mean: (used > 0).then(|| sum / used as f64),
        rows_used: used,
        rows_skipped: skipped,
    })
}
