//! Concept erasers.
//!
//! Every eraser is an affine map `x ↦ A·x + b` applied row-wise. Mean
//! projection (MP), iterative nullspace projection (INLP) and the two random
//! controls produce orthogonal projectors (`b = 0`, `A = Aᵀ = A²`); LEACE
//! produces an oblique projection with a recentering offset.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::container::{read_file, BlockReader, BlockWriter};
use crate::labels::ConceptLabels;
use crate::linalg::{
    complement_projector, jacobi_svd, norm, orthonormal_basis, psd_inv_sqrt, Matrix,
    OrthonormalBasis,
};
use crate::probing::{majority_fraction, score_predictions, train_softmax, TrainConfig};
use crate::rng;

/// MP drops mean-difference directions shorter than this times the largest
/// class-mean norm.
pub const MP_REL_TOL: f64 = 1e-9;
/// INLP drops probe directions shorter (after deflation) than this times the
/// iteration's longest weight row.
pub const INLP_REL_TOL: f64 = 1e-8;
/// Covariance eigenvalues below this times the largest are treated as zero
/// when whitening.
pub const LEACE_EIG_REL_TOL: f64 = 1e-10;
/// Singular values of the whitened cross-covariance below this times the
/// largest (or the label scale, if greater) are dropped from the LEACE
/// projector.
pub const LEACE_SV_REL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mp,
    Inlp,
    Leace,
    Random,
    Dropout,
    Identity,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mp => "mp",
            Method::Inlp => "inlp",
            Method::Leace => "leace",
            Method::Random => "random",
            Method::Dropout => "dropout",
            Method::Identity => "identity",
        }
    }

    /// Whether the fitted map is an orthogonal projector with zero offset.
    pub fn is_orthogonal_projector(self) -> bool {
        !matches!(self, Method::Leace)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mp" => Ok(Method::Mp),
            "inlp" => Ok(Method::Inlp),
            "leace" => Ok(Method::Leace),
            "random" => Ok(Method::Random),
            "dropout" => Ok(Method::Dropout),
            "identity" => Ok(Method::Identity),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?} (expected mp, inlp, leace, random or dropout)"
            ))),
        }
    }
}

/// A fitted affine eraser.
#[derive(Clone, Debug, PartialEq)]
pub struct Eraser {
    pub method: Method,
    /// `A`, d × d.
    pub transform: Matrix,
    /// `b`, length d.
    pub offset: Vec<f64>,
    pub directions_removed: usize,
    /// INLP rounds run; 1 for every other method.
    pub iterations: usize,
    pub fit_seed: u64,
    /// False only for INLP runs that hit the iteration cap.
    pub converged: bool,
    pub class_names: Vec<String>,
}

impl Eraser {
    pub fn identity(d: usize) -> Self {
        Eraser {
            method: Method::Identity,
            transform: Matrix::identity(d),
            offset: vec![0.0; d],
            directions_removed: 0,
            iterations: 1,
            fit_seed: 0,
            converged: true,
            class_names: Vec::new(),
        }
    }

    fn projector(method: Method, basis: &OrthonormalBasis, seed: u64, names: Vec<String>) -> Self {
        let d = basis.dim();
        Eraser {
            method,
            transform: complement_projector(basis),
            offset: vec![0.0; d],
            directions_removed: basis.len(),
            iterations: 1,
            fit_seed: seed,
            converged: true,
            class_names: names,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// Row-wise `x ↦ A·x + b`. An exact identity map returns the input
    /// unchanged, bit for bit.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "eraser is {}-dimensional, data has {} columns",
                self.dim(),
                x.cols()
            )));
        }
        if self.transform.is_identity() && self.offset.iter().all(|&v| v == 0.0) {
            return Ok(x.clone());
        }
        // rows · Aᵀ, then shift
        let mut out = x.matmul(&self.transform.transpose())?;
        if self.offset.iter().any(|&v| v != 0.0) {
            for i in 0..out.rows() {
                for (o, b) in out.row_mut(i).iter_mut().zip(&self.offset) {
                    *o += b;
                }
            }
        }
        Ok(out)
    }

    /// `‖A² − A‖_max`.
    pub fn projector_error(&self) -> f64 {
        let a2 = self
            .transform
            .matmul(&self.transform)
            .expect("square transform");
        a2.max_abs_diff(&self.transform)
    }

    /// `‖A − Aᵀ‖_max`.
    pub fn asymmetry(&self) -> f64 {
        self.transform.max_abs_diff(&self.transform.transpose())
    }

    /// Largest entrywise gap between applying twice and applying once.
    pub fn idempotence_gap(&self, x: &Matrix) -> Result<f64> {
        let once = self.apply(x)?;
        let twice = self.apply(&once)?;
        Ok(twice.max_abs_diff(&once))
    }
}

fn require_classes(x: &Matrix, y: &ConceptLabels) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    Ok(())
}

/// Per-class mean vectors. Errors on a class with no samples.
fn class_means(x: &Matrix, y: &ConceptLabels) -> Result<Vec<Vec<f64>>> {
    let k = y.k();
    let d = x.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let counts = y.counts();
    for (row, &c) in x.row_iter().zip(y.ids()) {
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, (sum, &n)) in sums.iter_mut().zip(&counts).enumerate() {
        if n == 0 {
            return Err(Error::InvalidInput(format!(
                "class {:?} (id {c}) has no samples",
                y.names()[c]
            )));
        }
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    Ok(sums)
}

/// Mean projection.
///
/// For each class `i` the direction is `u_i − u_r`, where `u_r` is the
/// unweighted mean of the other classes' means. Projecting out the span of
/// these directions makes every class mean coincide.
pub fn fit_mp(x: &Matrix, y: &ConceptLabels) -> Result<Eraser> {
    require_classes(x, y)?;
    let k = y.k();
    if k < 2 {
        return Err(Error::InvalidInput(
            "mean projection needs at least 2 classes: u_r undefined, no remaining classes".into(),
        ));
    }
    let means = class_means(x, y)?;
    let d = x.cols();
    let mut total = vec![0.0; d];
    for u in &means {
        for (t, v) in total.iter_mut().zip(u) {
            *t += v;
        }
    }
    let scale = means.iter().map(|u| norm(u)).fold(0.0, f64::max);
    let mut dirs = Matrix::zeros(k, d);
    for (i, u) in means.iter().enumerate() {
        let row = dirs.row_mut(i);
        for j in 0..d {
            let rest = (total[j] - u[j]) / (k - 1) as f64;
            row[j] = u[j] - rest;
        }
    }
    let basis = if scale > 0.0 {
        orthonormal_basis(&dirs, MP_REL_TOL * scale)?
    } else {
        OrthonormalBasis::empty(d)
    };
    Ok(Eraser::projector(Method::Mp, &basis, 0, y.names().to_vec()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InlpConfig {
    pub max_iters: usize,
    /// Stop once held-out probe accuracy is at most majority + this margin.
    pub stop_margin: f64,
    /// Share of the fit data held out to decide when to stop.
    pub dev_fraction: f64,
    pub seed: u64,
    pub probe: TrainConfig,
}

impl Default for InlpConfig {
    fn default() -> Self {
        InlpConfig {
            max_iters: 60,
            stop_margin: 0.01,
            dev_fraction: 0.1,
            seed: 7,
            probe: TrainConfig::default(),
        }
    }
}

/// Iterative nullspace projection.
///
/// Each round trains a softmax probe on the currently projected data, adds
/// its weight rows to one accumulated orthonormal basis and re-projects onto
/// the complement of that basis, which is the intersection of all rounds'
/// nullspaces. A round whose probe scores within `stop_margin` of the
/// held-out majority rate ends the loop without removing anything. Hitting
/// `max_iters` first leaves `converged = false`.
pub fn fit_inlp(x: &Matrix, y: &ConceptLabels, cfg: &InlpConfig) -> Result<Eraser> {
    require_classes(x, y)?;
    if cfg.max_iters == 0 {
        return Err(Error::InvalidInput("max_iters must be at least 1".into()));
    }
    if !(cfg.stop_margin >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "stop_margin must be non-negative, got {}",
            cfg.stop_margin
        )));
    }
    if !(cfg.dev_fraction > 0.0 && cfg.dev_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "dev_fraction must lie in (0, 1), got {}",
            cfg.dev_fraction
        )));
    }
    if y.k() < 2 {
        return Err(Error::InvalidInput("INLP needs at least 2 classes".into()));
    }
    let n = x.rows();
    let n_dev = ((n as f64 * cfg.dev_fraction).round() as usize).clamp(1, n.saturating_sub(y.k()));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(cfg.seed, rng::STREAM_INLP_DEV));
    let (dev_idx, train_idx) = order.split_at(n_dev);
    let (mut dev_idx, mut train_idx) = (dev_idx.to_vec(), train_idx.to_vec());
    dev_idx.sort_unstable();
    train_idx.sort_unstable();
    let x_train = x.select_rows(&train_idx);
    let x_dev = x.select_rows(&dev_idx);
    let y_train = y.subset(&train_idx);
    let y_dev = y.subset(&dev_idx);
    let threshold = majority_fraction(y_dev.ids()) + cfg.stop_margin;

    let d = x.cols();
    let mut basis = OrthonormalBasis::empty(d);
    let mut projector = Matrix::identity(d);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let xt = x_train.matmul(&projector)?;
        let xd = x_dev.matmul(&projector)?;
        let probe = train_softmax(&xt, y_train.ids(), y.k(), &cfg.probe)?.model;
        let acc = score_predictions(&probe.predict(&xd)?, &y_dev)?.accuracy;
        log::debug!(
            "inlp round {iter}: dev accuracy {acc:.4} (stop at <= {threshold:.4}), {} directions so far",
            basis.len()
        );
        if acc <= threshold {
            converged = true;
            break;
        }
        let longest = probe.weights.row_iter().map(norm).fold(0.0, f64::max);
        let added = if longest > 0.0 {
            basis.extend_rows(&probe.weights, INLP_REL_TOL * longest)?
        } else {
            0
        };
        if added == 0 {
            log::warn!("inlp round {iter}: probe found no new direction, stopping");
            break;
        }
        projector = complement_projector(&basis);
    }
    let mut e = Eraser::projector(Method::Inlp, &basis, cfg.seed, y.names().to_vec());
    e.iterations = iterations;
    e.converged = converged;
    Ok(e)
}

/// Least-squares concept erasure.
///
/// With `Σ_xx` the covariance, `W = Σ_xx^{-1/2}` (pseudo-inverse), `Σ_xz` the
/// cross-covariance with the one-hot labels and `P` the orthogonal projector
/// onto the column space of `W Σ_xz`, the eraser is
/// `x ↦ x − W⁺ P W (x − μ)`. The erased data has zero cross-covariance with
/// the labels.
pub fn fit_leace(x: &Matrix, y: &ConceptLabels) -> Result<Eraser> {
    require_classes(x, y)?;
    let d = x.cols();
    if y.k() < 2 {
        log::warn!("LEACE fit with a single class: nothing to erase, returning identity");
        let mut e = Eraser::identity(d);
        e.method = Method::Leace;
        e.class_names = y.names().to_vec();
        return Ok(e);
    }
    let n = x.rows();
    if n < 2 {
        return Err(Error::InvalidInput("LEACE needs at least 2 samples".into()));
    }
    if n <= d {
        log::warn!("LEACE fit with n={n} <= d={d}; covariance is rank deficient");
    }
    let mu = x.column_means();
    let centered = Matrix::from_fn(n, d, |i, j| x.get(i, j) - mu[j]);
    let z = y.one_hot();
    let z_mean = z.column_means();
    let z_centered = Matrix::from_fn(n, y.k(), |i, c| z.get(i, c) - z_mean[c]);
    let ct = centered.transpose();
    let inv_n = 1.0 / n as f64;
    let sigma_xx = ct.matmul(&centered)?.scale(inv_n).symmetrized();
    let sigma_xz = ct.matmul(&z_centered)?.scale(inv_n);

    let (w, w_pinv) = psd_inv_sqrt(&sigma_xx, LEACE_EIG_REL_TOL)?;
    let whitened = w.matmul(&sigma_xz)?;
    let svd = jacobi_svd(&whitened)?;
    // Singular values of the whitened cross-covariance are bounded by the
    // label standard deviation, so the cutoff never drops below that scale
    // times the tolerance. Pure rounding noise is then discarded.
    let z_scale = z_mean
        .iter()
        .map(|&q| (q * (1.0 - q)).sqrt())
        .fold(0.0, f64::max);
    let top = svd.values.first().copied().unwrap_or(0.0).max(z_scale);
    let kept: Vec<&Vec<f64>> = svd
        .values
        .iter()
        .zip(&svd.left)
        .filter(|(&s, _)| top > 0.0 && s > LEACE_SV_REL_TOL * top)
        .map(|(_, u)| u)
        .collect();
    let rank = kept.len();
    if rank == 0 {
        let mut e = Eraser::identity(d);
        e.method = Method::Leace;
        e.class_names = y.names().to_vec();
        return Ok(e);
    }
    let proj = Matrix::from_fn(d, d, |i, j| kept.iter().map(|u| u[i] * u[j]).sum());
    let removal = w_pinv.matmul(&proj)?.matmul(&w)?;
    let transform = Matrix::identity(d).sub(&removal)?;
    let offset = removal.mul_vec(&mu)?;
    Ok(Eraser {
        method: Method::Leace,
        transform,
        offset,
        directions_removed: rank,
        iterations: 1,
        fit_seed: 0,
        converged: true,
        class_names: y.names().to_vec(),
    })
}

/// Projects out `n_directions` random Gaussian directions.
pub fn fit_random_projection(d: usize, n_directions: usize, seed: u64) -> Result<Eraser> {
    if n_directions > d {
        return Err(Error::InvalidInput(format!(
            "cannot remove {n_directions} directions from a {d}-dimensional space"
        )));
    }
    if n_directions == 0 {
        let mut e = Eraser::identity(d);
        e.method = Method::Random;
        e.fit_seed = seed;
        return Ok(e);
    }
    let mut rng = rng::stream(seed, rng::STREAM_RANDOM_PROJECTION);
    let raw = Matrix::from_fn(n_directions, d, |_, _| rng.sample(StandardNormal));
    let basis = orthonormal_basis(&raw, 1e-10)?;
    if basis.len() != n_directions {
        return Err(Error::Numerical(format!(
            "random directions came out rank {} instead of {n_directions}",
            basis.len()
        )));
    }
    Ok(Eraser::projector(Method::Random, &basis, seed, Vec::new()))
}

/// Zeroes `n_columns` randomly chosen coordinates.
pub fn fit_dropout(d: usize, n_columns: usize, seed: u64) -> Result<Eraser> {
    if n_columns > d {
        return Err(Error::InvalidInput(format!(
            "cannot drop {n_columns} columns from a {d}-dimensional space"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_DROPOUT);
    let mut mask = vec![1.0; d];
    for j in index::sample(&mut rng, d, n_columns) {
        mask[j] = 0.0;
    }
    Ok(Eraser {
        method: Method::Dropout,
        transform: Matrix::diag(&mask),
        offset: vec![0.0; d],
        directions_removed: n_columns,
        iterations: 1,
        fit_seed: seed,
        converged: true,
        class_names: Vec::new(),
    })
}

#[derive(Serialize, Deserialize)]
struct EraserMeta {
    method: Method,
    seed: u64,
    directions_removed: usize,
    iterations: usize,
    converged: bool,
    class_names: Vec<String>,
}

impl Eraser {
    /// `A` and `b` as `EMD1` blocks, then a `JSN1` metadata block.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let b = Matrix::new(1, self.offset.len(), self.offset.clone())?;
        let mut w = BlockWriter::new();
        w.f64_matrix(&self.transform)?.f64_matrix(&b)?.json(&EraserMeta {
            method: self.method,
            seed: self.fit_seed,
            directions_removed: self.directions_removed,
            iterations: self.iterations,
            converged: self.converged,
            class_names: self.class_names.clone(),
        })?;
        Ok(w.into_bytes())
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = BlockReader::new(path, bytes);
        let transform = r.matrix()?;
        let offset = r.matrix()?;
        let meta: EraserMeta = r.json()?;
        r.expect_end()?;
        if !transform.is_square() || offset.rows() != 1 || offset.cols() != transform.rows() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: format!(
                    "transform {}x{} and offset {}x{} do not form an affine map",
                    transform.rows(),
                    transform.cols(),
                    offset.rows(),
                    offset.cols()
                ),
            });
        }
        Ok(Eraser {
            method: meta.method,
            transform,
            offset: offset.into_vec(),
            directions_removed: meta.directions_removed,
            iterations: meta.iterations,
            fit_seed: meta.seed,
            converged: meta.converged,
            class_names: meta.class_names,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        Self::from_bytes(path, &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix_rank;

    fn labels(ids: &[usize], k: usize) -> ConceptLabels {
        ConceptLabels::from_ids(ids.to_vec(), k).unwrap()
    }

    /// Two classes with means (1, 0) and (-1, 0), second coordinate varying.
    fn two_class() -> (Matrix, ConceptLabels) {
        let x = Matrix::from_rows(&[
            [1.0, 2.0],
            [1.0, -1.0],
            [-1.0, 3.0],
            [-1.0, 0.0],
        ])
        .unwrap();
        (x, labels(&[0, 0, 1, 1], 2))
    }

    #[test]
    fn mp_two_class_zeroes_first_coordinate() {
        let (x, y) = two_class();
        let e = fit_mp(&x, &y).unwrap();
        // means (1, 0.5) and (-1, 1.5): w_0 = (2, -1), w_1 = (-2, 1); one direction
        assert_eq!(e.directions_removed, 1);
        let out = e.apply(&x).unwrap();
        let m0 = [(out.get(0, 0) + out.get(1, 0)) / 2.0, (out.get(0, 1) + out.get(1, 1)) / 2.0];
        let m1 = [(out.get(2, 0) + out.get(3, 0)) / 2.0, (out.get(2, 1) + out.get(3, 1)) / 2.0];
        assert!((m0[0] - m1[0]).abs() < 1e-12 && (m0[1] - m1[1]).abs() < 1e-12);
    }

    #[test]
    fn mp_symmetric_means_projects_axis() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [1.0, -5.0], [-1.0, 5.0], [-1.0, -5.0]]).unwrap();
        let y = labels(&[0, 0, 1, 1], 2);
        let e = fit_mp(&x, &y).unwrap();
        assert!(e.transform.max_abs_diff(&Matrix::diag(&[0.0, 1.0])) < 1e-15);
        let out = e.apply(&x).unwrap();
        assert!(out.column(0).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn mp_no_signal_is_identity() {
        let x = Matrix::from_fn(7, 3, |_, j| 0.1 * (j as f64 + 1.0));
        let y = labels(&[0, 1, 2, 0, 1, 2, 2], 3);
        let e = fit_mp(&x, &y).unwrap();
        assert_eq!(e.directions_removed, 0);
        assert_eq!(e.transform, Matrix::identity(3));
    }

    #[test]
    fn mp_errors() {
        let x = Matrix::zeros(3, 2);
        let err = fit_mp(&x, &labels(&[0, 0, 0], 1)).unwrap_err();
        assert!(err.to_string().contains("u_r undefined"), "{err}");
        let err = fit_mp(&x, &labels(&[0, 0, 2], 3)).unwrap_err();
        assert!(err.to_string().contains("\"1\""), "{err}");
    }

    #[test]
    fn mp_removes_k_minus_one_generic() {
        let x = Matrix::from_fn(40, 6, |i, j| ((i * 7 + j * 11) % 13) as f64 + (i % 4 * j) as f64);
        let y = labels(&(0..40).map(|i| i % 4).collect::<Vec<_>>(), 4);
        assert_eq!(fit_mp(&x, &y).unwrap().directions_removed, 3);
    }

    #[test]
    fn leace_identity_covariance_matches_mean_difference() {
        // classes at ±e1, second coordinate balanced within each class, so
        // Σ_xx = I and the only label signal lives on coordinate 0
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let y = labels(&[0, 0, 1, 1], 2);
        let e = fit_leace(&x, &y).unwrap();
        assert_eq!(e.directions_removed, 1);
        assert!(e.transform.max_abs_diff(&Matrix::diag(&[0.0, 1.0])) < 1e-12);
        assert!(e.offset.iter().all(|b| b.abs() < 1e-12));
        let out = e.apply(&x).unwrap();
        assert!(out.column(0).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn leace_no_signal_is_identity() {
        // every class has the same rows
        let base = [[1.0, 2.0], [3.0, -1.0], [0.0, 1.0]];
        let rows: Vec<[f64; 2]> = base.iter().chain(base.iter()).copied().collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = labels(&[0, 0, 0, 1, 1, 1], 2);
        let e = fit_leace(&x, &y).unwrap();
        assert!(e.transform.max_abs_diff(&Matrix::identity(2)) < 1e-12);
        assert!(e.offset.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn leace_single_class_is_identity() {
        let x = Matrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let e = fit_leace(&x, &labels(&[0; 5], 1)).unwrap();
        assert_eq!(e.transform, Matrix::identity(2));
        assert_eq!(e.directions_removed, 0);
    }

    #[test]
    fn random_projection_edges() {
        let e = fit_random_projection(5, 0, 1).unwrap();
        assert_eq!(e.transform, Matrix::identity(5));
        let e = fit_random_projection(5, 5, 1).unwrap();
        assert_eq!(e.transform, Matrix::zeros(5, 5));
        assert!(fit_random_projection(5, 6, 1).is_err());
        for seed in 0..5 {
            let e = fit_random_projection(12, 4, seed).unwrap();
            assert_eq!(matrix_rank(&e.transform, 1e-10).unwrap(), 8);
            assert!(e.projector_error() < 1e-12);
        }
        assert_eq!(
            fit_random_projection(9, 3, 42).unwrap(),
            fit_random_projection(9, 3, 42).unwrap()
        );
    }

    #[test]
    fn dropout_edges() {
        assert_eq!(fit_dropout(4, 0, 3).unwrap().transform, Matrix::identity(4));
        let e = fit_dropout(4, 2, 3).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| e.transform.get(i, i)).collect();
        assert_eq!(diag.iter().filter(|&&v| v == 0.0).count(), 2);
        let x = Matrix::from_fn(3, 4, |i, j| (i * 4 + j + 1) as f64);
        let out = e.apply(&x).unwrap();
        for (j, &m) in diag.iter().enumerate() {
            if m == 0.0 {
                assert!(out.column(j).iter().all(|&v| v == 0.0));
            }
        }
        assert!(fit_dropout(4, 5, 3).is_err());
    }

    #[test]
    fn apply_checks_dimension_and_identity_is_bitwise() {
        let e = Eraser::identity(3);
        let x = Matrix::from_rows(&[[-0.0, 1.5, f64::MIN_POSITIVE]]).unwrap();
        let out = e.apply(&x).unwrap();
        assert_eq!(out.as_slice()[0].to_bits(), (-0.0f64).to_bits());
        assert_eq!(out, x);
        assert!(matches!(e.apply(&Matrix::zeros(1, 2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn inlp_argument_checks() {
        let (x, y) = two_class();
        let cfg = InlpConfig { max_iters: 0, ..InlpConfig::default() };
        assert!(fit_inlp(&x, &y, &cfg).is_err());
        let cfg = InlpConfig { stop_margin: -0.1, ..InlpConfig::default() };
        assert!(fit_inlp(&x, &y, &cfg).is_err());
    }

    #[test]
    fn eraser_file_round_trip() {
        let (x, y) = two_class();
        let e = fit_leace(&x, &y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("leace.eraser");
        e.save(&p).unwrap();
        assert_eq!(Eraser::load(&p).unwrap(), e);
    }

    #[test]
    fn method_parsing() {
        for m in ["mp", "inlp", "leace", "random", "dropout"] {
            assert_eq!(m.parse::<Method>().unwrap().as_str(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }
}
