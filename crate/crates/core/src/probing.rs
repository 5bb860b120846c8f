//! Linear probes: multinomial logistic regression trained by seeded
//! mini-batch gradient descent, and their evaluation against the
//! majority-class baseline.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::container::{read_file, BlockReader, BlockWriter};
use crate::labels::ClassLabels;
use crate::linalg::{dot, Matrix};
use crate::rng;

/// Hyperparameters shared by probes and task heads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Initial step size; epoch `e` (1-based) uses `lr / sqrt(e)`.
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.05,
            epochs: 50,
            batch: 128,
            l2: 1e-4,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidInput(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::InvalidInput("epochs and batch must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidInput(format!("l2 must be non-negative, got {}", self.l2)));
        }
        Ok(())
    }
}

/// Affine scores `W x + b` followed by a softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxLinear {
    /// `k × d`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl SoftmaxLinear {
    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    fn check_dim(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::Dimension(format!(
                "classifier expects {} features, data has {}",
                self.dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn logits_into(&self, row: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = dot(self.weights.row(c), row) + self.bias[c];
        }
    }

    /// Log-probabilities for one row.
    pub fn log_probs(&self, row: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.classes()];
        self.logits_into(row, &mut z);
        log_softmax_in_place(&mut z);
        z
    }

    /// Arg-max class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.check_dim(x)?;
        let mut z = vec![0.0; self.classes()];
        Ok(x.row_iter()
            .map(|row| {
                self.logits_into(row, &mut z);
                argmax(&z)
            })
            .collect())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn log_softmax_in_place(z: &mut [f64]) {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter_mut().for_each(|v| *v -= lse);
}

/// Outcome of [`train_softmax`].
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: SoftmaxLinear,
    pub epochs_run: usize,
    /// Mean cross-entropy plus the L2 penalty over the last epoch.
    pub final_loss: f64,
}

/// Fits a `classes`-way softmax regression on `(x, y)`.
///
/// Weights start at zero. Each epoch visits the rows in a fresh seeded
/// permutation, in batches of `cfg.batch`, with step `lr/√epoch`. Because the
/// per-sample gradients over the class rows sum to zero, the weight rows keep
/// summing to zero throughout training.
pub fn train_softmax(x: &Matrix, y: &[usize], classes: usize, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} rows", y.len())));
    }
    if classes < 2 {
        return Err(Error::InvalidInput(format!(
            "a softmax classifier needs at least 2 classes, got {classes}"
        )));
    }
    if n < classes {
        return Err(Error::InvalidInput(format!(
            "{n} training rows for {classes} classes"
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
        return Err(Error::InvalidInput(format!("label {bad} outside [0, {classes})")));
    }

    let mut w = Matrix::zeros(classes, d);
    let mut b = vec![0.0; classes];
    let mut gw = vec![0.0; classes * d];
    let mut gb = vec![0.0; classes];
    let mut z = vec![0.0; classes];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(cfg.seed, rng::STREAM_TRAIN);
    let mut final_loss = f64::NAN;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.lr / (epoch as f64).sqrt();
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let row = x.row(i);
                for (c, zc) in z.iter_mut().enumerate() {
                    *zc = dot(w.row(c), row) + b[c];
                }
                log_softmax_in_place(&mut z);
                loss_sum -= z[y[i]];
                for c in 0..classes {
                    let residual = z[c].exp() - if c == y[i] { 1.0 } else { 0.0 };
                    if residual == 0.0 {
                        continue;
                    }
                    gb[c] += residual;
                    for (g, &xj) in gw[c * d..(c + 1) * d].iter_mut().zip(row) {
                        *g += residual * xj;
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for c in 0..classes {
                let wr = w.row_mut(c);
                for (wj, g) in wr.iter_mut().zip(&gw[c * d..(c + 1) * d]) {
                    *wj -= lr * (g * inv + cfg.l2 * *wj);
                }
                b[c] -= lr * gb[c] * inv;
            }
        }
        let penalty = 0.5 * cfg.l2 * w.as_slice().iter().map(|v| v * v).sum::<f64>();
        final_loss = loss_sum / n as f64 + penalty;
        if !final_loss.is_finite() || w.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "training diverged at epoch {epoch} (loss {final_loss})"
            )));
        }
    }
    Ok(Trained {
        model: SoftmaxLinear { weights: w, bias: b },
        epochs_run: cfg.epochs,
        final_loss,
    })
}

/// A trained concept probe.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe {
    pub model: SoftmaxLinear,
    pub class_names: Vec<String>,
    pub train_seed: u64,
    pub epochs_run: usize,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub accuracy: f64,
    pub correct: usize,
    pub n_eval: usize,
    pub majority_fraction: f64,
    /// `None` for classes absent from the evaluation set.
    pub per_class_accuracy: Vec<Option<f64>>,
}

pub fn train_probe(x: &Matrix, y: &ClassLabels, cfg: &TrainConfig) -> Result<LinearProbe> {
    let t = train_softmax(x, y.ids(), y.k(), cfg)?;
    Ok(LinearProbe {
        model: t.model,
        class_names: y.names().to_vec(),
        train_seed: cfg.seed,
        epochs_run: t.epochs_run,
        final_loss: t.final_loss,
    })
}

/// Scores already-computed predictions against labels.
pub fn score_predictions(pred: &[usize], y: &ClassLabels) -> Result<ProbeReport> {
    if pred.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.len(),
            y.len()
        )));
    }
    let k = y.k();
    let mut hits = vec![0usize; k];
    let counts = y.counts();
    for (&p, &t) in pred.iter().zip(y.ids()) {
        if p == t {
            hits[t] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    let n = y.len();
    Ok(ProbeReport {
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        correct,
        n_eval: n,
        majority_fraction: majority_fraction(y.ids()),
        per_class_accuracy: hits
            .iter()
            .zip(&counts)
            .map(|(&h, &c)| (c > 0).then(|| h as f64 / c as f64))
            .collect(),
    })
}

pub fn evaluate_probe(probe: &LinearProbe, x: &Matrix, y: &ClassLabels) -> Result<ProbeReport> {
    if y.k() != probe.model.classes() {
        return Err(Error::Dimension(format!(
            "probe has {} classes, labels have {}",
            probe.model.classes(),
            y.k()
        )));
    }
    score_predictions(&probe.model.predict(x)?, y)
}

/// Share of the most frequent label; 0 for an empty slice.
pub fn majority_fraction(y: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let k = y.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &c in y {
        counts[c] += 1;
    }
    *counts.iter().max().unwrap_or(&0) as f64 / y.len() as f64
}

#[derive(Serialize, Deserialize)]
struct ProbeMeta {
    kind: String,
    class_names: Vec<String>,
    train_seed: u64,
    epochs_run: usize,
    final_loss: f64,
}

impl LinearProbe {
    /// Weights and bias as `EMD1` blocks, then a `JSN1` metadata block.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bias = Matrix::new(1, self.model.bias.len(), self.model.bias.clone())?;
        let mut w = BlockWriter::new();
        w.f64_matrix(&self.model.weights)?
            .f64_matrix(&bias)?
            .json(&ProbeMeta {
                kind: "linear-probe".into(),
                class_names: self.class_names.clone(),
                train_seed: self.train_seed,
                epochs_run: self.epochs_run,
                final_loss: self.final_loss,
            })?;
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let mut r = BlockReader::new(path, &bytes);
        let weights = r.matrix()?;
        let bias = r.matrix()?;
        let meta: ProbeMeta = r.json()?;
        r.expect_end()?;
        if bias.rows() != 1 || bias.cols() != weights.rows() || meta.class_names.len() != weights.rows() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: 0,
                message: "probe blocks have inconsistent shapes".into(),
            });
        }
        Ok(LinearProbe {
            model: SoftmaxLinear {
                weights,
                bias: bias.into_vec(),
            },
            class_names: meta.class_names,
            train_seed: meta.train_seed,
            epochs_run: meta.epochs_run,
            final_loss: meta.final_loss,
        })
    }
}
