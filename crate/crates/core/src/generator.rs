//! Synthetic planted-concept datasets.
//!
//! Each row is `concept_scale·E_c + distractor_scale·F_s + ε` where `E` (k×d)
//! and `F` (m×d) are mutually orthonormal seeded direction sets, `c` is the
//! concept class, `s` an independent distractor class and `ε` isotropic
//! Gaussian noise. The main-task target is `c·m + s`, so the task needs both
//! the concept and the distractor, and the subspace holding each is known
//! exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::dataset::{seeded_split, EmbeddingSet, Provenance};
use crate::labels::ClassLabels;
use crate::linalg::{orthonormal_basis, Matrix};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub d: usize,
    /// Concept classes.
    pub k: usize,
    /// Distractor classes.
    pub m: usize,
    pub noise_sigma: f64,
    pub concept_scale: f64,
    pub distractor_scale: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n: 5000,
            d: 64,
            k: 8,
            m: 4,
            noise_sigma: 1.0,
            concept_scale: 3.0,
            distractor_scale: 3.0,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    /// Task vocabulary size `k·m`.
    pub fn vocab(&self) -> usize {
        self.k * self.m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.k < 2 || self.m < 2 {
            return bad(format!("need k, m >= 2 (got k={}, m={})", self.k, self.m));
        }
        if self.d < self.k + self.m {
            return bad(format!(
                "d={} cannot hold {} orthonormal directions",
                self.d,
                self.k + self.m
            ));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        for (name, v) in [
            ("concept_scale", self.concept_scale),
            ("distractor_scale", self.distractor_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be non-negative and finite, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }
}

/// A generated dataset together with the planted directions.
#[derive(Clone, Debug)]
pub struct PlantedDataset {
    pub set: EmbeddingSet,
    /// `E`, one unit row per concept class.
    pub concept_dirs: Matrix,
    /// `F`, one unit row per distractor class.
    pub distractor_dirs: Matrix,
    pub distractor: Vec<usize>,
}

pub fn generate_planted(cfg: &GeneratorConfig) -> Result<PlantedDataset> {
    cfg.validate()?;
    let (n, d, k, m) = (cfg.n, cfg.d, cfg.k, cfg.m);
    let mut rng = rng::stream(cfg.seed, rng::STREAM_GENERATOR);

    let raw = Matrix::from_fn(k + m, d, |_, _| rng.sample(StandardNormal));
    let basis = orthonormal_basis(&raw, 1e-8)?;
    if basis.len() != k + m {
        return Err(Error::Numerical(format!(
            "sampled directions have rank {} < {}",
            basis.len(),
            k + m
        )));
    }
    let dirs = basis.to_matrix();
    let concept_dirs = dirs.select_rows(&(0..k).collect::<Vec<_>>());
    let distractor_dirs = dirs.select_rows(&(k..k + m).collect::<Vec<_>>());

    let mut data = Vec::with_capacity(n * d);
    let mut concept = Vec::with_capacity(n);
    let mut distractor = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..k);
        let s = rng.random_range(0..m);
        let e = concept_dirs.row(c);
        let f = distractor_dirs.row(s);
        for j in 0..d {
            let noise: f64 = rng.sample(StandardNormal);
            data.push(cfg.concept_scale * e[j] + cfg.distractor_scale * f[j] + cfg.noise_sigma * noise);
        }
        concept.push(c);
        distractor.push(s);
        targets.push(c * m + s);
    }
    let set = EmbeddingSet::new(
        Matrix::new(n, d, data)?,
        ClassLabels::from_ids(concept, k)?,
        ClassLabels::from_ids(targets, k * m)?,
        seeded_split(n, cfg.seed),
        Provenance::Generated(cfg.clone()),
    )?;
    Ok(PlantedDataset {
        set,
        concept_dirs,
        distractor_dirs,
        distractor,
    })
}
