use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::io::container::{load_embeddings, save_embeddings};
use crate::io::manifest::{sha256_file, RunManifest};
use crate::labels::{load_labels, save_labels, ClassLabels, ConceptLabels};
use crate::linalg::Matrix;
use crate::rng;

pub const EMBEDDINGS_FILE: &str = "embeddings.emb1";
pub const CONCEPT_FILE: &str = "concept.labels";
pub const TARGETS_FILE: &str = "targets.labels";
pub const SPLIT_FILE: &str = "split.labels";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Files that define a dataset's content, in hashing order.
pub const DATA_FILES: [&str; 4] = [EMBEDDINGS_FILE, CONCEPT_FILE, TARGETS_FILE, SPLIT_FILE];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split tag {other:?}"))),
        }
    }
}

/// Seeded 80/10/10 train/dev/test assignment.
pub fn seeded_split(n: usize, seed: u64) -> Vec<Split> {
    let n_train = (n as f64 * 0.8).round() as usize;
    let n_dev = ((n as f64 * 0.1).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::STREAM_SPLIT));
    let mut split = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            split[i] = Split::Train;
        } else if rank < n_train + n_dev {
            split[i] = Split::Dev;
        }
    }
    split
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Generated(GeneratorConfig),
    Imported { path: PathBuf },
    Erased {
        source_hash: String,
        method: String,
        directions_removed: usize,
    },
}

/// Embeddings with aligned concept labels, task targets and split tags.
#[derive(Clone, Debug)]
pub struct EmbeddingSet {
    pub x: Matrix,
    pub concept: ConceptLabels,
    pub targets: ClassLabels,
    pub split: Vec<Split>,
    pub provenance: Provenance,
}

impl EmbeddingSet {
    pub fn new(
        x: Matrix,
        concept: ConceptLabels,
        targets: ClassLabels,
        split: Vec<Split>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = x.rows();
        for (what, len) in [
            ("concept labels", concept.len()),
            ("targets", targets.len()),
            ("split tags", split.len()),
        ] {
            if len != n {
                return Err(Error::Assembly(format!(
                    "{len} {what} for a matrix with {n} rows"
                )));
            }
        }
        Ok(EmbeddingSet {
            x,
            concept,
            targets,
            split,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// Row indices carrying the given split tag, ascending.
    pub fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.split[i] == which).collect()
    }

    /// Replaces the embedding matrix, keeping labels and split.
    pub fn with_embeddings(&self, x: Matrix, provenance: Provenance) -> Result<Self> {
        EmbeddingSet::new(
            x,
            self.concept.clone(),
            self.targets.clone(),
            self.split.clone(),
            provenance,
        )
    }
}

/// Writes the four data files into `dir` (created if missing). The manifest
/// is left to the caller.
pub fn save_dataset(dir: &Path, set: &EmbeddingSet) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_embeddings(&dir.join(EMBEDDINGS_FILE), &set.x)?;
    save_labels(&dir.join(CONCEPT_FILE), &set.concept.to_strings())?;
    save_labels(&dir.join(TARGETS_FILE), &set.targets.to_strings())?;
    let split: Vec<&str> = set.split.iter().map(|s| s.as_str()).collect();
    save_labels(&dir.join(SPLIT_FILE), &split)?;
    Ok(())
}

/// Loads a dataset directory. Provenance comes from `manifest.json` when
/// present.
pub fn load_dataset(dir: &Path) -> Result<EmbeddingSet> {
    let x = load_embeddings(&dir.join(EMBEDDINGS_FILE))?;
    let concept = ClassLabels::from_strings(&load_labels(&dir.join(CONCEPT_FILE))?);
    let targets = ClassLabels::from_strings(&load_labels(&dir.join(TARGETS_FILE))?);
    let split = load_labels(&dir.join(SPLIT_FILE))?
        .iter()
        .map(|s| s.parse())
        .collect::<Result<Vec<Split>>>()?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let provenance = if manifest_path.exists() {
        RunManifest::load(&manifest_path)?.provenance
    } else {
        None
    }
    .unwrap_or_else(|| Provenance::Imported {
        path: dir.to_path_buf(),
    });
    EmbeddingSet::new(x, concept, targets, split, provenance)
}

/// Content hash of a dataset directory: SHA-256 over the per-file digests of
/// [`DATA_FILES`], in order.
pub fn dataset_hash(dir: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for f in DATA_FILES {
        let digest = sha256_file(&dir.join(f))?;
        h.update(f.as_bytes());
        h.update(b"\0");
        h.update(digest.as_bytes());
        h.update(b"\n");
    }
    Ok(crate::io::manifest::hex(&h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_fractions() {
        for n in [1usize, 7, 10, 101, 5000] {
            let s = seeded_split(n, 3);
            let count = |w| s.iter().filter(|&&x| x == w).count() as f64;
            assert!((count(Split::Train) - 0.8 * n as f64).abs() <= 1.0);
            assert!((count(Split::Dev) - 0.1 * n as f64).abs() <= 1.0);
            assert!((count(Split::Test) - 0.1 * n as f64).abs() <= 1.0);
        }
        assert_eq!(seeded_split(50, 9), seeded_split(50, 9));
        assert_ne!(seeded_split(50, 9), seeded_split(50, 10));
    }

    #[test]
    fn assembly_rejects_count_mismatch() {
        let x = Matrix::zeros(3, 2);
        let c = ClassLabels::from_ids(vec![0, 1], 2).unwrap();
        let t = ClassLabels::from_ids(vec![0, 1, 1], 2).unwrap();
        let err = EmbeddingSet::new(
            x,
            c,
            t,
            vec![Split::Train; 3],
            Provenance::Imported { path: "x".into() },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Assembly(_)));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 * 0.5);
        let c = ClassLabels::from_ids(vec![0, 1, 1, 0], 2).unwrap();
        let t = ClassLabels::from_ids(vec![2, 0, 1, 3], 4).unwrap();
        let set = EmbeddingSet::new(
            x.clone(),
            c.clone(),
            t.clone(),
            vec![Split::Train, Split::Train, Split::Dev, Split::Test],
            Provenance::Imported { path: "src".into() },
        )
        .unwrap();
        save_dataset(dir.path(), &set).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.x, x);
        assert_eq!(back.concept, c);
        assert_eq!(back.targets, t);
        assert_eq!(back.split, set.split);
        let h1 = dataset_hash(dir.path()).unwrap();
        assert_eq!(h1, dataset_hash(dir.path()).unwrap());
        save_labels(&dir.path().join(CONCEPT_FILE), &["1", "1", "1", "0"]).unwrap();
        assert_ne!(h1, dataset_hash(dir.path()).unwrap());
    }

    #[test]
    fn label_count_mismatch_on_load() {
        let dir = tempfile::tempdir().unwrap();
        save_embeddings(&dir.path().join(EMBEDDINGS_FILE), &Matrix::zeros(3, 2)).unwrap();
        save_labels(&dir.path().join(CONCEPT_FILE), &["0", "1"]).unwrap();
        save_labels(&dir.path().join(TARGETS_FILE), &["0", "1", "0"]).unwrap();
        save_labels(&dir.path().join(SPLIT_FILE), &["train", "dev", "test"]).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Assembly(_))
        ));
    }
}
