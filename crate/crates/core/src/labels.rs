use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer class ids in `[0, k)` with a name per class.
///
/// Used for both the concept being erased and the main-task targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabels {
    ids: Vec<usize>,
    names: Vec<String>,
}

pub type ConceptLabels = ClassLabels;

impl ClassLabels {
    pub fn new(ids: Vec<usize>, names: Vec<String>) -> Result<Self> {
        let k = names.len();
        if let Some((i, &id)) = ids.iter().enumerate().find(|(_, &id)| id >= k) {
            return Err(Error::InvalidInput(format!(
                "label {id} at position {i} is outside [0, {k})"
            )));
        }
        Ok(ClassLabels { ids, names })
    }

    /// Ids with generated names `"0"`, `"1"`, ….
    pub fn from_ids(ids: Vec<usize>, k: usize) -> Result<Self> {
        Self::new(ids, (0..k).map(|c| c.to_string()).collect())
    }

    /// Builds the vocabulary from raw label strings. Classes are ordered
    /// numerically when every label parses as an integer, lexicographically
    /// otherwise.
    pub fn from_strings<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut names: Vec<String> = labels.iter().map(|s| s.as_ref().to_owned()).collect();
        names.sort();
        names.dedup();
        if names.iter().all(|n| n.parse::<i64>().is_ok()) {
            names.sort_by_key(|n| n.parse::<i64>().unwrap_or_default());
        }
        let ids = labels
            .iter()
            .map(|s| {
                names
                    .iter()
                    .position(|n| n == s.as_ref())
                    .expect("label present in its own vocabulary")
            })
            .collect();
        ClassLabels { ids, names }
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k()];
        for &id in &self.ids {
            c[id] += 1;
        }
        c
    }

    /// Keeps the rows in `idx`, with the full class vocabulary.
    pub fn subset(&self, idx: &[usize]) -> Self {
        ClassLabels {
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            names: self.names.clone(),
        }
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.ids.iter().map(|&i| self.names[i].clone()).collect()
    }

    /// `N × k` indicator matrix.
    pub fn one_hot(&self) -> crate::linalg::Matrix {
        let k = self.k();
        crate::linalg::Matrix::from_fn(self.len(), k, |i, c| {
            if self.ids[i] == c {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Writes one label per line, `\n` terminated.
pub fn save_labels<S: AsRef<str>>(path: &Path, labels: &[S]) -> Result<()> {
    let mut out = String::new();
    for (i, l) in labels.iter().enumerate() {
        let l = l.as_ref();
        if l.is_empty() || l.contains(['\n', '\r']) {
            return Err(Error::InvalidInput(format!(
                "label {i} is empty or contains a line break"
            )));
        }
        out.push_str(l);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a UTF-8 label file. `\r\n` line endings are accepted; a trailing
/// newline is optional; an empty file holds zero labels.
pub fn load_labels(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to() as u64,
        message: "label file is not valid UTF-8".into(),
    })?;
    let mut labels = Vec::new();
    let mut offset = 0u64;
    for line in text.lines() {
        if line.is_empty() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset,
                message: format!("empty label on line {}", labels.len() + 1),
            });
        }
        offset += line.len() as u64 + 1;
        labels.push(line.to_owned());
    }
    Ok(labels)
}
