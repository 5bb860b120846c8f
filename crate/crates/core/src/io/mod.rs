//! On-disk formats: the binary matrix container, dataset directories and run
//! manifests.

pub mod container;
pub mod dataset;
pub mod manifest;

pub use container::{load_embeddings, save_embeddings, BlockReader, BlockWriter};
pub use dataset::{
    dataset_hash, load_dataset, save_dataset, seeded_split, EmbeddingSet, Provenance, Split,
};
pub use manifest::{sha256_bytes, sha256_file, Artifact, RunManifest};
