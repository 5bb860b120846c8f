//! Linear concept erasure and amnesic probing.
//!
//! The crate fits three concept erasers (mean projection, iterative nullspace
//! projection and LEACE) plus random-projection and dropout controls behind a
//! single affine [`erasure::Eraser`] type, trains linear probes and task
//! heads, and runs the amnesic-probing protocol on planted-concept datasets
//! whose ground truth is known.

pub mod config;
pub mod erasure;
pub mod error;
pub mod generator;
pub mod harness;
pub mod io;
pub mod labels;
pub mod linalg;
pub mod probing;
mod rng;

pub use erasure::{Eraser, InlpConfig, Method};
pub use error::{Error, ErrorKind, Result};
pub use generator::{generate_planted, GeneratorConfig, PlantedDataset};
pub use harness::{run_protocol, AmnesicReport, ProtocolConfig};
pub use io::dataset::{EmbeddingSet, Split};
pub use labels::{ClassLabels, ConceptLabels};
pub use linalg::Matrix;
pub use probing::{LinearProbe, ProbeReport, TrainConfig};
