//! Run configuration: an INI file with `[generate]`, `[erase]`, `[probe]`,
//! `[task]` and `[report]` sections of `key = value` lines.
//!
//! Parsing is fail-closed. Unknown sections, unknown keys, keys outside a
//! section and repeated keys are all errors. Every seed not set explicitly
//! falls back to the global seed.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::erasure::{InlpConfig, Method};
use crate::error::{Error, Result};
use crate::generator::GeneratorConfig;
use crate::harness::ProtocolConfig;
use crate::probing::TrainConfig;

pub const SEED_ENV: &str = "ERASER_LAB_SEED";
pub const DEFAULT_SEED: u64 = 7;

pub const SECTIONS: [&str; 5] = ["generate", "erase", "probe", "task", "report"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EraseConfig {
    pub method: Method,
    pub max_iters: usize,
    pub stop_margin: f64,
    pub dev_fraction: f64,
    pub seed: u64,
    /// Directions (random) or columns (dropout) to remove when erasing with
    /// a control method directly.
    pub n_directions: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub control_seed: u64,
    pub rank_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub generate: GeneratorConfig,
    pub erase: EraseConfig,
    pub probe: TrainConfig,
    pub task: TrainConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::with_seed(DEFAULT_SEED)
    }
}

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("cannot parse {value:?}: {e}"))
}

/// `auto` (or `none`) maps to `None`.
fn parse_opt<T: FromStr>(value: &str) -> std::result::Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    match value {
        "auto" | "none" => Ok(None),
        v => parse(v).map(Some),
    }
}

impl RunConfig {
    /// Defaults with every seed set to `seed`.
    pub fn with_seed(seed: u64) -> Self {
        let inlp = InlpConfig::default();
        RunConfig {
            generate: GeneratorConfig {
                seed,
                ..GeneratorConfig::default()
            },
            erase: EraseConfig {
                method: Method::Mp,
                max_iters: inlp.max_iters,
                stop_margin: inlp.stop_margin,
                dev_fraction: inlp.dev_fraction,
                seed,
                n_directions: None,
            },
            probe: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            task: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            report: ReportConfig {
                control_seed: seed,
                rank_tol: None,
            },
        }
    }

    /// Sets one key. Shared by the file parser and command-line flags.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match (section, key) {
            ("generate", "n") => self.generate.n = parse(v)?,
            ("generate", "d") => self.generate.d = parse(v)?,
            ("generate", "k") => self.generate.k = parse(v)?,
            ("generate", "m") => self.generate.m = parse(v)?,
            ("generate", "noise_sigma") => self.generate.noise_sigma = parse(v)?,
            ("generate", "concept_scale") => self.generate.concept_scale = parse(v)?,
            ("generate", "distractor_scale") => self.generate.distractor_scale = parse(v)?,
            ("generate", "seed") => self.generate.seed = parse(v)?,

            ("erase", "method") => self.erase.method = parse(v)?,
            ("erase", "max_iters") => self.erase.max_iters = parse(v)?,
            ("erase", "stop_margin") => self.erase.stop_margin = parse(v)?,
            ("erase", "dev_fraction") => self.erase.dev_fraction = parse(v)?,
            ("erase", "seed") => self.erase.seed = parse(v)?,
            ("erase", "n_directions") => self.erase.n_directions = parse_opt(v)?,

            ("probe" | "task", k) => {
                let t = if section == "probe" {
                    &mut self.probe
                } else {
                    &mut self.task
                };
                match k {
                    "lr" => t.lr = parse(v)?,
                    "epochs" => t.epochs = parse(v)?,
                    "batch" => t.batch = parse(v)?,
                    "l2" => t.l2 = parse(v)?,
                    "seed" => t.seed = parse(v)?,
                    _ => return Err(format!("unknown key {key:?} in [{section}]")),
                }
            }

            ("report", "control_seed") => self.report.control_seed = parse(v)?,
            ("report", "rank_tol") => self.report.rank_tol = parse_opt(v)?,

            (s, _) if !SECTIONS.contains(&s) => return Err(format!("unknown section [{s}]")),
            _ => return Err(format!("unknown key {key:?} in [{section}]")),
        }
        Ok(())
    }

    /// Applies `section.key=value`.
    pub fn set_dotted(&mut self, assignment: &str) -> std::result::Result<(), String> {
        let (lhs, value) = assignment
            .split_once('=')
            .ok_or_else(|| format!("expected section.key=value, got {assignment:?}"))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| format!("expected section.key=value, got {assignment:?}"))?;
        self.set(section, key, value)
    }

    /// Applies every key in an INI file on top of the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ini = Ini::load_from_str_noescape(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: Some(e.line),
            message: e.msg.into_owned(),
        })?;
        let config_err = |message: String| Error::Config {
            path: path.to_path_buf(),
            line: None,
            message,
        };
        let mut seen = BTreeSet::new();
        let mut sections = BTreeSet::new();
        for (section, props) in &ini {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(config_err(format!("key {k:?} appears before any [section]")));
                }
                continue;
            };
            if !sections.insert(section.to_string()) {
                return Err(config_err(format!("duplicate section [{section}]")));
            }
            for (key, value) in props.iter() {
                if !seen.insert((section.to_string(), key.to_string())) {
                    return Err(config_err(format!("duplicate key {key:?} in [{section}]")));
                }
                self.set(section, key, value).map_err(|m| config_err(format!("[{section}] {key}: {m}")))?;
            }
        }
        Ok(())
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            method: self.erase.method,
            inlp: InlpConfig {
                max_iters: self.erase.max_iters,
                stop_margin: self.erase.stop_margin,
                dev_fraction: self.erase.dev_fraction,
                seed: self.erase.seed,
                probe: self.probe.clone(),
            },
            probe: self.probe.clone(),
            task: self.task.clone(),
            control_seed: self.report.control_seed,
            rank_tol: self.report.rank_tol,
        }
    }
}

/// Defaults seeded with `seed`, overlaid with the file at `path`.
pub fn parse_config(path: &Path, seed: u64) -> Result<RunConfig> {
    let mut cfg = RunConfig::with_seed(seed);
    cfg.apply_file(path)?;
    Ok(cfg)
}

/// The global seed from `ERASER_LAB_SEED`, or the built-in default.
pub fn seed_from_env() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("{SEED_ENV}={v:?} is not a non-negative integer"))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}
