//! The amnesic-probing protocol.
//!
//! Step 1 checks that a linear probe recovers the concept before erasure and
//! fails after it. Step 2 compares the main-task damage done by the eraser
//! with random-projection and column-dropout controls that remove the same
//! number of directions. Step 3 hands the gold concept labels back to the
//! erased representation and checks that the task recovers.

mod report;

use std::collections::BTreeMap;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::erasure::{
    fit_dropout, fit_inlp, fit_leace, fit_mp, fit_random_projection, Eraser, InlpConfig, Method,
};
use crate::error::{Error, Result};
use crate::io::dataset::{EmbeddingSet, Split};
use crate::labels::{ClassLabels, ConceptLabels};
use crate::linalg::{default_rank_tol, matrix_rank, mean_row_cosine, CosineSummary, Matrix};
use crate::probing::{
    evaluate_probe, log_softmax_in_place, score_predictions, train_probe, train_softmax,
    ProbeReport, SoftmaxLinear, TrainConfig,
};

pub use report::render_markdown;

pub const REPORT_SCHEMA: &str = "amnesic-report/1";

/// Tolerance for the eraser idempotence and projector checks.
pub const IDEMPOTENCE_TOL: f64 = 1e-8;

/// Linear softmax head over the main-task vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskHead {
    pub model: SoftmaxLinear,
    pub vocab: Vec<String>,
}

impl TaskHead {
    pub fn new(weights: Matrix, bias: Vec<f64>, vocab: Vec<String>) -> Result<Self> {
        if vocab.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "task head needs a vocabulary of at least 2, got {}",
                vocab.len()
            )));
        }
        if weights.rows() != vocab.len() || bias.len() != vocab.len() {
            return Err(Error::Dimension(format!(
                "weights {}x{} and bias {} for a vocabulary of {}",
                weights.rows(),
                weights.cols(),
                bias.len(),
                vocab.len()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("task head bias must be finite".into()));
        }
        Ok(TaskHead {
            model: SoftmaxLinear { weights, bias },
            vocab,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.model.predict(x)
    }
}

pub fn train_task_head(x: &Matrix, targets: &ClassLabels, cfg: &TrainConfig) -> Result<TaskHead> {
    if targets.k() < 2 {
        return Err(Error::InvalidInput(format!(
            "task head needs a vocabulary of at least 2, got {}",
            targets.k()
        )));
    }
    let t = train_softmax(x, targets.ids(), targets.k(), cfg)?;
    Ok(TaskHead {
        model: t.model,
        vocab: targets.names().to_vec(),
    })
}

pub fn task_accuracy(head: &TaskHead, x: &Matrix, targets: &ClassLabels) -> Result<f64> {
    if targets.k() != head.vocab_size() {
        return Err(Error::Dimension(format!(
            "head vocabulary {} vs target vocabulary {}",
            head.vocab_size(),
            targets.k()
        )));
    }
    Ok(score_predictions(&head.predict(x)?, targets)?.accuracy)
}

/// Mean over rows of `KL(p ‖ q)` in nats, where `p` and `q` are the head's
/// output distributions on the vanilla and modified rows.
///
/// Each row's divergence is computed from log-softmax values and clamped at
/// zero, so bit-identical inputs give exactly 0.
pub fn kl_divergence_report(head: &TaskHead, x_vanilla: &Matrix, x_modified: &Matrix) -> Result<f64> {
    if x_vanilla.shape() != x_modified.shape() {
        return Err(Error::Dimension(format!(
            "vanilla {:?} vs modified {:?}",
            x_vanilla.shape(),
            x_modified.shape()
        )));
    }
    if x_vanilla.cols() != head.model.dim() {
        return Err(Error::Dimension(format!(
            "head expects {} features, data has {}",
            head.model.dim(),
            x_vanilla.cols()
        )));
    }
    let n = x_vanilla.rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (a, b) in x_vanilla.row_iter().zip(x_modified.row_iter()) {
        let lp = head.model.log_probs(a);
        let lq = head.model.log_probs(b);
        total += kl_from_log_probs(&lp, &lq);
    }
    Ok(total / n as f64)
}

/// `Σ exp(lp)·(lp − lq)`, clamped at zero.
pub fn kl_from_log_probs(lp: &[f64], lq: &[f64]) -> f64 {
    let s: f64 = lp
        .iter()
        .zip(lq)
        .map(|(&a, &b)| if a == b { 0.0 } else { a.exp() * (a - b) })
        .sum();
    s.max(0.0)
}

/// Converts raw scores into log-probabilities.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let mut z = scores.to_vec();
    log_softmax_in_place(&mut z);
    z
}

/// Row indices used to fit (train) and to score (eval).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalSplit {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
}

impl EvalSplit {
    /// Fit on the train split, score on the test split.
    pub fn from_set(set: &EmbeddingSet) -> Result<Self> {
        let s = EvalSplit {
            train: set.indices(Split::Train),
            eval: set.indices(Split::Test),
        };
        if s.train.is_empty() || s.eval.is_empty() {
            return Err(Error::InvalidInput(format!(
                "protocol needs non-empty train and test splits (train {}, test {})",
                s.train.len(),
                s.eval.len()
            )));
        }
        Ok(s)
    }
}

/// Random-projection and dropout erasers matched to an amnesic eraser.
#[derive(Clone, Debug)]
pub struct ControlArms {
    pub random: Eraser,
    pub dropout: Eraser,
}

impl ControlArms {
    /// Rejects controls whose direction count differs from the amnesic
    /// eraser's.
    pub fn new(amnesic: &Eraser, random: Eraser, dropout: Eraser) -> Result<Self> {
        for (name, e, want) in [
            ("random", &random, Method::Random),
            ("dropout", &dropout, Method::Dropout),
        ] {
            if e.method != want {
                return Err(Error::Invariant(format!(
                    "{name} control arm holds a {} eraser",
                    e.method
                )));
            }
            if e.directions_removed != amnesic.directions_removed {
                return Err(Error::Invariant(format!(
                    "{name} control removes {} directions but the amnesic eraser removed {}",
                    e.directions_removed, amnesic.directions_removed
                )));
            }
            if e.dim() != amnesic.dim() {
                return Err(Error::Dimension(format!(
                    "{name} control is {}-dimensional, amnesic eraser {}",
                    e.dim(),
                    amnesic.dim()
                )));
            }
        }
        Ok(ControlArms { random, dropout })
    }

    pub fn build(amnesic: &Eraser, seed: u64) -> Result<Self> {
        let n = amnesic.directions_removed;
        let d = amnesic.dim();
        Self::new(
            amnesic,
            fit_random_projection(d, n, seed)?,
            fit_dropout(d, n, seed)?,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmOutcome {
    pub method: Method,
    pub directions_removed: usize,
    /// Held-out accuracy of a head retrained on this arm's representation.
    pub task_acc: f64,
    /// Divergence of the vanilla head's outputs on this arm's representation.
    pub kl: f64,
    #[serde(skip)]
    pub predictions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InformationControl {
    pub vanilla_acc: f64,
    #[serde(skip)]
    pub vanilla_predictions: Vec<usize>,
    pub amnesic: ArmOutcome,
    pub random: ArmOutcome,
    pub dropout: ArmOutcome,
    pub amnesic_exceeds_controls: bool,
    pub nothing_removed: bool,
}

struct Retrained {
    head: TaskHead,
    acc: f64,
    predictions: Vec<usize>,
}

fn retrain(x: &Matrix, targets: &ClassLabels, split: &EvalSplit, cfg: &TrainConfig) -> Result<Retrained> {
    let head = train_task_head(&x.select_rows(&split.train), &targets.subset(&split.train), cfg)?;
    let predictions = head.predict(&x.select_rows(&split.eval))?;
    let acc = score_predictions(&predictions, &targets.subset(&split.eval))?.accuracy;
    Ok(Retrained {
        head,
        acc,
        predictions,
    })
}

/// Step 2: the amnesic eraser must hurt the task more than either control.
///
/// Every arm retrains its own head with the same hyperparameters; the KL
/// column measures how far the vanilla head's outputs move when it is fed
/// each arm's representation of the evaluation rows. The arms run on
/// separate threads.
pub fn information_control(
    x: &Matrix,
    targets: &ClassLabels,
    split: &EvalSplit,
    amnesic: &Eraser,
    controls: &ControlArms,
    cfg: &TrainConfig,
) -> Result<InformationControl> {
    ControlArms::new(amnesic, controls.random.clone(), controls.dropout.clone())?;
    let x_eval = x.select_rows(&split.eval);
    let arms = [amnesic, &controls.random, &controls.dropout];
    let (vanilla, arm_results) = thread::scope(|s| {
        let vanilla = s.spawn(|| retrain(x, targets, split, cfg));
        let handles: Vec<_> = arms
            .iter()
            .map(|e| {
                s.spawn(move || -> Result<(Matrix, Retrained)> {
                    let xe = e.apply(x)?;
                    let r = retrain(&xe, targets, split, cfg)?;
                    Ok((xe.select_rows(&split.eval), r))
                })
            })
            .collect();
        let vanilla = vanilla.join().expect("vanilla arm panicked");
        let arms: Vec<_> = handles
            .into_iter()
            .map(|h| h.join().expect("control arm panicked"))
            .collect();
        (vanilla, arms)
    });
    let vanilla = vanilla?;
    let mut outcomes = Vec::with_capacity(3);
    for (e, r) in arms.iter().zip(arm_results) {
        let (xe_eval, r) = r?;
        outcomes.push(ArmOutcome {
            method: e.method,
            directions_removed: e.directions_removed,
            task_acc: r.acc,
            kl: kl_divergence_report(&vanilla.head, &x_eval, &xe_eval)?,
            predictions: r.predictions,
        });
    }
    let dropout = outcomes.pop().expect("three arms");
    let random = outcomes.pop().expect("three arms");
    let amnesic_out = outcomes.pop().expect("three arms");
    let nothing_removed = amnesic.directions_removed == 0;
    let amnesic_exceeds_controls = !nothing_removed
        && amnesic_out.task_acc < random.task_acc
        && amnesic_out.task_acc < dropout.task_acc;
    Ok(InformationControl {
        vanilla_acc: vanilla.acc,
        vanilla_predictions: vanilla.predictions,
        amnesic: amnesic_out,
        random,
        dropout,
        amnesic_exceeds_controls,
        nothing_removed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selectivity {
    /// Head retrained on erased features plus one-hot gold labels.
    pub restored_acc: f64,
    /// Head retrained on erased features alone.
    pub erased_baseline_acc: f64,
    /// `restored_acc − erased_baseline_acc`.
    pub delta: f64,
}

/// Appends one-hot gold concept columns to `x`, multiplied by `scale`.
pub fn with_gold_labels(x: &Matrix, gold: &ConceptLabels, scale: f64) -> Result<Matrix> {
    if gold.len() != x.rows() {
        return Err(Error::Dimension(format!(
            "{} gold labels for {} rows",
            gold.len(),
            x.rows()
        )));
    }
    x.hstack(&gold.one_hot().scale(scale))
}

/// Root-mean-square row norm of the given rows; 1 when they are all zero.
pub fn rms_row_norm(x: &Matrix, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    let ms = rows
        .iter()
        .map(|&i| x.row(i).iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / rows.len() as f64;
    if ms > 0.0 {
        ms.sqrt()
    } else {
        1.0
    }
}

/// Step 3: gold concept labels appended to the erased representation should
/// restore the task.
///
/// The indicator block is scaled to the RMS row norm of the erased training
/// rows so that the fixed-step trainer moves its weights as fast as the
/// embedding weights.
pub fn selectivity_control(
    x_erased: &Matrix,
    gold: &ConceptLabels,
    targets: &ClassLabels,
    split: &EvalSplit,
    cfg: &TrainConfig,
) -> Result<Selectivity> {
    let augmented = with_gold_labels(x_erased, gold, rms_row_norm(x_erased, &split.train))?;
    let (restored, baseline) = thread::scope(|s| {
        let a = s.spawn(|| retrain(&augmented, targets, split, cfg));
        let b = s.spawn(|| retrain(x_erased, targets, split, cfg));
        (a.join().expect("arm panicked"), b.join().expect("arm panicked"))
    });
    let (restored, baseline) = (restored?.acc, baseline?.acc);
    Ok(Selectivity {
        restored_acc: restored,
        erased_baseline_acc: baseline,
        delta: restored - baseline,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryDelta {
    pub category: String,
    pub n: usize,
    pub vanilla_correct: usize,
    pub modified_correct: usize,
    pub vanilla_acc: Option<f64>,
    pub modified_acc: Option<f64>,
    /// `vanilla_acc − modified_acc`; negative when the modification helped.
    pub delta: Option<f64>,
}

/// Task accuracy before and after a modification, broken down by category.
/// Every category in the vocabulary gets a row, empty ones with `n = 0`.
pub fn per_class_delta(
    vanilla_preds: &[usize],
    modified_preds: &[usize],
    targets: &[usize],
    categories: &ClassLabels,
) -> Result<Vec<CategoryDelta>> {
    let n = targets.len();
    if vanilla_preds.len() != n || modified_preds.len() != n || categories.len() != n {
        return Err(Error::Dimension(format!(
            "per-class delta over {} targets with {} vanilla, {} modified predictions and {} categories",
            n,
            vanilla_preds.len(),
            modified_preds.len(),
            categories.len()
        )));
    }
    let k = categories.k();
    let mut count = vec![0usize; k];
    let mut v_ok = vec![0usize; k];
    let mut m_ok = vec![0usize; k];
    for i in 0..n {
        let c = categories.ids()[i];
        count[c] += 1;
        v_ok[c] += usize::from(vanilla_preds[i] == targets[i]);
        m_ok[c] += usize::from(modified_preds[i] == targets[i]);
    }
    Ok((0..k)
        .map(|c| {
            let frac = |hits: usize| (count[c] > 0).then(|| hits as f64 / count[c] as f64);
            let (va, ma) = (frac(v_ok[c]), frac(m_ok[c]));
            CategoryDelta {
                category: categories.names()[c].clone(),
                n: count[c],
                vanilla_correct: v_ok[c],
                modified_correct: m_ok[c],
                vanilla_acc: va,
                modified_acc: ma,
                delta: va.zip(ma).map(|(a, b)| a - b),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub rank_before: usize,
    pub rank_after: usize,
    /// `rank_before − rank_after`; negative if the modification added rank.
    pub rank_delta: i64,
    pub mean_cosine: CosineSummary,
}

pub fn distortion_diagnostics(before: &Matrix, after: &Matrix, rank_rel_tol: f64) -> Result<Distortion> {
    if before.shape() != after.shape() {
        return Err(Error::Dimension(format!(
            "before {:?} vs after {:?}",
            before.shape(),
            after.shape()
        )));
    }
    let rank_before = matrix_rank(before, rank_rel_tol)?;
    let rank_after = matrix_rank(after, rank_rel_tol)?;
    Ok(Distortion {
        rank_before,
        rank_after,
        rank_delta: rank_before as i64 - rank_after as i64,
        mean_cosine: mean_row_cosine(before, after)?,
    })
}

/// Everything `run_protocol` needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub method: Method,
    pub inlp: InlpConfig,
    pub probe: TrainConfig,
    pub task: TrainConfig,
    pub control_seed: u64,
    /// Relative singular-value cutoff for ranks; defaults to
    /// `1e-10 · max(rows, cols)`.
    pub rank_tol: Option<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            method: Method::Mp,
            inlp: InlpConfig::default(),
            probe: TrainConfig::default(),
            task: TrainConfig::default(),
            control_seed: 7,
            rank_tol: None,
        }
    }
}

/// Fits the configured eraser on `x`.
pub fn fit_eraser(x: &Matrix, y: &ConceptLabels, cfg: &ProtocolConfig, d: usize) -> Result<Eraser> {
    match cfg.method {
        Method::Mp => fit_mp(x, y),
        Method::Inlp => fit_inlp(x, y, &cfg.inlp),
        Method::Leace => fit_leace(x, y),
        Method::Identity => Ok(Eraser::identity(d)),
        Method::Random | Method::Dropout => Err(Error::InvalidInput(format!(
            "{} is a control; run-protocol builds it automatically",
            cfg.method
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmnesicReport {
    pub schema: String,
    pub method: Method,
    pub dataset_hash: Option<String>,
    pub config: ProtocolConfig,
    pub seeds: BTreeMap<String, u64>,
    pub n_train: usize,
    pub n_eval: usize,
    pub dim: usize,
    pub concept_classes: Vec<String>,
    pub vocab_size: usize,

    pub directions_removed: usize,
    pub iterations: usize,
    pub converged: bool,

    pub probe_before: ProbeReport,
    pub probe_after: ProbeReport,

    pub vanilla_task_acc: f64,
    pub amnesic_task_acc: f64,
    pub random_control_acc: f64,
    pub dropout_control_acc: f64,
    pub kl_amnesic: f64,
    pub kl_random: f64,
    pub kl_dropout: f64,
    pub amnesic_exceeds_controls: bool,
    pub nothing_removed: bool,

    pub selectivity_acc: f64,
    pub selectivity_baseline_acc: f64,
    pub selectivity_delta: f64,

    /// Keyed by arm: `amnesic`, `random`, `dropout`.
    pub per_class_delta: BTreeMap<String, Vec<CategoryDelta>>,

    pub rank_before: usize,
    pub rank_after: usize,
    pub rank_delta: i64,
    pub rank_rel_tol: f64,
    pub mean_cosine: Option<f64>,
    pub cosine_rows_skipped: usize,

    pub invariants: Vec<InvariantCheck>,
}

impl AmnesicReport {
    pub fn invariants_hold(&self) -> bool {
        self.invariants.iter().all(|c| c.passed)
    }

    pub fn failed_invariants(&self) -> Vec<&InvariantCheck> {
        self.invariants.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// A finished protocol run: the report plus the fitted eraser and the erased
/// embeddings for every row.
#[derive(Clone, Debug)]
pub struct ProtocolOutcome {
    pub report: AmnesicReport,
    pub eraser: Eraser,
    pub erased: Matrix,
}

fn check(name: &str, passed: bool, detail: String) -> InvariantCheck {
    InvariantCheck {
        name: name.into(),
        passed,
        detail,
    }
}

/// Runs all three protocol steps plus the distortion diagnostics.
///
/// Erasers, probes and heads are fitted on the train split and scored on the
/// test split. Invariant checks are recorded in the report rather than
/// raised, so a failing run still produces a complete report.
pub fn run_protocol(
    set: &EmbeddingSet,
    cfg: &ProtocolConfig,
    dataset_hash: Option<String>,
) -> Result<ProtocolOutcome> {
    cfg.probe.validate()?;
    cfg.task.validate()?;
    let split = EvalSplit::from_set(set)?;
    let x = &set.x;
    let x_train = x.select_rows(&split.train);
    let x_eval = x.select_rows(&split.eval);
    let c_train = set.concept.subset(&split.train);
    let c_eval = set.concept.subset(&split.eval);

    log::info!("step 1: fitting {} eraser and probes", cfg.method);
    let eraser = fit_eraser(&x_train, &c_train, cfg, set.d())?;
    let erased = eraser.apply(x)?;
    let xe_train = erased.select_rows(&split.train);
    let xe_eval = erased.select_rows(&split.eval);
    let (before, after) = thread::scope(|s| {
        let b = s.spawn(|| {
            let p = train_probe(&x_train, &c_train, &cfg.probe)?;
            evaluate_probe(&p, &x_eval, &c_eval)
        });
        let a = s.spawn(|| {
            let p = train_probe(&xe_train, &c_train, &cfg.probe)?;
            evaluate_probe(&p, &xe_eval, &c_eval)
        });
        (b.join().expect("probe panicked"), a.join().expect("probe panicked"))
    });
    let (probe_before, probe_after) = (before?, after?);

    log::info!(
        "step 2: information control with {} matched directions",
        eraser.directions_removed
    );
    let controls = ControlArms::build(&eraser, cfg.control_seed)?;
    let info = information_control(x, &set.targets, &split, &eraser, &controls, &cfg.task)?;

    log::info!("step 3: selectivity control");
    let sel = selectivity_control(&erased, &set.concept, &set.targets, &split, &cfg.task)?;

    let t_eval = set.targets.subset(&split.eval);
    let mut per_class = BTreeMap::new();
    for (name, arm) in [
        ("amnesic", &info.amnesic),
        ("random", &info.random),
        ("dropout", &info.dropout),
    ] {
        per_class.insert(
            name.to_string(),
            per_class_delta(&info.vanilla_predictions, &arm.predictions, t_eval.ids(), &c_eval)?,
        );
    }

    let rank_rel_tol = cfg
        .rank_tol
        .unwrap_or_else(|| default_rank_tol(x.rows(), x.cols()));
    let distortion = distortion_diagnostics(x, &erased, rank_rel_tol)?;

    let mut invariants = Vec::new();
    let kls = [info.amnesic.kl, info.random.kl, info.dropout.kl];
    invariants.push(check(
        "kl_nonnegative",
        kls.iter().all(|&k| k >= 0.0 && k.is_finite()),
        format!("{kls:?}"),
    ));
    let fracs = [
        probe_before.accuracy,
        probe_after.accuracy,
        info.vanilla_acc,
        info.amnesic.task_acc,
        info.random.task_acc,
        info.dropout.task_acc,
        sel.restored_acc,
        sel.erased_baseline_acc,
    ];
    invariants.push(check(
        "fractions_in_unit_interval",
        fracs.iter().all(|f| (0.0..=1.0).contains(f)),
        format!("{fracs:?}"),
    ));
    invariants.push(check(
        "control_direction_counts",
        controls.random.directions_removed == eraser.directions_removed
            && controls.dropout.directions_removed == eraser.directions_removed,
        format!(
            "amnesic {}, random {}, dropout {}",
            eraser.directions_removed,
            controls.random.directions_removed,
            controls.dropout.directions_removed
        ),
    ));
    let gap = eraser.idempotence_gap(&x_eval)?;
    invariants.push(check(
        "eraser_idempotent",
        gap < IDEMPOTENCE_TOL,
        format!("max |E(E(x)) - E(x)| = {gap:.3e}"),
    ));
    if eraser.method.is_orthogonal_projector() {
        let (perr, asym) = (eraser.projector_error(), eraser.asymmetry());
        let zero_offset = eraser.offset.iter().all(|&b| b == 0.0);
        invariants.push(check(
            "orthogonal_projector",
            perr < IDEMPOTENCE_TOL && asym < IDEMPOTENCE_TOL && zero_offset,
            format!("|A^2 - A| = {perr:.3e}, |A - A^T| = {asym:.3e}, zero offset {zero_offset}"),
        ));
    }
    let rows = &per_class["amnesic"];
    let correct: usize = rows.iter().map(|r| r.vanilla_correct).sum();
    let n_eval = split.eval.len();
    let vanilla_correct = info
        .vanilla_predictions
        .iter()
        .zip(t_eval.ids())
        .filter(|(p, t)| p == t)
        .count();
    let weighted: f64 = rows
        .iter()
        .filter_map(|r| r.vanilla_acc.map(|a| a * r.n as f64))
        .sum::<f64>()
        / n_eval as f64;
    invariants.push(check(
        "per_class_bookkeeping",
        correct == vanilla_correct && (weighted - info.vanilla_acc).abs() <= 1e-12,
        format!(
            "sum of per-class correct {correct} vs {vanilla_correct}; weighted {weighted} vs {}",
            info.vanilla_acc
        ),
    ));

    let mut seeds = BTreeMap::new();
    seeds.insert("probe".to_string(), cfg.probe.seed);
    seeds.insert("task".to_string(), cfg.task.seed);
    seeds.insert("control".to_string(), cfg.control_seed);
    if cfg.method == Method::Inlp {
        seeds.insert("inlp".to_string(), cfg.inlp.seed);
    }
    if let crate::io::dataset::Provenance::Generated(g) = &set.provenance {
        seeds.insert("data".to_string(), g.seed);
    }

    let report = AmnesicReport {
        schema: REPORT_SCHEMA.into(),
        method: cfg.method,
        dataset_hash,
        config: cfg.clone(),
        seeds,
        n_train: split.train.len(),
        n_eval,
        dim: set.d(),
        concept_classes: set.concept.names().to_vec(),
        vocab_size: set.targets.k(),
        directions_removed: eraser.directions_removed,
        iterations: eraser.iterations,
        converged: eraser.converged,
        probe_before,
        probe_after,
        vanilla_task_acc: info.vanilla_acc,
        amnesic_task_acc: info.amnesic.task_acc,
        random_control_acc: info.random.task_acc,
        dropout_control_acc: info.dropout.task_acc,
        kl_amnesic: info.amnesic.kl,
        kl_random: info.random.kl,
        kl_dropout: info.dropout.kl,
        amnesic_exceeds_controls: info.amnesic_exceeds_controls,
        nothing_removed: info.nothing_removed,
        selectivity_acc: sel.restored_acc,
        selectivity_baseline_acc: sel.erased_baseline_acc,
        selectivity_delta: sel.delta,
        per_class_delta: per_class,
        rank_before: distortion.rank_before,
        rank_after: distortion.rank_after,
        rank_delta: distortion.rank_delta,
        rank_rel_tol,
        mean_cosine: distortion.mean_cosine.mean,
        cosine_rows_skipped: distortion.mean_cosine.rows_skipped,
        invariants,
    };
    Ok(ProtocolOutcome {
        report,
        eraser,
        erased,
    })
}
