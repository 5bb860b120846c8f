use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use eraser_lab::config::{RunConfig, DEFAULT_SEED, SEED_ENV};
use eraser_lab::erasure::{
    fit_dropout, fit_inlp, fit_leace, fit_mp, fit_random_projection, Eraser,
};
use eraser_lab::harness::{render_markdown, run_protocol, AmnesicReport};
use eraser_lab::io::dataset::{
    dataset_hash, load_dataset, save_dataset, Provenance, Split, DATA_FILES, MANIFEST_FILE,
};
use eraser_lab::io::manifest::RunManifest;
use eraser_lab::probing::{evaluate_probe, train_probe};
use eraser_lab::{generate_planted, ErrorKind, Method};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Linear concept erasure and amnesic probing on embedding datasets.
#[derive(Parser, Debug)]
#[command(name = "eraser-lab", version)]
struct Cli {
    /// Global seed; every seed not set elsewhere defaults to it.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// INI run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override any configuration key, e.g. `--set task.epochs=20`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic planted-concept dataset.
    Generate(GenerateArgs),
    /// Fit an eraser and write it with the erased dataset.
    Erase(EraseArgs),
    /// Train a concept probe on the train split and score it on the test split.
    Probe(ProbeArgs),
    /// Run the full amnesic probing protocol and write report.json and report.md.
    RunProtocol(ProtocolArgs),
    /// Tabulate several reports side by side.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    gen: GenerateFlags,
}

#[derive(Args, Debug, Default)]
struct GenerateFlags {
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    #[arg(long)]
    concept_scale: Option<String>,
    #[arg(long)]
    distractor_scale: Option<String>,
    /// Generator seed.
    #[arg(long)]
    data_seed: Option<String>,
}

#[derive(Args, Debug, Default)]
struct EraseFlags {
    /// mp, inlp, leace, identity, random or dropout.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    stop_margin: Option<String>,
    #[arg(long)]
    dev_fraction: Option<String>,
    /// INLP seed.
    #[arg(long)]
    erase_seed: Option<String>,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    probe_lr: Option<String>,
    #[arg(long)]
    probe_epochs: Option<String>,
    #[arg(long)]
    probe_batch: Option<String>,
    #[arg(long)]
    probe_l2: Option<String>,
    #[arg(long)]
    probe_seed: Option<String>,
    #[arg(long)]
    task_lr: Option<String>,
    #[arg(long)]
    task_epochs: Option<String>,
    #[arg(long)]
    task_batch: Option<String>,
    #[arg(long)]
    task_l2: Option<String>,
    #[arg(long)]
    task_seed: Option<String>,
}

#[derive(Args, Debug)]
struct EraseArgs {
    /// Dataset directory.
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    erase: EraseFlags,
    /// Directions (random) or columns (dropout) to remove.
    #[arg(long = "n")]
    n_directions: Option<String>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    dataset: PathBuf,
    /// Directory for the probe artifact and its evaluation.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct ProtocolArgs {
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    erase: EraseFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long)]
    control_seed: Option<String>,
    #[arg(long)]
    rank_tol: Option<String>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// report.json files.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

/// A command-line mistake rather than bad data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Failure after the outputs were written, e.g. a violated invariant.
#[derive(Debug)]
struct InvariantFailure(String);

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvariantFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<InvariantFailure>() {
            return EXIT_NUMERICAL;
        }
        if let Some(e) = cause.downcast_ref::<eraser_lab::Error>() {
            return match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_DATA
}

fn apply(cfg: &mut RunConfig, section: &str, pairs: &[(&str, &Option<String>)]) -> anyhow::Result<()> {
    for (key, value) in pairs {
        if let Some(v) = value {
            cfg.set(section, key, v)
                .map_err(|m| usage(format!("--{}: {m}", key.replace('_', "-"))))?;
        }
    }
    Ok(())
}

impl GenerateFlags {
    fn apply(&self, cfg: &mut RunConfig) -> anyhow::Result<()> {
        apply(
            cfg,
            "generate",
            &[
                ("n", &self.n),
                ("d", &self.d),
                ("k", &self.k),
                ("m", &self.m),
                ("noise_sigma", &self.noise_sigma),
                ("concept_scale", &self.concept_scale),
                ("distractor_scale", &self.distractor_scale),
                ("seed", &self.data_seed),
            ],
        )
    }
}

impl EraseFlags {
    fn apply(&self, cfg: &mut RunConfig) -> anyhow::Result<()> {
        if let Some(m) = self.method {
            cfg.erase.method = m;
        }
        apply(
            cfg,
            "erase",
            &[
                ("max_iters", &self.max_iters),
                ("stop_margin", &self.stop_margin),
                ("dev_fraction", &self.dev_fraction),
                ("seed", &self.erase_seed),
            ],
        )
    }
}

impl TrainFlags {
    fn apply(&self, cfg: &mut RunConfig) -> anyhow::Result<()> {
        apply(
            cfg,
            "probe",
            &[
                ("lr", &self.probe_lr),
                ("epochs", &self.probe_epochs),
                ("batch", &self.probe_batch),
                ("l2", &self.probe_l2),
                ("seed", &self.probe_seed),
            ],
        )?;
        apply(
            cfg,
            "task",
            &[
                ("lr", &self.task_lr),
                ("epochs", &self.task_epochs),
                ("batch", &self.task_batch),
                ("l2", &self.task_l2),
                ("seed", &self.task_seed),
            ],
        )
    }
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn base_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::with_seed(cli.seed);
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for o in &cli.overrides {
        cfg.set_dotted(o).map_err(|m| usage(format!("--set {o}: {m}")))?;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_generate(cfg: &RunConfig, args: &GenerateArgs) -> anyhow::Result<()> {
    let planted = generate_planted(&cfg.generate)?;
    save_dataset(&args.out, &planted.set)?;
    let mut manifest = RunManifest::new("generate", serde_json::to_value(&cfg.generate)?);
    manifest.seeds.insert("data".into(), cfg.generate.seed);
    manifest.provenance = Some(planted.set.provenance.clone());
    for f in DATA_FILES {
        manifest.add_artifact(&args.out, f)?;
    }
    manifest.save(&args.out.join(MANIFEST_FILE))?;
    println!(
        "wrote {} rows x {} dims to {} (dataset {})",
        planted.set.n(),
        planted.set.d(),
        args.out.display(),
        dataset_hash(&args.out)?
    );
    Ok(())
}

fn cmd_erase(cfg: &RunConfig, args: &EraseArgs) -> anyhow::Result<()> {
    let set = load_dataset(&args.dataset)?;
    let source_hash = dataset_hash(&args.dataset)?;
    let train = set.indices(Split::Train);
    if train.is_empty() {
        bail!(eraser_lab::Error::InvalidInput("dataset has no train rows to fit on".into()));
    }
    let x_train = set.x.select_rows(&train);
    let c_train = set.concept.subset(&train);
    let method = cfg.erase.method;
    let n_directions = || {
        cfg.erase
            .n_directions
            .ok_or_else(|| usage(format!("--method {method} needs --n")))
    };
    let proto = cfg.protocol();
    let eraser: Eraser = match method {
        Method::Mp => fit_mp(&x_train, &c_train)?,
        Method::Inlp => fit_inlp(&x_train, &c_train, &proto.inlp)?,
        Method::Leace => fit_leace(&x_train, &c_train)?,
        Method::Random => fit_random_projection(set.d(), n_directions()?, cfg.erase.seed)?,
        Method::Dropout => fit_dropout(set.d(), n_directions()?, cfg.erase.seed)?,
        Method::Identity => Eraser::identity(set.d()),
    };
    if method == Method::Inlp && !eraser.converged {
        log::warn!(
            "INLP hit the iteration cap ({}) before probe accuracy fell to the threshold",
            eraser.iterations
        );
    }
    let erased = set.with_embeddings(
        eraser.apply(&set.x)?,
        Provenance::Erased {
            source_hash: source_hash.clone(),
            method: method.to_string(),
            directions_removed: eraser.directions_removed,
        },
    )?;
    save_dataset(&args.out, &erased)?;
    let eraser_file = format!("{method}.eraser");
    eraser.save(&args.out.join(&eraser_file))?;

    let mut manifest = RunManifest::new("erase", serde_json::to_value(&cfg.erase)?);
    manifest.seeds.insert("erase".into(), cfg.erase.seed);
    manifest.provenance = Some(erased.provenance.clone());
    manifest.input_hash = Some(source_hash);
    manifest.add_artifact(&args.out, &eraser_file)?;
    for f in DATA_FILES {
        manifest.add_artifact(&args.out, f)?;
    }
    manifest.save(&args.out.join(MANIFEST_FILE))?;
    println!(
        "{method}: removed {} directions in {} iteration(s){}; wrote {}",
        eraser.directions_removed,
        eraser.iterations,
        if eraser.converged { "" } else { " (not converged)" },
        args.out.display()
    );
    Ok(())
}

fn cmd_probe(cfg: &RunConfig, args: &ProbeArgs) -> anyhow::Result<()> {
    let set = load_dataset(&args.dataset)?;
    let train = set.indices(Split::Train);
    let test = set.indices(Split::Test);
    if train.is_empty() || test.is_empty() {
        bail!(eraser_lab::Error::InvalidInput(
            "dataset needs non-empty train and test splits".into()
        ));
    }
    let probe = train_probe(
        &set.x.select_rows(&train),
        &set.concept.subset(&train),
        &cfg.probe,
    )?;
    let report = evaluate_probe(&probe, &set.x.select_rows(&test), &set.concept.subset(&test))?;
    println!(
        "probe accuracy {:.2}% (majority {:.2}%, {} test rows)",
        100.0 * report.accuracy,
        100.0 * report.majority_fraction,
        report.n_eval
    );
    if let Some(out) = &args.out {
        create_dir(out)?;
        probe.save(&out.join("concept.probe"))?;
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(out.join("probe_report.json"), text)?;
        let mut manifest = RunManifest::new("probe", serde_json::to_value(&cfg.probe)?);
        manifest.seeds.insert("probe".into(), cfg.probe.seed);
        manifest.input_hash = Some(dataset_hash(&args.dataset)?);
        manifest.add_artifact(out, "concept.probe")?;
        manifest.add_artifact(out, "probe_report.json")?;
        manifest.save(&out.join(MANIFEST_FILE))?;
    }
    Ok(())
}

fn cmd_run_protocol(cfg: &RunConfig, args: &ProtocolArgs) -> anyhow::Result<()> {
    let set = load_dataset(&args.dataset)?;
    let hash = dataset_hash(&args.dataset)?;
    let proto = cfg.protocol();
    let outcome = run_protocol(&set, &proto, Some(hash.clone()))?;
    let report = &outcome.report;

    create_dir(&args.out)?;
    fs::write(args.out.join("report.json"), report.to_json()?)?;
    fs::write(args.out.join("report.md"), render_markdown(report))?;
    let eraser_file = format!("{}.eraser", proto.method);
    outcome.eraser.save(&args.out.join(&eraser_file))?;

    let mut manifest = RunManifest::new("run-protocol", serde_json::to_value(cfg)?);
    manifest.seeds = report.seeds.clone();
    manifest.input_hash = Some(hash);
    for f in ["report.json", "report.md", eraser_file.as_str()] {
        manifest.add_artifact(&args.out, f)?;
    }
    manifest.save(&args.out.join(MANIFEST_FILE))?;

    println!(
        "{}: probe {:.2}% -> {:.2}% (majority {:.2}%), task {:.2}% -> {:.2}% (random {:.2}%, dropout {:.2}%), controls {}",
        proto.method,
        100.0 * report.probe_before.accuracy,
        100.0 * report.probe_after.accuracy,
        100.0 * report.probe_after.majority_fraction,
        100.0 * report.vanilla_task_acc,
        100.0 * report.amnesic_task_acc,
        100.0 * report.random_control_acc,
        100.0 * report.dropout_control_acc,
        if report.amnesic_exceeds_controls { "pass" } else { "fail" },
    );
    if !report.converged {
        log::warn!("eraser did not converge in {} iterations", report.iterations);
    }
    let failed = report.failed_invariants();
    if !failed.is_empty() {
        let names: Vec<_> = failed.iter().map(|c| c.name.as_str()).collect();
        return Err(InvariantFailure(format!("invariants failed: {}", names.join(", "))).into());
    }
    Ok(())
}

fn comparison_table(reports: &[(PathBuf, AmnesicReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "| method | dirs | probe after (%) | majority (%) | vanilla (%) | amnesic (%) | rand. (%) | dropout (%) | D_KL amn. | D_KL rand. | gold (%) | converged | controls |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|---|---|");
    for (_, r) in reports {
        let _ = writeln!(
            s,
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.4} | {:.4} | {:.2} | {} | {} |",
            r.method.as_str().to_uppercase(),
            r.directions_removed,
            100.0 * r.probe_after.accuracy,
            100.0 * r.probe_after.majority_fraction,
            100.0 * r.vanilla_task_acc,
            100.0 * r.amnesic_task_acc,
            100.0 * r.random_control_acc,
            100.0 * r.dropout_control_acc,
            r.kl_amnesic,
            r.kl_random,
            100.0 * r.selectivity_acc,
            if r.converged { "yes" } else { "no" },
            if r.amnesic_exceeds_controls { "PASS" } else { "FAIL" },
        );
    }
    s
}

fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let mut reports = Vec::new();
    for p in &args.reports {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let r: AmnesicReport = serde_json::from_str(&text)
            .map_err(eraser_lab::Error::from)
            .with_context(|| format!("parsing {}", p.display()))?;
        reports.push((p.clone(), r));
    }
    let first = &reports[0];
    for (p, r) in &reports[1..] {
        if r.dataset_hash != first.1.dataset_hash {
            bail!(
                "{} was run on dataset {:?} but {} on {:?}; refusing to compare",
                p.display(),
                r.dataset_hash,
                first.0.display(),
                first.1.dataset_hash
            );
        }
    }
    let table = comparison_table(&reports);
    print!("{table}");
    if let Some(out) = &args.out {
        fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Generate(a) => {
            a.gen.apply(&mut cfg)?;
            cmd_generate(&cfg, a)
        }
        Command::Erase(a) => {
            a.erase.apply(&mut cfg)?;
            a.train.apply(&mut cfg)?;
            apply(&mut cfg, "erase", &[("n_directions", &a.n_directions)])?;
            cmd_erase(&cfg, a)
        }
        Command::Probe(a) => {
            a.train.apply(&mut cfg)?;
            cmd_probe(&cfg, a)
        }
        Command::RunProtocol(a) => {
            a.erase.apply(&mut cfg)?;
            a.train.apply(&mut cfg)?;
            apply(
                &mut cfg,
                "report",
                &[("control_seed", &a.control_seed), ("rank_tol", &a.rank_tol)],
            )?;
            if matches!(cfg.erase.method, Method::Random | Method::Dropout) {
                return Err(usage(format!(
                    "{} is a control arm; run-protocol takes mp, inlp, leace or identity",
                    cfg.erase.method
                )));
            }
            cmd_run_protocol(&cfg, a)
        }
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
