//! Command-line front end.
//!
//! Every command prints one JSON document to stdout on success. Failures
//! print `{"error": {"kind": ..., "message": ...}}` to stderr and exit
//! nonzero.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{RepairError, Result};
use crate::finetuner::{fine_tune, FinetuneConfig};
use crate::localizer::{responsibility, select_top, FastScaling, LocalizationMode, ResponsibilityMatrix};
use crate::network::nnet::{read_nnet, write_nnet};
use crate::network::{Activation, LossNorm, Network};
use crate::properties::{load_specs, spec_set_satisfied, PropertySpec};
use crate::pso::SwarmConfig;
use crate::retrainer::{repair_retrain, RetrainConfig, RetrainRunConfig};
use crate::sampler::{collect_counts, derive_seed, geometric_delta_schedule, sample_uniform};
use crate::synthetic::{make_buggy, PlantedBugSpec};

pub const THREADS_ENV: &str = "NNREPAIR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nnrepair", version, about = "Repair property violations in feedforward networks")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-property violation rates by uniform sampling.
    Check(CheckArgs),
    /// Repair a network.
    #[command(subcommand)]
    Repair(RepairCommand),
    /// Write the responsibility matrix as CSV.
    Localize(LocalizeArgs),
    /// Generate a network with a planted bug and its property file.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum RepairCommand {
    /// Relabel negatives from nearby positives and retrain.
    Retrain(RetrainArgs),
    /// Localize responsible neurons and search their weights.
    Finetune(FinetuneArgs),
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Network in NNet format.
    #[arg(long)]
    pub net: PathBuf,
    /// Property file (JSON).
    #[arg(long)]
    pub props: PathBuf,
}

#[derive(Debug, Args)]
pub struct Outputs {
    /// Where to write the repaired network.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the report JSON (also printed to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Samples per property.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    L1,
    L2,
}

#[derive(Debug, Args)]
pub struct RetrainArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub outputs: Outputs,
    /// Weight of the repair loss; defaults to 1 - beta, else 0.5.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the preservation loss; defaults to 1 - alpha.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Positive neighbours averaged per corrected label.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Training samples per violated property.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Fraction of training samples that are negatives.
    #[arg(long, default_value_t = 0.1)]
    pub negative_fraction: f64,
    #[arg(long, default_value_t = 10_000)]
    pub preservation_samples: usize,
    /// Held-out negatives and positives per property.
    #[arg(long, default_value_t = 5_000)]
    pub eval_samples: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    pub norm: NormArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exact,
    Fast,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub outputs: Outputs,
    /// Weight of remaining violations; defaults to 1 - beta, else 0.6.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of broken positives; defaults to 1 - alpha.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Neurons to repair.
    #[arg(long, default_value_t = 10)]
    pub r: usize,
    /// Repair only this layer (1-based; the output layer counts).
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub particles: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.8)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.41)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.41)]
    pub c2: f64,
    /// Repair negatives and positives per violated property.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Held-out negatives and positives per property.
    #[arg(long, default_value_t = 10_000)]
    pub eval_samples: usize,
    #[arg(long, default_value_t = 0.05)]
    pub drawdown_abort: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Fast)]
    pub localization: ModeArg,
    /// Use unnormalized sums for fast localization.
    #[arg(long)]
    pub raw_scores: bool,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Negatives and positives per violated property.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Fast)]
    pub mode: ModeArg,
    /// Use unnormalized sums in fast mode.
    #[arg(long)]
    pub raw_scores: bool,
    /// Neurons listed in the summary.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// CSV destination.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Layer sizes, input first.
    #[arg(long, value_delimiter = ',', default_value = "5,50,50,5")]
    pub topology: Vec<usize>,
    #[arg(long, default_value = "relu")]
    pub activation: String,
    /// Target violation rate.
    #[arg(long, default_value_t = 0.1)]
    pub rate: f64,
    /// Network destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Property destination; defaults to the network path with `.json`.
    #[arg(long)]
    pub props_out: Option<PathBuf>,
}

fn weights(alpha: Option<f64>, beta: Option<f64>, default_alpha: f64) -> (f64, f64) {
    match (alpha, beta) {
        (Some(a), Some(b)) => (a, b),
        (Some(a), None) => (a, 1.0 - a),
        (None, Some(b)) => (1.0 - b, b),
        (None, None) => (default_alpha, 1.0 - default_alpha),
    }
}

/// Read a network; stored normalization is folded in so inputs and outputs
/// are in raw units.
pub fn load_network(path: &Path) -> Result<Network> {
    let net = read_nnet(path)?;
    if net.normalization().is_some() {
        net.fold_normalization()
    } else {
        Ok(net)
    }
}

/// Inverse of [`load_network`].
pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    if net.normalization().is_some() {
        write_nnet(&net.unfold_normalization()?, path)
    } else {
        write_nnet(net, path)
    }
}

fn with_path<T>(r: Result<T>, path: &Path) -> Result<T> {
    r.map_err(|e| match e {
        RepairError::Io(io) => RepairError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn load(inputs: &Inputs) -> Result<(Network, Vec<PropertySpec>)> {
    let net = with_path(load_network(&inputs.net), &inputs.net)?;
    let specs = with_path(load_specs(&inputs.props), &inputs.props)?;
    for s in &specs {
        s.validate_for(&net)?;
    }
    Ok((net, specs))
}

fn check(args: &CheckArgs, seed: u64) -> Result<serde_json::Value> {
    let (net, specs) = load(&args.inputs)?;
    let evidence = specs
        .iter()
        .enumerate()
        .map(|(i, s)| sample_uniform(&s.pre, args.samples, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = evidence.iter().map(|e| e.view()).collect();
    let verdict = spec_set_satisfied(&net, &specs, &views)?;
    Ok(json!({
        "command": "check",
        "seed": seed,
        "samples": args.samples,
        "all_satisfied": verdict.all_satisfied,
        "verdicts": verdict.verdicts,
    }))
}

fn finish_repair(repaired: &Network, report: &crate::report::RepairReport, outputs: &Outputs) -> Result<serde_json::Value> {
    if let Some(p) = &outputs.out {
        save_network(repaired, p)?;
    }
    if let Some(p) = &outputs.report {
        std::fs::write(p, report.to_json()?)?;
    }
    Ok(serde_json::to_value(report)?)
}

fn retrain(args: &RetrainArgs, seed: u64) -> Result<serde_json::Value> {
    let (net, specs) = load(&args.inputs)?;
    let (alpha, beta) = weights(args.alpha, args.beta, 0.5);
    let run = RetrainRunConfig {
        retrain: RetrainConfig {
            alpha,
            beta,
            k: args.k,
            norm: match args.norm {
                NormArg::L1 => LossNorm::L1,
                NormArg::L2 => LossNorm::L2,
            },
            learning_rate: args.lr,
            batch_size: args.batch,
            max_epochs: args.epochs,
            seed,
            ..RetrainConfig::default()
        },
        train_samples: args.samples,
        negative_fraction: args.negative_fraction,
        preservation_samples: args.preservation_samples,
        eval_negatives: args.eval_samples,
        eval_positives: args.eval_samples,
        ..RetrainRunConfig::default()
    };
    let (repaired, report) = repair_retrain(&net, &specs, &run)?;
    finish_repair(&repaired, &report, &args.outputs)
}

fn localization_mode(mode: ModeArg, raw: bool) -> LocalizationMode {
    match mode {
        ModeArg::Exact => LocalizationMode::Exact,
        ModeArg::Fast => LocalizationMode::Fast {
            scaling: if raw { FastScaling::Raw } else { FastScaling::Normalized },
        },
    }
}

fn finetune(args: &FinetuneArgs, seed: u64) -> Result<serde_json::Value> {
    let (net, specs) = load(&args.inputs)?;
    let (alpha, beta) = weights(args.alpha, args.beta, 0.6);
    let cfg = FinetuneConfig {
        r: args.r,
        alpha,
        beta,
        layer_filter: args.layer,
        swarm: SwarmConfig {
            omega: args.omega,
            c1: args.c1,
            c2: args.c2,
            particles: args.particles,
            max_iters: args.iters,
            ..SwarmConfig::default()
        },
        drawdown_abort: args.drawdown_abort,
        localization: localization_mode(args.localization, args.raw_scores),
        repair_negatives: args.samples,
        repair_positives: args.samples,
        eval_negatives: args.eval_samples,
        eval_positives: args.eval_samples,
        seed,
        ..FinetuneConfig::default()
    };
    let (repaired, report) = fine_tune(&net, &specs, &cfg)?;
    finish_repair(&repaired, &report, &args.outputs)
}

fn localize(args: &LocalizeArgs, seed: u64) -> Result<serde_json::Value> {
    let (net, specs) = load(&args.inputs)?;
    let mode = localization_mode(args.mode, args.raw_scores);
    let mut total = ResponsibilityMatrix::zeros_like(&net);
    let mut used = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        let set = collect_counts(
            &net,
            spec,
            args.samples,
            args.samples,
            args.samples.saturating_mul(200).max(100_000),
            &geometric_delta_schedule(&spec.pre, 10),
            None,
            derive_seed(seed, 100 + i as u64),
        )?;
        if set.num_negatives() == 0 {
            continue;
        }
        total.add_assign(&responsibility(&net, set.positives.view(), set.negatives.view(), mode)?)?;
        used.push(spec.id.clone());
    }
    total.write_csv(&args.out)?;
    let top = select_top(&total, args.top.max(1), None)?;
    Ok(json!({
        "command": "localize",
        "seed": seed,
        "mode": mode,
        "negative_specs": used,
        "top": top.neurons.iter().map(|n| json!({
            "layer": n.layer,
            "neuron": n.neuron,
            "score": total.get(*n),
        })).collect::<Vec<_>>(),
        "out": args.out,
    }))
}

fn synth(args: &SynthArgs, seed: u64) -> Result<serde_json::Value> {
    let activation: Activation = args.activation.parse()?;
    let spec = PlantedBugSpec::for_topology(args.topology.clone(), activation, args.rate, seed);
    let bug = make_buggy(&spec)?;
    let props_out = args
        .props_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("json"));
    save_network(&bug.network, &args.out)?;
    std::fs::write(&props_out, serde_json::to_string_pretty(&vec![&bug.property])?)?;
    Ok(json!({
        "command": "synth",
        "seed": seed,
        "topology": args.topology,
        "activation": activation.to_string(),
        "target_rate": bug.target_rate,
        "achieved_rate": bug.achieved_rate,
        "target_met": bug.target_met,
        "bug_region": bug.region,
        "out": args.out,
        "props_out": props_out,
    }))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| RepairError::InvalidConfig(format!("{THREADS_ENV} must be a positive integer")))?;
        if n == 0 {
            return Err(RepairError::InvalidConfig(format!("{THREADS_ENV} must be positive")));
        }
        // a global pool that already exists is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<serde_json::Value> {
    configure_threads()?;
    match &cli.command {
        Command::Check(a) => check(a, cli.seed),
        Command::Repair(RepairCommand::Retrain(a)) => retrain(a, cli.seed),
        Command::Repair(RepairCommand::Finetune(a)) => finetune(a, cli.seed),
        Command::Localize(a) => localize(a, cli.seed),
        Command::Synth(a) => synth(a, cli.seed),
    }
}

fn error_document(kind: &str, message: &str) -> String {
    json!({"error": {"kind": kind, "message": message}}).to_string()
}

/// Parse `args`, run, print, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_document("usage", e.to_string().trim()));
            return 2;
        }
    };
    match execute(&cli) {
        Ok(doc) => {
            let mut out = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&doc).unwrap_or_else(|_| doc.to_string());
            if writeln!(out, "{text}").is_err() {
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("{}", error_document(e.kind(), &e.to_string()));
            1
        }
    }
}
