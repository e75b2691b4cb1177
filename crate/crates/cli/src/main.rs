//! `rdp` — analyze, calibrate, release, verify and sweep randomized-scale
//! Laplace mechanisms.
//!
//! Exit codes: 0 success, 2 input error, 3 infeasible calibration,
//! 4 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rdp_core::mechanism::{Dataset, Query, QueryJob};
use rdp_core::optimizer::{FamilyKind, Metric, OptimizationProblem, OptimizerError};
use rdp_core::{DistributionSpec, MechanismError};

mod sweep;

#[derive(Parser)]
#[command(name = "rdp", version, about = "Laplace mechanisms with a randomized scale")]
struct Cli {
    /// TOML or JSON file with default option values (flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Privacy and utility reports for a distribution spec.
    Analyze(AnalyzeArgs),
    /// Calibrate distribution parameters against an ε target.
    Optimize(OptimizeArgs),
    /// Answer a CSV query with calibrated noise.
    Run(RunArgs),
    /// Certify the analytic formulas with Monte Carlo and grid oracles.
    Verify(VerifyArgs),
    /// Baseline-vs-optimized usefulness over an ε grid (CSV).
    Sweep(SweepArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Distribution spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Query sensitivity Δq.
    #[arg(long)]
    sensitivity: Option<f64>,
    /// Usefulness error bound γ.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Privacy budget ε the calibrated mechanism must meet exactly.
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    sensitivity: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// usefulness | l1 | l2 | entropy
    #[arg(long)]
    metric: Option<String>,
    /// Comma list of degenerate, bernoulli, gamma, uniform, trunc_gauss,
    /// combined (the 3-family linear combination).
    #[arg(long)]
    families: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, env = "RDP_SEED")]
    seed: Option<u64>,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// CSV dataset with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Column to query.
    #[arg(long)]
    column: String,
    /// count | sum | mean
    #[arg(long)]
    query: String,
    /// Clip range LO,HI (required for sum and mean).
    #[arg(long)]
    clip: Option<String>,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long, env = "RDP_SEED")]
    seed: Option<u64>,
    /// Skip calibration and use this spec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Verify one spec JSON file.
    #[arg(long, conflicts_with = "corpus")]
    spec: Option<PathBuf>,
    /// Verify the built-in regression corpus.
    #[arg(long)]
    corpus: bool,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sensitivity: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, env = "RDP_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    eps_min: f64,
    #[arg(long)]
    eps_max: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    sensitivity: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    families: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, env = "RDP_SEED")]
    seed: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Defaults loadable from --config (TOML or JSON by extension).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    sensitivity: Option<f64>,
    gamma: Option<f64>,
    metric: Option<String>,
    families: Option<String>,
    restarts: Option<usize>,
    seed: Option<u64>,
    samples: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Infeasible(String),
    VerificationFailed,
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl From<MechanismError> for CliError {
    fn from(e: MechanismError) -> Self {
        match e {
            MechanismError::Optimizer(OptimizerError::Infeasible { .. }) => {
                CliError::Infeasible(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("rdp: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args, &config),
        Command::Optimize(args) => cmd_optimize(args, &config),
        Command::Run(args) => cmd_run(args, &config),
        Command::Verify(args) => cmd_verify(args, &config),
        Command::Sweep(args) => sweep::cmd_sweep(args, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("rdp: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Infeasible(msg)) => {
            eprintln!("rdp: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::VerificationFailed) => {
            eprintln!("rdp: verification failed");
            ExitCode::from(4)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, String> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))
    } else {
        toml::from_str(&text).map_err(|e| format!("invalid config: {e}"))
    }
}

fn load_spec(path: &Path) -> Result<DistributionSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read spec {}: {e}", path.display())))?;
    DistributionSpec::from_json(&text).map_err(|e| CliError::input(e.to_string()))
}

fn parse_metric(flag: Option<&String>, config: &Config) -> Result<Metric, CliError> {
    let name = flag
        .cloned()
        .or_else(|| config.metric.clone())
        .unwrap_or_else(|| "usefulness".to_string());
    Metric::parse(&name)
        .ok_or_else(|| CliError::input(format!("unknown metric {name:?} (usefulness|l1|l2|entropy)")))
}

/// Family list plus whether the 3-family combined search is requested.
fn parse_families(
    flag: Option<&String>,
    config: &Config,
    default: &str,
) -> Result<(Vec<FamilyKind>, bool), CliError> {
    let list = flag
        .cloned()
        .or_else(|| config.families.clone())
        .unwrap_or_else(|| default.to_string());
    let mut kinds = Vec::new();
    let mut combined = false;
    for raw in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if raw == "combined" {
            combined = true;
        } else {
            let kind = FamilyKind::parse(raw)
                .ok_or_else(|| CliError::input(format!("unknown family {raw:?}")))?;
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
        }
    }
    if kinds.is_empty() && !combined {
        return Err(CliError::input("no family selected"));
    }
    Ok((kinds, combined))
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs, config: &Config) -> Result<(), CliError> {
    let spec = load_spec(&args.spec)?;
    let delta_q = args.sensitivity.or(config.sensitivity).unwrap_or(1.0);
    let gamma = args.gamma.or(config.gamma).unwrap_or(1.0);
    if delta_q <= 0.0 || gamma <= 0.0 {
        return Err(CliError::input("sensitivity and gamma must be positive"));
    }
    let report = serde_json::json!({
        "privacy": rdp_core::analyze(&spec, delta_q),
        "utility": rdp_core::utility_report(&spec, gamma),
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_problem(
    epsilon: f64,
    sensitivity: Option<f64>,
    gamma: Option<f64>,
    metric: Option<&String>,
    families: Option<&String>,
    restarts: Option<usize>,
    seed: Option<u64>,
    config: &Config,
    default_families: &str,
) -> Result<OptimizationProblem, CliError> {
    let delta_q = sensitivity.or(config.sensitivity).unwrap_or(1.0);
    let gamma = gamma.or(config.gamma).unwrap_or(1.0);
    if epsilon <= 0.0 || delta_q <= 0.0 || gamma <= 0.0 {
        return Err(CliError::input("epsilon, sensitivity and gamma must be positive"));
    }
    let metric = parse_metric(metric, config)?;
    let (kinds, combined) = parse_families(families, config, default_families)?;
    Ok(OptimizationProblem {
        metric,
        families: kinds,
        combined,
        restarts: restarts.or(config.restarts).unwrap_or(64),
        seed: seed.or(config.seed).unwrap_or(0),
        ..OptimizationProblem::new(epsilon, delta_q, gamma)
    })
}

fn cmd_optimize(args: OptimizeArgs, config: &Config) -> Result<(), CliError> {
    let problem = build_problem(
        args.epsilon,
        args.sensitivity,
        args.gamma,
        args.metric.as_ref(),
        args.families.as_ref(),
        args.restarts,
        args.seed,
        config,
        "combined",
    )?;
    let result = rdp_core::optimize(&problem).map_err(|e| match e {
        OptimizerError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
        OptimizerError::InvalidProblem(msg) => CliError::Input(msg),
    })?;
    write_output(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&result).expect("result serializes"),
    )
}

fn cmd_run(args: RunArgs, config: &Config) -> Result<(), CliError> {
    let dataset = Dataset::from_csv_path(&args.data, &args.column)?;
    let query = parse_query(&args.query, args.clip.as_deref())?;
    let spec_override = args.spec.as_deref().map(load_spec).transpose()?;
    let job = QueryJob {
        dataset,
        query,
        eps_target: args.epsilon,
        gamma: args.gamma.or(config.gamma).unwrap_or(1.0),
        metric: parse_metric(args.metric.as_ref(), config)?,
        seed: args.seed.or(config.seed).unwrap_or(0),
        spec_override,
        restarts: args.restarts.or(config.restarts).unwrap_or(64),
    };
    if job.eps_target <= 0.0 || job.gamma <= 0.0 {
        return Err(CliError::input("epsilon and gamma must be positive"));
    }
    let record = rdp_core::release(&job)?;
    write_output(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&record).expect("record serializes"),
    )
}

fn parse_query(kind: &str, clip: Option<&str>) -> Result<Query, CliError> {
    let clip_range = || -> Result<(f64, f64), CliError> {
        let raw = clip.ok_or_else(|| CliError::input("--clip LO,HI is required for sum/mean"))?;
        let (lo, hi) = raw
            .split_once(',')
            .ok_or_else(|| CliError::input("--clip expects LO,HI"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| CliError::input("--clip LO is not numeric"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| CliError::input("--clip HI is not numeric"))?;
        Ok((lo, hi))
    };
    match kind {
        "count" => Ok(Query::Count),
        "sum" => {
            let (clip_lo, clip_hi) = clip_range()?;
            Ok(Query::Sum { clip_lo, clip_hi })
        }
        "mean" => {
            let (clip_lo, clip_hi) = clip_range()?;
            Ok(Query::Mean { clip_lo, clip_hi })
        }
        other => Err(CliError::input(format!(
            "unknown query {other:?} (count|sum|mean)"
        ))),
    }
}

fn cmd_verify(args: VerifyArgs, config: &Config) -> Result<(), CliError> {
    let samples = args.samples.or(config.samples).unwrap_or(1_000_000);
    let delta_q = args.sensitivity.or(config.sensitivity).unwrap_or(1.0);
    let gamma = args.gamma.or(config.gamma).unwrap_or(1.0);
    let seed = args.seed.or(config.seed).unwrap_or(0);
    if delta_q <= 0.0 || gamma <= 0.0 {
        return Err(CliError::input("sensitivity and gamma must be positive"));
    }

    let targets: Vec<(String, DistributionSpec)> = if args.corpus {
        rdp_core::corpus()
    } else if let Some(path) = &args.spec {
        vec![(path.display().to_string(), load_spec(path)?)]
    } else {
        return Err(CliError::input("pass --spec FILE or --corpus"));
    };

    let mut reports = Vec::new();
    let mut failed = false;
    for (name, spec) in &targets {
        let report = rdp_core::verify_spec(name, spec, delta_q, gamma, samples, seed);
        if report.sampled.low_confidence {
            eprintln!(
                "rdp: warning: {name}: low-confidence empirical privacy estimate \
                 (window bins under 100 counts at n={samples})"
            );
        }
        eprintln!(
            "rdp: {} {name}: eps={:.6} density_sup={:.6} empirical={:.4}",
            if report.all_pass { "PASS" } else { "FAIL" },
            report.eps_analytic,
            report.privacy.eps_density_sup,
            report.sampled.eps_empirical,
        );
        failed |= !report.all_pass;
        reports.push(report);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&reports).expect("reports serialize")
    );
    if failed {
        Err(CliError::VerificationFailed)
    } else {
        Ok(())
    }
}
