use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use coopsgd::experiment::{preset_names, run_experiment, run_preset, ExperimentSpec};
use coopsgd::mixing::best_easgd_alpha;
use coopsgd::objectives::GradientOracle;
use coopsgd::theory::{corollary1_bound, theorem1_bound, zeta_threshold, BoundInputs};
use serde_json::json;

const EXIT_INVALID: u8 = 2;
const EXIT_ALL_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "coopsgd", version, about = "Simulate and analyse cooperative SGD variants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON spec.
    Run { spec: PathBuf },
    /// Run one of the bundled experiment presets.
    Preset {
        name: String,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds; defaults to 0..20.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Evaluate learning-rate conditions and error bounds.
    Bounds(BoundsArgs),
    /// Check a spec without running it.
    Validate { spec: PathBuf },
}

#[derive(Args)]
struct BoundsArgs {
    /// F(x₁) − F_inf
    #[arg(long, default_value_t = 1.0)]
    f1: f64,
    #[arg(long = "lipschitz", default_value_t = 1.0)]
    lipschitz: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_sq: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Number of workers.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Number of auxiliary variables.
    #[arg(long, default_value_t = 0)]
    v: usize,
    /// Communication period; also reports the decentralized threshold for it.
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    zeta: f64,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    /// Iteration horizon.
    #[arg(long, default_value_t = 10_000)]
    k: usize,
    /// Also report the elastic-averaging α minimizing ζ for `m` workers.
    #[arg(long)]
    best_easgd_alpha: bool,
}

enum Failure {
    Invalid(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load(path: &Path) -> Result<ExperimentSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Invalid)?;
    let spec = ExperimentSpec::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Invalid)?;
    spec.validate().with_context(|| format!("validating {}", path.display())).map_err(Failure::Invalid)?;
    Ok(spec)
}

fn cmd_run(path: &Path) -> Result<u8, Failure> {
    let spec = load(path)?;
    let outcome = run_experiment(&spec).map_err(anyhow::Error::from)?;
    let s = &outcome.summary;
    println!("{}", serde_json::to_string_pretty(&json!({
        "output_dir": spec.output_dir,
        "long_run_floor": s.long_run_floor,
        "mean_grad_norm_sq": s.mean_grad_norm_sq,
        "bound": s.bound,
        "diverged_seeds": s.diverged_seeds,
        "timeline": s.timeline,
    })).expect("json"));
    Ok(s.exit_code() as u8)
}

fn cmd_preset(name: &str, out: &Path, seeds: Option<&[u64]>) -> Result<u8, Failure> {
    if !preset_names().contains(&name) {
        return Err(Failure::Invalid(anyhow::anyhow!(
            "unknown preset `{name}` (available: {})",
            preset_names().join(", ")
        )));
    }
    if seeds.is_some_and(<[u64]>::is_empty) {
        return Err(Failure::Invalid(anyhow::anyhow!("--seeds must list at least one seed")));
    }
    let report = run_preset(name, out, seeds).map_err(|e| match e {
        coopsgd::Error::Io(_) => Failure::Other(e.into()),
        other => Failure::Invalid(other.into()),
    })?;
    println!("{:<14} {:>5} {:>8} {:>14} {:>14} {:>12}  diverged", "label", "tau", "zeta", "floor", "loss", "time_s");
    for e in &report.entries {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        println!(
            "{:<14} {:>5} {:>8.4} {:>14} {:>14} {:>12.1}  {}/{}",
            e.label,
            e.tau,
            e.zeta,
            opt(e.long_run_floor),
            opt(e.long_run_loss),
            e.total_time_s,
            e.diverged_seeds.len(),
            seeds.map_or(20, <[u64]>::len),
        );
    }
    if report.entries.iter().all(|e| e.all_diverged) {
        return Ok(EXIT_ALL_DIVERGED);
    }
    Ok(0)
}

fn cmd_bounds(a: &BoundsArgs) -> Result<u8, Failure> {
    let invalid = |e: coopsgd::Error| Failure::Invalid(e.into());
    let inputs = BoundInputs {
        f1_minus_finf: a.f1,
        lipschitz: a.lipschitz,
        sigma_sq: a.sigma_sq,
        beta: a.beta,
        workers: a.m,
        aux: a.v,
        tau: a.tau.unwrap_or(1),
        zeta: a.zeta,
        eta: a.eta,
        iterations: a.k,
    };
    let report = theorem1_bound(&inputs).map_err(invalid)?;
    let horizon = corollary1_bound(a.f1, a.lipschitz, a.sigma_sq, a.m, a.v, inputs.tau, a.zeta, a.k).map_err(invalid)?;
    let mut out = serde_json::to_value(report).expect("json");
    let obj = out.as_object_mut().expect("object");
    obj.insert("eta_tilde".into(), json!(inputs.eta_tilde()));
    obj.insert("horizon".into(), json!(horizon));
    if let Some(tau) = a.tau {
        obj.insert("zeta_threshold".into(), json!(zeta_threshold::<f64>(tau)));
    }
    if a.best_easgd_alpha {
        let (alpha, zeta) = best_easgd_alpha::<f64>(a.m);
        obj.insert("best_easgd".into(), json!({ "alpha": alpha, "zeta": zeta }));
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(0)
}

fn cmd_validate(path: &Path) -> Result<u8, Failure> {
    let spec = load(path)?;
    let problem = spec.validate().map_err(|e| Failure::Invalid(e.into()))?;
    let alg = &spec.algorithm;
    println!("{}", serde_json::to_string_pretty(&json!({
        "valid": true,
        "dim": problem.dim(),
        "lipschitz": problem.lipschitz(),
        "f_inf": problem.f_inf(),
        "workers": alg.workers,
        "aux": alg.aux,
        "tau": alg.tau,
        "zeta": alg.mixing.zeta(),
        "seeds": spec.seeds.len(),
    })).expect("json"));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { spec } => cmd_run(spec),
        Command::Preset { name, out, seeds } => cmd_preset(name, out, seeds.as_deref()),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Validate { spec } => cmd_validate(spec),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
