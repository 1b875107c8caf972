//! Multi-seed experiments described by JSON specs, and the bundled presets.

mod presets;

pub use presets::{preset_names, preset_specs, run_preset, PresetEntry, PresetReport};

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{average_traces, run, AlgorithmConfig, RunSummary, RunTrace};
use crate::error::{Error, Result};
use crate::objectives::{GradientOracle, Problem, ProblemSpec};
use crate::theory::{lemma3_empirical_bound, theorem1_bound, BoundInputs, BoundReport, DecompositionCheck};
use crate::timeline::{simulate_timeline, DelayModel, TimelineSummary};

pub const SPEC_VERSION: u32 = 1;

/// Share of the horizon averaged to measure a long-run floor.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    pub problem: ProblemSpec,
    /// The `seed` field here is replaced by each entry of `seeds`.
    pub algorithm: AlgorithmConfig<f64>,
    #[serde(default)]
    pub delay: DelayModel,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Checks every component and builds the problem.
    pub fn validate(&self) -> Result<Problem<f64>> {
        if self.version != SPEC_VERSION {
            return Err(Error::config(format!("unsupported spec version {} (expected {SPEC_VERSION})", self.version)));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::config(format!("seed {dup} listed twice")));
        }
        self.algorithm.validate()?;
        self.delay.validate()?;
        let problem = self.problem.build::<f64>()?;
        if let Some(init) = &self.algorithm.init {
            if init.len() != problem.dim() {
                return Err(Error::DimensionMismatch { context: "initial point", expected: problem.dim(), found: init.len() });
            }
        }
        Ok(problem)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: RunSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub spec: ExperimentSpec,
    /// Absent when `ζ ≥ 1`, where no bound applies.
    pub bound: Option<BoundReport<f64>>,
    pub zeta: f64,
    pub f_inf: f64,
    /// Seed-averaged mean of `‖∇F(x̄)‖²` over the final part of the horizon.
    pub long_run_floor: Option<f64>,
    /// Seed-averaged `F(x̄) − F_inf` over the same window.
    pub long_run_loss: Option<f64>,
    pub mean_grad_norm_sq: Option<f64>,
    pub decomposition: Option<DecompositionCheck>,
    pub timeline: TimelineSummary,
    pub diverged_seeds: Vec<u64>,
    pub runs: Vec<SeedResult>,
}

impl ExperimentSummary {
    pub fn all_diverged(&self) -> bool {
        self.diverged_seeds.len() == self.runs.len()
    }

    /// 0 on success, 3 when every seed diverged.
    pub fn exit_code(&self) -> i32 {
        if self.all_diverged() {
            3
        } else {
            0
        }
    }
}

pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub traces: Vec<RunTrace>,
    pub mean: Option<RunTrace>,
}

/// Bound inputs for running `config` on `oracle` from its configured start.
pub fn bound_inputs<O: GradientOracle<f64> + ?Sized>(config: &AlgorithmConfig<f64>, oracle: &O) -> BoundInputs<f64> {
    let zero = vec![0.0; oracle.dim()];
    let start = config.init.as_deref().unwrap_or(&zero);
    BoundInputs {
        f1_minus_finf: (oracle.value(start) - oracle.f_inf()).max(0.0),
        lipschitz: oracle.lipschitz(),
        sigma_sq: oracle.sigma_sq(),
        beta: oracle.beta(),
        workers: config.workers,
        aux: config.aux,
        tau: config.tau,
        zeta: config.mixing.zeta(),
        eta: config.eta,
        iterations: config.iterations,
    }
}

/// Runs every seed, without touching the filesystem.
pub fn execute(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let problem = spec.validate()?;
    let alg = &spec.algorithm;
    let traces: Vec<RunTrace> = spec
        .seeds
        .par_iter()
        .map(|&seed| -> Result<RunTrace> {
            let cfg = alg.clone().with_seed(seed);
            let mut trace = run(&cfg, &problem)?;
            let timeline = simulate_timeline(alg.iterations, alg.tau, &alg.mixing, alg.workers, &spec.delay, seed)?;
            trace.attach_wall_clock(&timeline.cumulative)?;
            Ok(trace)
        })
        .collect::<Result<_>>()?;

    let runs: Vec<SeedResult> = spec
        .seeds
        .iter()
        .zip(&traces)
        .map(|(&seed, t)| {
            let echo = serde_json::to_value(alg.clone().with_seed(seed)).expect("config serializes");
            SeedResult { seed, summary: t.summary(echo) }
        })
        .collect();
    let diverged_seeds = runs.iter().filter(|r| r.summary.diverged).map(|r| r.seed).collect();
    let mean = average_traces(&traces);
    let f_inf = problem.f_inf();
    let inputs = bound_inputs(alg, &problem);
    let bound = theorem1_bound(&inputs).ok();
    let decomposition = match &mean {
        Some(m) if bound.is_some() => Some(lemma3_empirical_bound(m, &inputs)?),
        _ => None,
    };
    let timeline = simulate_timeline(alg.iterations, alg.tau, &alg.mixing, alg.workers, &spec.delay, spec.seeds[0])?;

    let summary = ExperimentSummary {
        spec: spec.clone(),
        bound,
        zeta: alg.mixing.zeta(),
        f_inf,
        long_run_floor: mean.as_ref().map(|m| m.tail_mean_grad_norm_sq(TAIL_FRACTION)),
        long_run_loss: mean.as_ref().map(|m| m.tail_mean_loss(TAIL_FRACTION) - f_inf),
        mean_grad_norm_sq: mean.as_ref().map(RunTrace::mean_grad_norm_sq),
        decomposition,
        timeline: timeline.summary(),
        diverged_seeds,
        runs,
    };
    Ok(ExperimentOutcome { summary, traces, mean })
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs the spec and writes `seed-<s>.csv`, `mean.csv`, `spec.json` and `summary.json`
/// into its output directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let outcome = execute(spec)?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir)?;
    for (seed, trace) in spec.seeds.iter().zip(&outcome.traces) {
        trace.write_csv(fs::File::create(dir.join(format!("seed-{seed}.csv")))?)?;
    }
    if let Some(mean) = &outcome.mean {
        mean.write_csv(fs::File::create(dir.join("mean.csv"))?)?;
    }
    fs::write(dir.join("spec.json"), spec.to_json())?;
    let summary = serde_json::to_string_pretty(&outcome.summary)?;
    write_atomic(&dir.join("summary.json"), summary.as_bytes())?;
    Ok(outcome)
}
