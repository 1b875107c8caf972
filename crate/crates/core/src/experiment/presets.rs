use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_experiment, ExperimentSpec, SPEC_VERSION};
use crate::engine::AlgorithmConfig;
use crate::error::{Error, Result};
use crate::mixing::{make_complete_with_gap, make_easgd, make_fully_connected, make_ring, MixingMatrix};
use crate::objectives::{ProblemSpec, QuadraticProblem};
use crate::timeline::{ComputeTime, DelayModel};

const NAMES: [&str; 3] = ["floor-sweep", "easgd-alpha-sweep", "hybrid-compare"];

pub fn preset_names() -> &'static [&'static str] {
    &NAMES
}

fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}

/// Ten-dimensional quadratic, spectrum in `[0.1, 1]`, with both additive and
/// gradient-proportional noise.
fn noisy_quadratic() -> Result<ProblemSpec> {
    let q = QuadraticProblem::<f64>::synthetic(10, 0.1, 1.0, 1, 1.0)?.with_beta(9.0)?;
    Ok(ProblemSpec::from_quadratic(&q))
}

fn spec(
    problem: &ProblemSpec,
    algorithm: AlgorithmConfig<f64>,
    delay: DelayModel,
    seeds: &[u64],
    dir: &Path,
) -> ExperimentSpec {
    ExperimentSpec {
        version: SPEC_VERSION,
        problem: problem.clone(),
        algorithm,
        delay,
        seeds: seeds.to_vec(),
        output_dir: dir.to_path_buf(),
    }
}

fn algorithm(tau: usize, w: MixingMatrix<f64>, aux: usize, eta: f64, iterations: usize) -> Result<AlgorithmConfig<f64>> {
    AlgorithmConfig::new(tau, w, aux, eta, iterations, 0)
}

/// The experiments making up a preset, labelled, with outputs under `out`.
pub fn preset_specs(name: &str, out: &Path, seeds: Option<&[u64]>) -> Result<Vec<(String, ExperimentSpec)>> {
    let seeds = seeds.map_or_else(default_seeds, <[u64]>::to_vec);
    let problem = noisy_quadratic()?;
    let delay = DelayModel::constant(1.0, 0.5, 0.25);
    let mut specs = Vec::new();
    match name {
        "floor-sweep" => {
            for (zi, zeta) in [0.0, 1.0 / 3.0, 0.8].into_iter().enumerate() {
                for tau in [1, 2, 8, 32] {
                    let label = format!("zeta{zi}-tau{tau}");
                    let w = make_complete_with_gap(4, zeta)?;
                    let alg = algorithm(tau, w, 0, 0.1, 20_000)?;
                    specs.push((label.clone(), spec(&problem, alg, delay, &seeds, &out.join(label))));
                }
            }
        }
        "easgd-alpha-sweep" => {
            for alpha in [0.05, 0.1125, 0.2, 0.23] {
                let label = format!("alpha-{alpha}");
                let alg = algorithm(1, make_easgd(8, alpha)?, 1, 0.1, 20_000)?;
                let delay = delay.with_nonblocking_aux(true);
                specs.push((label.clone(), spec(&problem, alg, delay, &seeds, &out.join(label))));
            }
        }
        "hybrid-compare" => {
            let delay = DelayModel {
                compute: ComputeTime::ShiftedExp { c: 1.0, mean: 0.2 },
                comm_latency: 0.5,
                comm_per_neighbor: 0.25,
                nonblocking_aux: false,
            };
            let runs = [
                ("dpsgd", algorithm(1, make_ring(7)?, 0, 0.1, 15_000)?),
                ("pasgd-50", algorithm(50, make_fully_connected(7)?, 0, 0.1, 15_000)?),
                ("hybrid-15", algorithm(15, make_ring(7)?, 0, 0.1, 15_000)?),
            ];
            for (label, alg) in runs {
                specs.push((label.to_string(), spec(&problem, alg, delay, &seeds, &out.join(label))));
            }
        }
        other => {
            return Err(Error::config(format!("unknown preset `{other}` (available: {})", NAMES.join(", "))));
        }
    }
    Ok(specs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetEntry {
    pub label: String,
    pub tau: usize,
    pub zeta: f64,
    pub long_run_floor: Option<f64>,
    pub long_run_loss: Option<f64>,
    pub bound_floor: Option<f64>,
    pub total_time_s: f64,
    pub diverged_seeds: Vec<u64>,
    pub all_diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub preset: String,
    pub entries: Vec<PresetEntry>,
}

impl PresetReport {
    pub fn entry(&self, label: &str) -> Option<&PresetEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

/// Runs every experiment of a preset and writes `preset.json` next to them.
pub fn run_preset(name: &str, out: &Path, seeds: Option<&[u64]>) -> Result<PresetReport> {
    let specs = preset_specs(name, out, seeds)?;
    let mut entries = Vec::with_capacity(specs.len());
    for (label, spec) in &specs {
        let s = run_experiment(spec)?.summary;
        entries.push(PresetEntry {
            label: label.clone(),
            tau: spec.algorithm.tau,
            zeta: s.zeta,
            long_run_floor: s.long_run_floor,
            long_run_loss: s.long_run_loss,
            bound_floor: s.bound.map(|b| b.floor),
            total_time_s: s.timeline.total_time_s,
            all_diverged: s.all_diverged(),
            diverged_seeds: s.diverged_seeds,
        });
    }
    let report = PresetReport { preset: name.to_string(), entries };
    fs::create_dir_all(out)?;
    fs::write(out.join("preset.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_shapes() {
        let out = Path::new("presets");
        assert_eq!(preset_specs("floor-sweep", out, None).unwrap().len(), 12);
        assert_eq!(preset_specs("easgd-alpha-sweep", out, Some(&[1, 2])).unwrap()[0].1.seeds, vec![1, 2]);
        assert_eq!(preset_specs("hybrid-compare", out, None).unwrap().len(), 3);
        assert!(preset_specs("nope", out, None).is_err());
        for name in preset_names() {
            for (_, s) in preset_specs(name, out, None).unwrap() {
                s.validate().unwrap();
            }
        }
    }
}
