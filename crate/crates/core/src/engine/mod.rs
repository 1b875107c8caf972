//! The cooperative SGD update, its averaged model, and the run loop.

mod reference;
mod trace;

pub use reference::{reference_dpsgd_step, reference_easgd_step, reference_fullsync_step, reference_pasgd_step};
pub use trace::{average_traces, RunSummary, RunTrace, TraceRecord, CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::{MixingMatrix, MixingSchedule};
use crate::objectives::GradientOracle;
use crate::rng::{worker_stream, StreamRng};
use crate::scalar::Scalar;

/// Parameters whose magnitude exceeds this are treated as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e100;

/// `d × (m+v)` parameter matrix stored column by column.
///
/// Columns `0..m` are worker models, the remaining `v` are auxiliary variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamMatrix<T> {
    dim: usize,
    workers: usize,
    aux: usize,
    data: Vec<T>,
}

impl<T: Scalar> ParamMatrix<T> {
    pub fn zeros(dim: usize, workers: usize, aux: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("parameter dimension must be positive".into()));
        }
        if workers == 0 {
            return Err(Error::InvalidDimension("at least one worker is required".into()));
        }
        Ok(Self { dim, workers, aux, data: vec![T::zero(); dim * (workers + aux)] })
    }

    /// Every column set to `init`.
    pub fn replicated(init: &[T], workers: usize, aux: usize) -> Result<Self> {
        let mut x = Self::zeros(init.len(), workers, aux)?;
        for col in x.data.chunks_exact_mut(init.len()) {
            col.copy_from_slice(init);
        }
        Ok(x)
    }

    pub fn from_columns(columns: &[Vec<T>], workers: usize) -> Result<Self> {
        if workers == 0 || columns.len() < workers {
            return Err(Error::InvalidDimension(format!(
                "{} columns cannot hold {workers} workers",
                columns.len()
            )));
        }
        let dim = columns[0].len();
        let mut x = Self::zeros(dim, workers, columns.len() - workers)?;
        for (j, c) in columns.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::DimensionMismatch { context: "parameter column", expected: dim, found: c.len() });
            }
            x.column_mut(j).copy_from_slice(c);
        }
        Ok(x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn aux(&self) -> usize {
        self.aux
    }

    /// Total column count `m + v`.
    pub fn nodes(&self) -> usize {
        self.workers + self.aux
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_columns(&self) -> Vec<Vec<T>> {
        self.columns().map(<[T]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { context, expected: self.dim, found: other.dim });
        }
        if self.workers != other.workers || self.aux != other.aux {
            return Err(Error::DimensionMismatch { context, expected: self.nodes(), found: other.nodes() });
        }
        Ok(())
    }
}

/// Where the mixing matrix is applied relative to the gradient step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// `X' = (X − ηG) W`
    #[default]
    PostMultiply,
    /// `X' = X W − ηG`
    PreMultiply,
}

/// One step of the cooperative update.
pub fn coop_step<T: Scalar>(
    x: &ParamMatrix<T>,
    w: &MixingMatrix<T>,
    eta: T,
    g: &ParamMatrix<T>,
    rule: UpdateRule,
) -> Result<ParamMatrix<T>> {
    let mut out = x.clone();
    let mut scratch = x.clone();
    coop_step_into(x, w, eta, g, rule, &mut scratch, &mut out)?;
    Ok(out)
}

fn check_step_shapes<T: Scalar>(x: &ParamMatrix<T>, w: &MixingMatrix<T>, g: &ParamMatrix<T>) -> Result<()> {
    x.same_shape(g, "gradient matrix")?;
    if w.n() != x.nodes() {
        return Err(Error::DimensionMismatch { context: "mixing matrix", expected: x.nodes(), found: w.n() });
    }
    if (x.workers..x.nodes()).any(|j| g.column(j).iter().any(|v| !v.is_zero())) {
        return Err(Error::config("auxiliary gradient columns must be zero"));
    }
    Ok(())
}

// out[:, j] = Σ_i y[:, i] w_ij
fn mix_into<T: Scalar>(y: &ParamMatrix<T>, w: &MixingMatrix<T>, out: &mut ParamMatrix<T>) {
    let n = y.nodes();
    let w = w.entries();
    for j in 0..n {
        let col = out.column_mut(j);
        col.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..n {
            let wij = w[(i, j)];
            if wij.is_zero() {
                continue;
            }
            for (o, &yi) in col.iter_mut().zip(y.column(i)) {
                *o += wij * yi;
            }
        }
    }
}

fn coop_step_into<T: Scalar>(
    x: &ParamMatrix<T>,
    w: &MixingMatrix<T>,
    eta: T,
    g: &ParamMatrix<T>,
    rule: UpdateRule,
    scratch: &mut ParamMatrix<T>,
    out: &mut ParamMatrix<T>,
) -> Result<()> {
    check_step_shapes(x, w, g)?;
    match rule {
        UpdateRule::PostMultiply => {
            for ((s, &xv), &gv) in scratch.data.iter_mut().zip(&x.data).zip(&g.data) {
                *s = xv - eta * gv;
            }
            if w.is_identity() {
                out.data.copy_from_slice(&scratch.data);
            } else {
                mix_into(scratch, w, out);
            }
        }
        UpdateRule::PreMultiply => {
            if w.is_identity() {
                out.data.copy_from_slice(&x.data);
            } else {
                mix_into(x, w, out);
            }
            for (o, &gv) in out.data.iter_mut().zip(&g.data) {
                *o -= eta * gv;
            }
        }
    }
    Ok(())
}

/// Mean over all `m + v` columns.
pub fn averaged_model<T: Scalar>(x: &ParamMatrix<T>) -> Vec<T> {
    let mut mean = vec![T::zero(); x.dim];
    for col in x.columns() {
        for (m, &v) in mean.iter_mut().zip(col) {
            *m += v;
        }
    }
    let n = T::from_usize_lossy(x.nodes());
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// `η̃ = mη/(m+v)`.
pub fn effective_lr<T: Scalar>(eta: T, workers: usize, aux: usize) -> T {
    eta * T::from_usize_lossy(workers) / T::from_usize_lossy(workers + aux)
}

/// `‖X(I − J)‖²_F`: squared distance of every column to the column mean.
pub fn network_error<T: Scalar>(x: &ParamMatrix<T>) -> T {
    let mean = averaged_model(x);
    x.columns()
        .map(|col| col.iter().zip(&mean).map(|(&v, &m)| (v - m) * (v - m)).sum::<T>())
        .sum()
}

/// Everything needed to run `A(τ, W, v)` on an oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct AlgorithmConfig<T> {
    pub tau: usize,
    pub mixing: MixingMatrix<T>,
    pub workers: usize,
    #[serde(default)]
    pub aux: usize,
    pub eta: T,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub rule: UpdateRule,
    /// Common starting point; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Vec<T>>,
}

impl<T: Scalar> AlgorithmConfig<T> {
    pub fn new(tau: usize, mixing: MixingMatrix<T>, aux: usize, eta: T, iterations: usize, seed: u64) -> Result<Self> {
        let workers = mixing.n().checked_sub(aux).unwrap_or(0);
        let cfg = Self { tau, mixing, workers, aux, eta, iterations, seed, rule: UpdateRule::PostMultiply, init: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rule(mut self, rule: UpdateRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_init(mut self, init: Vec<T>) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn effective_lr(&self) -> T {
        effective_lr(self.eta, self.workers, self.aux)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0 {
            return Err(Error::config("tau must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("at least one worker is required"));
        }
        if self.mixing.n() != self.workers + self.aux {
            return Err(Error::config(format!(
                "mixing matrix has {} nodes but workers + aux = {}",
                self.mixing.n(),
                self.workers + self.aux
            )));
        }
        if !(self.eta.is_finite() && self.eta > T::zero()) {
            return Err(Error::config("eta must be positive and finite"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if self.iterations % self.tau != 0 {
            let lo = self.iterations / self.tau * self.tau;
            let hi = lo + self.tau;
            let near = if lo > 0 && self.iterations - lo <= hi - self.iterations { lo } else { hi };
            return Err(Error::config(format!(
                "iterations ({}) must be a multiple of tau ({}); nearest valid value is {near}",
                self.iterations, self.tau
            )));
        }
        if let Some(init) = &self.init {
            if init.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("initial point"));
            }
        }
        Ok(())
    }
}

/// Step-by-step executor of a configured run.
///
/// Step `k` (counting from 1) draws worker `i`'s gradient from its own stream and
/// mixes with `W` when `k` is a multiple of `τ`.
pub struct Simulation<'a, T: Scalar, O: GradientOracle<T> + ?Sized> {
    config: &'a AlgorithmConfig<T>,
    oracle: &'a O,
    schedule: MixingSchedule<T>,
    params: ParamMatrix<T>,
    grads: ParamMatrix<T>,
    scratch: ParamMatrix<T>,
    next: ParamMatrix<T>,
    streams: Vec<StreamRng>,
    k: usize,
}

impl<'a, T: Scalar, O: GradientOracle<T> + ?Sized> Simulation<'a, T, O> {
    pub fn new(config: &'a AlgorithmConfig<T>, oracle: &'a O) -> Result<Self> {
        config.validate()?;
        let d = oracle.dim();
        let init = match &config.init {
            Some(init) if init.len() != d => {
                return Err(Error::DimensionMismatch { context: "initial point", expected: d, found: init.len() })
            }
            Some(init) => init.clone(),
            None => vec![T::zero(); d],
        };
        let params = ParamMatrix::replicated(&init, config.workers, config.aux)?;
        let grads = ParamMatrix::zeros(d, config.workers, config.aux)?;
        Ok(Self {
            config,
            oracle,
            schedule: MixingSchedule::new(config.mixing.clone(), config.tau)?,
            scratch: params.clone(),
            next: params.clone(),
            params,
            grads,
            streams: (0..config.workers).map(|i| worker_stream(config.seed, i)).collect(),
            k: 0,
        })
    }

    /// Number of steps taken so far.
    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn params(&self) -> &ParamMatrix<T> {
        &self.params
    }

    /// Gradients used by the most recent step.
    pub fn gradients(&self) -> &ParamMatrix<T> {
        &self.grads
    }

    pub fn step(&mut self) -> Result<()> {
        self.k += 1;
        for (i, rng) in self.streams.iter_mut().enumerate() {
            let (x, g) = (self.params.column(i), &mut self.grads.data[i * self.params.dim..(i + 1) * self.params.dim]);
            self.oracle.stochastic_gradient_into(x, rng, g);
        }
        let w = self.schedule.at(self.k);
        coop_step_into(&self.params, w, self.config.eta, &self.grads, self.config.rule, &mut self.scratch, &mut self.next)?;
        std::mem::swap(&mut self.params, &mut self.next);
        Ok(())
    }

    fn diverged(&self) -> bool {
        !self.params.is_finite() || self.params.max_abs().to_f64_lossy() > DIVERGENCE_LIMIT
    }

    fn record(&self) -> TraceRecord {
        let xbar = averaged_model(&self.params);
        let mut grad = vec![T::zero(); xbar.len()];
        self.oracle.gradient_into(&xbar, &mut grad);
        TraceRecord {
            k: self.k,
            loss: self.oracle.value(&xbar).to_f64_lossy(),
            grad_norm_sq: grad.iter().map(|&v| v * v).sum::<T>().to_f64_lossy(),
            network_error: network_error(&self.params).to_f64_lossy(),
            wall_clock_s: 0.0,
        }
    }
}

/// Executes all `K` steps, recording rows `k = 0..=K`.
///
/// A run whose parameters blow up stops early and is flagged divergent.
pub fn run<T: Scalar, O: GradientOracle<T> + ?Sized>(config: &AlgorithmConfig<T>, oracle: &O) -> Result<RunTrace> {
    let mut sim = Simulation::new(config, oracle)?;
    let mut records = Vec::with_capacity(config.iterations + 1);
    records.push(sim.record());
    let mut diverged = false;
    while sim.iteration() < config.iterations {
        sim.step()?;
        if sim.diverged() {
            diverged = true;
            break;
        }
        let rec = sim.record();
        if !(rec.loss.is_finite() && rec.grad_norm_sq.is_finite()) {
            diverged = true;
            break;
        }
        records.push(rec);
    }
    Ok(RunTrace::new(records, config.iterations, diverged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::{make_easgd, make_fully_connected};
    use crate::objectives::QuadraticProblem;

    fn pm(cols: &[&[f64]], workers: usize) -> ParamMatrix<f64> {
        ParamMatrix::from_columns(&cols.iter().map(|c| c.to_vec()).collect::<Vec<_>>(), workers).unwrap()
    }

    #[test]
    fn step_examples() {
        let j2 = make_fully_connected::<f64>(2).unwrap();
        let x = pm(&[&[1.0], &[3.0]], 2);
        let out = coop_step(&x, &j2, 0.7, &pm(&[&[0.0], &[0.0]], 2), UpdateRule::PostMultiply).unwrap();
        assert_eq!(out.to_columns(), vec![vec![2.0], vec![2.0]]);
        let out = coop_step(&x, &j2, 1.0, &pm(&[&[1.0], &[1.0]], 2), UpdateRule::PostMultiply).unwrap();
        assert_eq!(out.to_columns(), vec![vec![1.0], vec![1.0]]);
        let id = MixingMatrix::<f64>::identity(2).unwrap();
        let out = coop_step(&x, &id, 0.5, &pm(&[&[2.0], &[2.0]], 2), UpdateRule::PostMultiply).unwrap();
        assert_eq!(out.to_columns(), vec![vec![0.0], vec![2.0]]);
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let j3 = make_fully_connected::<f64>(3).unwrap();
        let x = pm(&[&[1.0], &[3.0]], 2);
        assert!(coop_step(&x, &j3, 0.1, &x, UpdateRule::PostMultiply).is_err());
        let x = pm(&[&[1.0], &[3.0], &[0.0]], 2);
        let g = pm(&[&[1.0], &[3.0], &[1.0]], 2);
        assert!(coop_step(&x, &j3, 0.1, &g, UpdateRule::PreMultiply).is_err());
    }

    #[test]
    fn averages_and_errors() {
        assert_eq!(averaged_model(&pm(&[&[1.0], &[3.0]], 2)), vec![2.0]);
        assert_eq!(averaged_model(&pm(&[&[1.0], &[3.0], &[5.0]], 2)), vec![3.0]);
        assert_eq!(network_error(&pm(&[&[1.0], &[3.0]], 2)), 2.0);
        assert_eq!(network_error(&pm(&[&[0.0, 0.0], &[2.0, 0.0]], 2)), 2.0);
        assert_eq!(network_error(&pm(&[&[0.3, -1.7], &[0.3, -1.7], &[0.3, -1.7]], 3)), 0.0);
        assert!((effective_lr(0.1_f64, 8, 1) - 0.8 / 9.0).abs() < 1e-15);
        assert_eq!(effective_lr(0.1, 4, 0), 0.1);
        assert!((effective_lr(0.1_f64, 2, 2) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_indivisible_horizon() {
        let j = make_fully_connected::<f64>(4).unwrap();
        let err = AlgorithmConfig::new(4, j, 0, 0.1, 10, 0).unwrap_err().to_string();
        assert!(err.contains("nearest valid value is 8"), "{err}");
    }

    #[test]
    fn gradient_descent_converges() {
        let q = QuadraticProblem::<f64>::synthetic(10, 0.1, 1.0, 3, 0.0).unwrap();
        let cfg = AlgorithmConfig::new(1, make_fully_connected(4).unwrap(), 0, 1.5, 500, 1).unwrap();
        let trace = run(&cfg, &q).unwrap();
        assert!(!trace.diverged());
        assert!(trace.records().last().unwrap().grad_norm_sq < 1e-10);
    }

    #[test]
    fn periodic_sync_zeroes_network_error() {
        let q = QuadraticProblem::<f64>::synthetic(5, 0.1, 1.0, 4, 1.0).unwrap();
        let cfg = AlgorithmConfig::new(4, make_fully_connected(4).unwrap(), 0, 0.1, 40, 9).unwrap();
        let trace = run(&cfg, &q).unwrap();
        for r in &trace.records()[1..] {
            if r.k % 4 == 0 {
                assert!(r.network_error < 1e-20);
            } else {
                assert!(r.network_error > 0.0);
            }
        }
    }

    #[test]
    fn large_alpha_diverges() {
        let q = QuadraticProblem::<f64>::synthetic(10, 0.1, 1.0, 5, 1.0).unwrap().with_beta(9.0).unwrap();
        let cfg = AlgorithmConfig::new(1, make_easgd(8, 0.23).unwrap(), 1, 0.1, 20_000, 2).unwrap();
        let trace = run(&cfg, &q).unwrap();
        assert!(trace.diverged());
        assert!(trace.records().len() < 20_001);
    }
}
