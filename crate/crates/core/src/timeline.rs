//! Simulated wall-clock time for synchronous rounds of local steps.

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::MixingMatrix;
use crate::rng::timeline_stream;
use crate::scalar::Scalar;

/// Time one worker needs for one local step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ComputeTime {
    Constant { c: f64 },
    /// `c` plus an exponential with the given mean.
    ShiftedExp { c: f64, mean: f64 },
}

impl ComputeTime {
    fn floor(&self) -> f64 {
        match *self {
            ComputeTime::Constant { c } | ComputeTime::ShiftedExp { c, .. } => c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    pub compute: ComputeTime,
    /// Fixed latency per synchronization, seconds.
    pub comm_latency: f64,
    /// Additional cost per exchanged partner, seconds.
    pub comm_per_neighbor: f64,
    /// Overlap auxiliary exchanges with the next round of local steps.
    #[serde(default)]
    pub nonblocking_aux: bool,
}

impl DelayModel {
    pub fn constant(c: f64, comm_latency: f64, comm_per_neighbor: f64) -> Self {
        Self { compute: ComputeTime::Constant { c }, comm_latency, comm_per_neighbor, nonblocking_aux: false }
    }

    pub fn with_nonblocking_aux(mut self, on: bool) -> Self {
        self.nonblocking_aux = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        let compute_ok = match self.compute {
            ComputeTime::Constant { c } => ok(c),
            ComputeTime::ShiftedExp { c, mean } => ok(c) && ok(mean),
        };
        if !(compute_ok && ok(self.comm_latency) && ok(self.comm_per_neighbor)) {
            return Err(Error::config("delay parameters must be finite and nonnegative"));
        }
        Ok(())
    }
}

impl Default for DelayModel {
    fn default() -> Self {
        Self::constant(1.0, 0.0, 0.0)
    }
}

struct Degrees {
    /// Busiest worker's partner count among workers.
    workers: usize,
    /// Busiest worker's partner count including auxiliaries.
    all: usize,
    any: bool,
}

fn degrees<T: Scalar>(w: &MixingMatrix<T>, workers: usize) -> Degrees {
    let n = w.n();
    let mut out = Degrees { workers: 0, all: 0, any: false };
    for i in 0..n {
        let (mut dw, mut da) = (0, 0);
        for j in (0..n).filter(|&j| j != i && !w.get(i, j).is_zero()) {
            out.any = true;
            if j < workers {
                dw += 1;
            } else {
                da += 1;
            }
        }
        if i < workers {
            out.workers = out.workers.max(dw);
            out.all = out.all.max(dw + da);
        }
    }
    out
}

fn blocking_and_hidden<T: Scalar>(w: &MixingMatrix<T>, workers: usize, delay: &DelayModel) -> (f64, f64) {
    let deg = degrees(w, workers.min(w.n()));
    if !deg.any {
        return (0.0, 0.0);
    }
    let base = delay.comm_latency + delay.comm_per_neighbor * deg.workers as f64;
    let aux = delay.comm_per_neighbor * (deg.all - deg.workers) as f64;
    if delay.nonblocking_aux {
        (base, aux)
    } else {
        (base + aux, 0.0)
    }
}

/// Cost of one synchronization, bottlenecked by the busiest worker.
///
/// Exchanges with auxiliary nodes are left out when they run non-blocking.
pub fn sync_cost<T: Scalar>(w: &MixingMatrix<T>, workers: usize, delay: &DelayModel) -> f64 {
    blocking_and_hidden(w, workers, delay).0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineTrace {
    /// Time attributed to each step `k = 1..=K`.
    pub increments: Vec<f64>,
    /// Elapsed time after step `k`, starting from `0` at `k = 0`.
    pub cumulative: Vec<f64>,
    /// Per worker, share of round compute time spent waiting for stragglers.
    pub idle_fractions: Vec<f64>,
    pub total_comm_time: f64,
    pub total_compute_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineSummary {
    pub total_time_s: f64,
    pub idle_fraction: f64,
    pub comm_fraction: f64,
}

impl TimelineTrace {
    pub fn total_time(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn mean_idle_fraction(&self) -> f64 {
        if self.idle_fractions.is_empty() {
            return 0.0;
        }
        self.idle_fractions.iter().sum::<f64>() / self.idle_fractions.len() as f64
    }

    pub fn comm_fraction(&self) -> f64 {
        let total = self.total_time();
        if total > 0.0 {
            self.total_comm_time / total
        } else {
            0.0
        }
    }

    pub fn summary(&self) -> TimelineSummary {
        TimelineSummary {
            total_time_s: self.total_time(),
            idle_fraction: self.mean_idle_fraction(),
            comm_fraction: self.comm_fraction(),
        }
    }
}

/// Lockstep rounds of `τ` local steps followed by one synchronization.
///
/// A round lasts as long as its slowest worker plus the sync cost; that time is
/// spread evenly over the round's `τ` steps.
pub fn simulate_timeline<T: Scalar>(
    iterations: usize,
    tau: usize,
    w: &MixingMatrix<T>,
    workers: usize,
    delay: &DelayModel,
    seed: u64,
) -> Result<TimelineTrace> {
    delay.validate()?;
    if tau == 0 || iterations % tau != 0 {
        return Err(Error::config(format!("iterations ({iterations}) must be a multiple of tau ({tau})")));
    }
    if workers == 0 || workers > w.n() {
        return Err(Error::config(format!("{workers} workers do not fit a {}-node mixing matrix", w.n())));
    }
    let (sync, hidden) = blocking_and_hidden(w, workers, delay);
    let rounds = iterations / tau;
    let mut rng = timeline_stream(seed);
    let exp = match delay.compute {
        ComputeTime::ShiftedExp { mean, .. } if mean > 0.0 => {
            Some(Exp::new(1.0 / mean).map_err(|e| Error::config(e.to_string()))?)
        }
        _ => None,
    };
    let c = delay.compute.floor();
    let tau_f = tau as f64;

    let mut increments = Vec::with_capacity(iterations);
    let mut cumulative = Vec::with_capacity(iterations + 1);
    cumulative.push(0.0);
    let mut idle = vec![0.0; workers];
    let mut span_total = 0.0;
    let mut comm_total = 0.0;
    let mut own = vec![0.0; workers];
    for _ in 0..rounds {
        let per_step = match &exp {
            None => c,
            Some(exp) => {
                for o in own.iter_mut() {
                    *o = (0..tau).map(|_| c + exp.sample(&mut rng)).sum();
                }
                let span = own.iter().copied().fold(0.0, f64::max);
                for (acc, o) in idle.iter_mut().zip(&own) {
                    *acc += span - o;
                }
                span / tau_f
            }
        };
        let span = per_step * tau_f;
        span_total += span;
        let comm = sync + (hidden - span).max(0.0);
        comm_total += comm;
        let inc = per_step + comm / tau_f;
        for _ in 0..tau {
            increments.push(inc);
            let last = *cumulative.last().expect("non-empty");
            cumulative.push(last + inc);
        }
    }
    let idle_fractions = idle.iter().map(|&v| if span_total > 0.0 { v / span_total } else { 0.0 }).collect();
    Ok(TimelineTrace {
        increments,
        cumulative,
        idle_fractions,
        total_comm_time: comm_total,
        total_compute_time: span_total,
    })
}
