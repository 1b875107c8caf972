use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "k,loss,grad_norm_sq,network_error,wall_clock_s";

/// Measurements taken at the averaged model after step `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub network_error: f64,
    pub wall_clock_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    records: Vec<TraceRecord>,
    iterations: usize,
    diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mean_grad_norm_sq: f64,
    pub final_loss: f64,
    pub diverged: bool,
    pub config_echo: serde_json::Value,
}

impl RunTrace {
    pub fn new(records: Vec<TraceRecord>, iterations: usize, diverged: bool) -> Self {
        Self { records, iterations, diverged }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Configured horizon `K`.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    pub fn is_complete(&self) -> bool {
        !self.diverged && self.records.len() == self.iterations + 1
    }

    /// Mean of `‖∇F(x̄_k)‖²` over the `K` iterates `k = 0..K−1`.
    pub fn mean_grad_norm_sq(&self) -> f64 {
        let n = self.records.len().min(self.iterations).max(1);
        self.records.iter().take(n).map(|r| r.grad_norm_sq).sum::<f64>() / n as f64
    }

    /// Mean gradient norm over the trailing `fraction` of the horizon.
    pub fn tail_mean_grad_norm_sq(&self, fraction: f64) -> f64 {
        let start = ((1.0 - fraction) * self.iterations as f64).floor() as usize;
        let tail: Vec<f64> =
            self.records.iter().filter(|r| r.k >= start && r.k < self.iterations).map(|r| r.grad_norm_sq).collect();
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    pub fn tail_mean_loss(&self, fraction: f64) -> f64 {
        let start = ((1.0 - fraction) * self.iterations as f64).floor() as usize;
        let tail: Vec<f64> =
            self.records.iter().filter(|r| r.k >= start && r.k <= self.iterations).map(|r| r.loss).collect();
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().sum::<f64>() / tail.len() as f64
    }

    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.loss)
    }

    /// Mean network error over `k = 0..K−1`.
    pub fn mean_network_error(&self) -> f64 {
        let n = self.records.len().min(self.iterations).max(1);
        self.records.iter().take(n).map(|r| r.network_error).sum::<f64>() / n as f64
    }

    /// Fills `wall_clock_s` from cumulative times indexed by `k`.
    pub fn attach_wall_clock(&mut self, cumulative: &[f64]) -> Result<()> {
        if cumulative.len() < self.records.len() {
            return Err(Error::config(format!(
                "timeline has {} entries, trace needs {}",
                cumulative.len(),
                self.records.len()
            )));
        }
        for r in &mut self.records {
            r.wall_clock_s = cumulative[r.k];
        }
        Ok(())
    }

    pub fn summary(&self, config_echo: serde_json::Value) -> RunSummary {
        RunSummary {
            mean_grad_norm_sq: self.mean_grad_norm_sq(),
            final_loss: self.final_loss(),
            diverged: self.diverged,
            config_echo,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{},{}", r.k, r.loss, r.grad_norm_sq, r.network_error, r.wall_clock_s)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Row-wise mean of complete traces with a common horizon.
///
/// Divergent or truncated traces are skipped; `None` if nothing remains.
pub fn average_traces(traces: &[RunTrace]) -> Option<RunTrace> {
    let complete: Vec<&RunTrace> = traces.iter().filter(|t| t.is_complete()).collect();
    let first = complete.first()?;
    if complete.iter().any(|t| t.iterations != first.iterations) {
        return None;
    }
    let n = complete.len() as f64;
    let records = (0..first.records.len())
        .map(|i| {
            let mut acc = TraceRecord { k: first.records[i].k, loss: 0.0, grad_norm_sq: 0.0, network_error: 0.0, wall_clock_s: 0.0 };
            for t in &complete {
                let r = &t.records[i];
                acc.loss += r.loss;
                acc.grad_norm_sq += r.grad_norm_sq;
                acc.network_error += r.network_error;
                acc.wall_clock_s += r.wall_clock_s;
            }
            acc.loss /= n;
            acc.grad_norm_sq /= n;
            acc.network_error /= n;
            acc.wall_clock_s /= n;
            acc
        })
        .collect();
    Some(RunTrace::new(records, first.iterations, false))
}
