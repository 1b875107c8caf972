//! Closed-form learning-rate conditions, error bounds and floors.

use serde::{Deserialize, Serialize};

use crate::engine::RunTrace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Constants of a problem/algorithm pair that the bounds depend on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct BoundInputs<T> {
    /// `F(x₁) − F_inf`
    pub f1_minus_finf: T,
    pub lipschitz: T,
    pub sigma_sq: T,
    #[serde(default)]
    pub beta: T,
    pub workers: usize,
    #[serde(default)]
    pub aux: usize,
    pub tau: usize,
    pub zeta: T,
    pub eta: T,
    pub iterations: usize,
}

impl<T: Scalar> BoundInputs<T> {
    /// `η̃ = mη/(m+v)`
    pub fn eta_tilde(&self) -> T {
        crate::engine::effective_lr(self.eta, self.workers, self.aux)
    }

    pub fn validate(&self) -> Result<()> {
        check_zeta(self.zeta)?;
        if self.workers == 0 {
            return Err(Error::config("workers must be positive"));
        }
        if self.tau == 0 {
            return Err(Error::config("tau must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if !(self.eta > T::zero() && self.eta.is_finite()) {
            return Err(Error::config("eta must be positive and finite"));
        }
        if !(self.lipschitz > T::zero() && self.lipschitz.is_finite()) {
            return Err(Error::config("lipschitz constant must be positive and finite"));
        }
        let nonneg = |v: T| v >= T::zero() && v.is_finite();
        if !(nonneg(self.sigma_sq) && nonneg(self.beta) && nonneg(self.f1_minus_finf)) {
            return Err(Error::config("sigma_sq, beta and f1_minus_finf must be nonnegative and finite"));
        }
        Ok(())
    }
}

fn check_zeta<T: Scalar>(zeta: T) -> Result<()> {
    if zeta.is_nan() || zeta < T::zero() || zeta >= T::one() {
        return Err(Error::ZetaOutOfRange(zeta.to_f64_lossy()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundReport<T> {
    pub lr_lhs: T,
    pub lr_ok: bool,
    pub bound: T,
    pub floor: T,
    pub opt_term: T,
    pub stat_term: T,
    pub network_term: T,
}

/// `(1+ζ²)/(1−ζ²)·τ − 1`
pub fn network_coefficient<T: Scalar>(tau: usize, zeta: T) -> T {
    let z2 = zeta * zeta;
    (T::one() + z2) / (T::one() - z2) * T::from_usize_lossy(tau) - T::one()
}

/// Left-hand side of the learning-rate condition and whether it is `≤ 1`.
///
/// With `β = 0` this is `η̃L + 5η̃²L²((1+v/m)τ/(1−ζ))²`; otherwise the unsimplified
/// general form with the `β` terms is used.
pub fn lr_condition<T: Scalar>(inputs: &BoundInputs<T>) -> Result<(T, bool)> {
    check_zeta(inputs.zeta)?;
    let one = T::one();
    let l = inputs.lipschitz;
    let et = inputs.eta_tilde();
    let m = T::from_usize_lossy(inputs.workers);
    let v = T::from_usize_lossy(inputs.aux);
    let tau = T::from_usize_lossy(inputs.tau);
    let z = inputs.zeta;
    let lhs = if inputs.beta.is_zero() {
        let r = (one + v / m) * tau / (one - z);
        et * l + T::lit(5.0) * et * et * l * l * r * r
    } else {
        let eta = inputs.eta;
        let two = T::lit(2.0);
        let inner = two * z * z / (one + z) + two * z / (one - z) + (tau - one) / tau;
        et * l * (inputs.beta / m + one)
            + two * eta * eta * l * l * inputs.beta * tau / (one - z * z)
            + eta * eta * l * l * tau * tau / (one - z) * inner
    };
    Ok((lhs, lhs <= one))
}

/// Error bound after `K` iterations with its three-term decomposition.
///
/// Evaluated even when the learning-rate condition fails; `lr_ok` reports that.
pub fn theorem1_bound<T: Scalar>(inputs: &BoundInputs<T>) -> Result<BoundReport<T>> {
    inputs.validate()?;
    let (lr_lhs, lr_ok) = lr_condition(inputs)?;
    let et = inputs.eta_tilde();
    let l = inputs.lipschitz;
    let m = T::from_usize_lossy(inputs.workers);
    let ratio = T::one() + T::from_usize_lossy(inputs.aux) / m;
    let opt_term = T::lit(2.0) * inputs.f1_minus_finf / (et * T::from_usize_lossy(inputs.iterations));
    let stat_term = et * l * inputs.sigma_sq / m;
    let network_term =
        et * et * l * l * inputs.sigma_sq * network_coefficient(inputs.tau, inputs.zeta) * ratio * ratio;
    Ok(BoundReport {
        lr_lhs,
        lr_ok,
        bound: opt_term + stat_term + network_term,
        floor: stat_term + network_term,
        opt_term,
        stat_term,
        network_term,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HorizonBound<T> {
    pub eta: T,
    pub bound: T,
    pub k_min: u64,
    pub k_min_tight: u64,
}

fn ceil_count(x: f64) -> u64 {
    (x * (1.0 - 1e-12)).ceil() as u64
}

/// Horizon-dependent learning rate `η = ((m+v)/(Lm))√(m/K)` and its bound.
#[allow(clippy::too_many_arguments)]
pub fn corollary1_bound<T: Scalar>(
    f1_minus_finf: T,
    lipschitz: T,
    sigma_sq: T,
    workers: usize,
    aux: usize,
    tau: usize,
    zeta: T,
    iterations: usize,
) -> Result<HorizonBound<T>> {
    check_zeta(zeta)?;
    if workers == 0 || iterations == 0 || tau == 0 {
        return Err(Error::config("workers, tau and iterations must be positive"));
    }
    let m = T::from_usize_lossy(workers);
    let k = T::from_usize_lossy(iterations);
    let n = T::from_usize_lossy(workers + aux);
    let ratio = T::one() + T::from_usize_lossy(aux) / m;
    let eta = n / (lipschitz * m) * (m / k).sqrt();
    let bound = (T::lit(2.0) * lipschitz * f1_minus_finf + sigma_sq) / (m * k).sqrt()
        + m / k * ratio * ratio * network_coefficient(tau, zeta) * sigma_sq;
    let r = ratio * T::from_usize_lossy(tau) / (T::one() - zeta);
    let base = (m * r * r).to_f64_lossy();
    Ok(HorizonBound {
        eta,
        bound,
        k_min: ceil_count(10.0 * base),
        k_min_tight: ceil_count(n.to_f64_lossy().powi(2) * base),
    })
}

/// A learning-rate check paired with the bound it licenses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpecialBound<T> {
    pub lr_lhs: T,
    pub lr_ok: bool,
    pub bound: T,
}

/// Periodic averaging with full averaging every `τ` steps.
pub fn pasgd_bound<T: Scalar>(
    f1_minus_finf: T,
    lipschitz: T,
    sigma_sq: T,
    workers: usize,
    tau: usize,
    eta: T,
    iterations: usize,
) -> SpecialBound<T> {
    let (l, m, k) = (lipschitz, T::from_usize_lossy(workers), T::from_usize_lossy(iterations));
    let tm1 = T::from_usize_lossy(tau.saturating_sub(1));
    let el = eta * l;
    let lr_lhs = el + el * el * T::from_usize_lossy(tau) * tm1;
    SpecialBound {
        lr_lhs,
        lr_ok: lr_lhs <= T::one(),
        bound: T::lit(2.0) * f1_minus_finf / (eta * k) + el * sigma_sq / m + el * el * sigma_sq * tm1,
    }
}

/// Decentralized SGD with a fixed mixing matrix of spectral parameter `ζ`.
pub fn dpsgd_bound<T: Scalar>(
    f1_minus_finf: T,
    lipschitz: T,
    sigma_sq: T,
    workers: usize,
    zeta: T,
    eta: T,
    iterations: usize,
) -> Result<SpecialBound<T>> {
    check_zeta(zeta)?;
    let one = T::one();
    let two = T::lit(2.0);
    let (m, k) = (T::from_usize_lossy(workers), T::from_usize_lossy(iterations));
    let el = eta * lipschitz;
    let lr_lhs = el + el * el * (two * zeta / (one - zeta)) * (zeta / (one + zeta) + one / (one - zeta));
    Ok(SpecialBound {
        lr_lhs,
        lr_ok: lr_lhs <= one,
        bound: two * f1_minus_finf / (eta * k)
            + el * sigma_sq / m
            + el * el * sigma_sq * two * zeta * zeta / (one - zeta * zeta),
    })
}

/// Elastic averaging at its best `α`.
pub fn easgd_bound<T: Scalar>(
    f1_minus_finf: T,
    lipschitz: T,
    sigma_sq: T,
    workers: usize,
    eta_tilde: T,
    iterations: usize,
) -> T {
    let (m, k) = (T::from_usize_lossy(workers), T::from_usize_lossy(iterations));
    let el = eta_tilde * lipschitz;
    T::lit(2.0) * f1_minus_finf / (eta_tilde * k)
        + el * sigma_sq / m
        + T::lit(0.5) * el * el * sigma_sq * (m + T::one())
}

/// `ζ_τ = √(1 − 2/(τ+1))`: decentralized SGD with `ζ ≤ ζ_τ` has a floor no higher
/// than periodic averaging with period `τ`.
pub fn zeta_threshold<T: Scalar>(tau: usize) -> T {
    (T::one() - T::lit(2.0) / T::from_usize_lossy(tau + 1)).max(T::zero()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub applicable: bool,
    pub measured: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Plugs a measured network-error trace into the error decomposition.
///
/// Best used with a seed-averaged trace, since the inequality is between expectations.
pub fn lemma3_empirical_bound<T: Scalar>(trace: &RunTrace, inputs: &BoundInputs<T>) -> Result<DecompositionCheck> {
    inputs.validate()?;
    let et = inputs.eta_tilde().to_f64_lossy();
    let l = inputs.lipschitz.to_f64_lossy();
    let m = inputs.workers as f64;
    let k = inputs.iterations as f64;
    let applicable = trace.is_complete()
        && trace.iterations() == inputs.iterations
        && et * l * (1.0 + inputs.beta.to_f64_lossy() / m) <= 1.0;
    let measured = trace.mean_grad_norm_sq();
    let rhs = 2.0 * inputs.f1_minus_finf.to_f64_lossy() / (et * k)
        + et * l * inputs.sigma_sq.to_f64_lossy() / m
        + l * l * trace.mean_network_error() / m;
    Ok(DecompositionCheck { applicable, measured, rhs, holds: applicable && measured <= rhs })
}
