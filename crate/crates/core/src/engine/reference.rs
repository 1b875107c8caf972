//! Per-worker transcriptions of the classic update rules.
//!
//! These work on one vector per worker and never touch the matrix form, so they
//! can serve as oracles for the cooperative update.

use crate::error::{Error, Result};
use crate::mixing::MixingMatrix;
use crate::scalar::Scalar;

fn check<T: Scalar>(models: &[Vec<T>], grads: &[Vec<T>]) -> Result<usize> {
    if models.is_empty() {
        return Err(Error::InvalidDimension("no worker models".into()));
    }
    if grads.len() != models.len() {
        return Err(Error::DimensionMismatch { context: "worker gradients", expected: models.len(), found: grads.len() });
    }
    let d = models[0].len();
    for v in models.iter().chain(grads) {
        if v.len() != d {
            return Err(Error::DimensionMismatch { context: "worker vector", expected: d, found: v.len() });
        }
    }
    Ok(d)
}

fn local_step<T: Scalar>(x: &[T], g: &[T], eta: T) -> Vec<T> {
    x.iter().zip(g).map(|(&xi, &gi)| xi - eta * gi).collect()
}

/// Fully synchronous SGD: every worker holds `x`, the update uses the mean gradient.
pub fn reference_fullsync_step<T: Scalar>(x: &[T], grads: &[Vec<T>], eta: T) -> Result<Vec<T>> {
    if grads.is_empty() {
        return Err(Error::InvalidDimension("no worker gradients".into()));
    }
    for g in grads {
        if g.len() != x.len() {
            return Err(Error::DimensionMismatch { context: "worker gradient", expected: x.len(), found: g.len() });
        }
    }
    let m = T::from_usize_lossy(grads.len());
    Ok((0..x.len())
        .map(|r| {
            let mean_g = grads.iter().map(|g| g[r]).sum::<T>() / m;
            x[r] - eta * mean_g
        })
        .collect())
}

/// Periodic averaging: local steps, with the post-step models averaged when `k mod τ = 0`.
pub fn reference_pasgd_step<T: Scalar>(
    models: &[Vec<T>],
    grads: &[Vec<T>],
    eta: T,
    k: usize,
    tau: usize,
) -> Result<Vec<Vec<T>>> {
    let d = check(models, grads)?;
    let stepped: Vec<Vec<T>> = models.iter().zip(grads).map(|(x, g)| local_step(x, g, eta)).collect();
    if tau == 0 || k % tau != 0 {
        return Ok(stepped);
    }
    let m = T::from_usize_lossy(models.len());
    let avg: Vec<T> = (0..d).map(|r| stepped.iter().map(|x| x[r]).sum::<T>() / m).collect();
    Ok(vec![avg; models.len()])
}

/// Elastic averaging with anchor `z`; returns the new worker models and anchor.
pub fn reference_easgd_step<T: Scalar>(
    models: &[Vec<T>],
    z: &[T],
    grads: &[Vec<T>],
    eta: T,
    alpha: T,
) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    let d = check(models, grads)?;
    if z.len() != d {
        return Err(Error::DimensionMismatch { context: "anchor", expected: d, found: z.len() });
    }
    let m = T::from_usize_lossy(models.len());
    let next: Vec<Vec<T>> = models
        .iter()
        .zip(grads)
        .map(|(x, g)| (0..d).map(|r| x[r] - eta * g[r] - alpha * (x[r] - z[r])).collect())
        .collect();
    let z_next = (0..d)
        .map(|r| {
            let xbar = models.iter().map(|x| x[r]).sum::<T>() / m;
            (T::one() - m * alpha) * z[r] + m * alpha * xbar
        })
        .collect();
    Ok((next, z_next))
}

/// Decentralized SGD: `x_i ← Σ_j w_ji x_j − η g_i`.
pub fn reference_dpsgd_step<T: Scalar>(
    models: &[Vec<T>],
    w: &MixingMatrix<T>,
    grads: &[Vec<T>],
    eta: T,
) -> Result<Vec<Vec<T>>> {
    let d = check(models, grads)?;
    if w.n() != models.len() {
        return Err(Error::DimensionMismatch { context: "mixing matrix", expected: models.len(), found: w.n() });
    }
    Ok((0..models.len())
        .map(|i| {
            (0..d)
                .map(|r| {
                    let mixed = (0..models.len()).map(|j| w.get(j, i) * models[j][r]).sum::<T>();
                    mixed - eta * grads[i][r]
                })
                .collect()
        })
        .collect())
}
