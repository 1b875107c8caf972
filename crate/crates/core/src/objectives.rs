//! Gradient oracles with known smoothness, variance and lower-bound constants.
//!
//! Two families are provided:
//!
//! * [`QuadraticProblem`]: `F(x) = ½xᵀAx − bᵀx` with exact `L = λ_max(A)` and
//!   exact `F_inf`. Stochastic gradients add isotropic Gaussian noise with
//!   total variance `σ²`, optionally scaled multiplicatively by `1 + √β·u`.
//! * [`LogisticProblem`]: ridge-regularised logistic regression on seeded
//!   synthetic data, with mini-batch (or additive Gaussian) gradient noise.
//!
//! Both satisfy `E‖g(x) − ∇F(x)‖² ≤ β‖∇F(x)‖² + σ²` with the reported
//! constants.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm_sq, Matrix};
use crate::rng::{auxiliary_stream, StreamRng};
use crate::scalar::Scalar;

/// Objective with full and stochastic gradients plus the constants the
/// convergence bounds need.
pub trait GradientOracle<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// `F(x)`.
    fn value(&self, x: &[T]) -> T;

    /// Writes `∇F(x)` into `out`.
    fn gradient_into(&self, x: &[T], out: &mut [T]);

    /// Writes one unbiased stochastic gradient `g(x)` into `out`.
    fn stochastic_gradient_into(&self, x: &[T], rng: &mut StreamRng, out: &mut [T]);

    /// Smoothness constant `L`.
    fn lipschitz(&self) -> T;

    /// Multiplicative variance constant `β`.
    fn beta(&self) -> T;

    /// Additive variance constant `σ²`.
    fn sigma_sq(&self) -> T;

    /// Lower bound `F_inf` (attained for the built-in problems).
    fn f_inf(&self) -> T;
}

fn check_input<T: Scalar>(oracle: &(impl GradientOracle<T> + ?Sized), x: &[T]) -> Result<()> {
    if x.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            context: "oracle input",
            expected: oracle.dim(),
            found: x.len(),
        });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("oracle input"));
    }
    Ok(())
}

pub fn full_gradient<T: Scalar>(oracle: &(impl GradientOracle<T> + ?Sized), x: &[T]) -> Result<Vec<T>> {
    check_input(oracle, x)?;
    let mut out = vec![T::zero(); x.len()];
    oracle.gradient_into(x, &mut out);
    Ok(out)
}

pub fn stochastic_gradient<T: Scalar>(
    oracle: &(impl GradientOracle<T> + ?Sized),
    x: &[T],
    rng: &mut StreamRng,
) -> Result<Vec<T>> {
    check_input(oracle, x)?;
    let mut out = vec![T::zero(); x.len()];
    oracle.stochastic_gradient_into(x, rng, &mut out);
    Ok(out)
}

pub fn objective_value<T: Scalar>(oracle: &(impl GradientOracle<T> + ?Sized), x: &[T]) -> T {
    oracle.value(x)
}

pub fn lipschitz_constant<T: Scalar>(oracle: &(impl GradientOracle<T> + ?Sized)) -> T {
    oracle.lipschitz()
}

fn standard_normal<T: Scalar>(rng: &mut StreamRng) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Turns an exact gradient (already in `out`) into `∇F·(1 + √β·u) + n`, where
/// `u ~ N(0, 1)` and `n ~ N(0, σ²/d · I)`.
fn perturb<T: Scalar>(out: &mut [T], beta: T, sigma_sq: T, rng: &mut StreamRng) {
    if beta > T::zero() {
        let factor = T::one() + beta.sqrt() * standard_normal::<T>(rng);
        out.iter_mut().for_each(|g| *g *= factor);
    }
    if sigma_sq > T::zero() {
        let scale = (sigma_sq / T::from_usize_lossy(out.len())).sqrt();
        for g in out.iter_mut() {
            *g += scale * standard_normal::<T>(rng);
        }
    }
}

/// `F(x) = ½xᵀAx − bᵀx` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem<T> {
    a: Matrix<T>,
    b: Vec<T>,
    sigma_sq: T,
    beta: T,
    lipschitz: T,
    minimizer: Vec<T>,
    f_inf: T,
}

impl<T: Scalar> QuadraticProblem<T> {
    pub fn new(a: Matrix<T>, b: Vec<T>, sigma_sq: T) -> Result<Self> {
        let d = a.rows();
        if !a.is_square() || d == 0 {
            return Err(Error::InvalidDimension(format!(
                "quadratic needs a non-empty square A, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.len() != d {
            return Err(Error::DimensionMismatch {
                context: "quadratic linear term",
                expected: d,
                found: b.len(),
            });
        }
        if !a.is_finite() || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("quadratic coefficients"));
        }
        let sym = a.symmetry_defect();
        let scale = a.frobenius_norm().max(T::one());
        if sym > T::lit(1e-12) * scale {
            return Err(Error::NotSymmetric(sym.to_f64_lossy()));
        }
        if !(sigma_sq >= T::zero()) {
            return Err(Error::config(format!("sigma_sq {sigma_sq} must be >= 0")));
        }

        let eig = linalg::symmetric_eigen(&a)?;
        let lambda_max = eig.values[0];
        let lambda_min = *eig.values.last().expect("d >= 1");
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) * lambda_max.abs().max(T::one());
        if lambda_min < -tol {
            return Err(Error::config(format!(
                "quadratic A is not positive semidefinite (λ_min = {lambda_min})"
            )));
        }
        if lambda_max <= tol {
            return Err(Error::config("quadratic A must have a positive eigenvalue"));
        }

        // pseudo-inverse solution of A x = b
        let mut minimizer = vec![T::zero(); d];
        for (k, &lambda) in eig.values.iter().enumerate() {
            if lambda <= tol {
                continue;
            }
            let u: Vec<T> = (0..d).map(|r| eig.vectors[(r, k)]).collect();
            let coeff = dot(&u, &b) / lambda;
            for (m, ui) in minimizer.iter_mut().zip(&u) {
                *m += coeff * *ui;
            }
        }
        let residual: Vec<T> = a
            .matvec(&minimizer)?
            .iter()
            .zip(&b)
            .map(|(&ax, &bi)| ax - bi)
            .collect();
        let b_norm = norm_sq(&b).sqrt();
        if norm_sq(&residual).sqrt() > T::lit(1e-8).max(T::epsilon() * T::lit(1e4)) * (T::one() + b_norm) {
            return Err(Error::Unbounded(
                "b has a component in the null space of A".into(),
            ));
        }

        let mut problem = Self {
            a,
            b,
            sigma_sq,
            beta: T::zero(),
            lipschitz: lambda_max,
            minimizer,
            f_inf: T::zero(),
        };
        problem.f_inf = problem.value(&problem.minimizer);
        Ok(problem)
    }

    /// Enables the multiplicative noise term `∇F·√β·u`.
    pub fn with_beta(mut self, beta: T) -> Result<Self> {
        if !(beta >= T::zero()) || !beta.is_finite() {
            return Err(Error::config(format!("beta {beta} must be finite and >= 0")));
        }
        self.beta = beta;
        Ok(self)
    }

    /// Random rotation of `diag(linspace(min_eig, max_eig, d))` with a seeded
    /// linear term `b = A·x_target`, `x_target ~ N(0, I)`.
    pub fn synthetic(d: usize, min_eig: T, max_eig: T, seed: u64, sigma_sq: T) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("quadratic needs d >= 1".into()));
        }
        let mut rng = auxiliary_stream(seed);
        let gaussian = Matrix::<T>::from_fn(d, d, |_, _| standard_normal(&mut rng));
        let sym = gaussian.zip_with(&gaussian.transpose(), |x, y| x + y)?;
        let basis = linalg::symmetric_eigen(&sym)?.vectors;
        let spectrum: Vec<T> = (0..d)
            .map(|i| {
                if d == 1 {
                    max_eig
                } else {
                    min_eig + (max_eig - min_eig) * T::from_usize_lossy(i) / T::from_usize_lossy(d - 1)
                }
            })
            .collect();
        let scaled = Matrix::from_fn(d, d, |r, c| basis[(r, c)] * spectrum[c]);
        let mut a = scaled.matmul(&basis.transpose())?;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = (a[(i, j)] + a[(j, i)]) / T::lit(2.0);
                a[(i, j)] = avg;
                a[(j, i)] = avg;
            }
        }
        let target: Vec<T> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let b = a.matvec(&target)?;
        Self::new(a, b, sigma_sq)
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn minimizer(&self) -> &[T] {
        &self.minimizer
    }
}

impl<T: Scalar> GradientOracle<T> for QuadraticProblem<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[T]) -> T {
        let d = self.dim();
        let mut quad = T::zero();
        for i in 0..d {
            quad += x[i] * dot(self.a.row(i), x);
        }
        quad / T::lit(2.0) - dot(&self.b, x)
    }

    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.a.row(i), x) - self.b[i];
        }
    }

    fn stochastic_gradient_into(&self, x: &[T], rng: &mut StreamRng, out: &mut [T]) {
        self.gradient_into(x, out);
        perturb(out, self.beta, self.sigma_sq, rng);
    }

    fn lipschitz(&self) -> T {
        self.lipschitz
    }

    fn beta(&self) -> T {
        self.beta
    }

    fn sigma_sq(&self) -> T {
        self.sigma_sq
    }

    fn f_inf(&self) -> T {
        self.f_inf
    }
}

/// How [`LogisticProblem`] draws stochastic gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogisticNoise<T> {
    /// Average of `batch` per-sample gradients drawn uniformly with replacement.
    MiniBatch { batch: usize },
    /// Exact gradient plus isotropic Gaussian noise of total variance `σ²`.
    Gaussian { sigma_sq: T },
}

/// Ridge-regularised logistic regression,
/// `F(w) = (1/N)Σ log(1 + exp(−yᵢ aᵢᵀw)) + (λ/2)‖w‖²`.
#[derive(Debug, Clone)]
pub struct LogisticProblem<T> {
    features: Matrix<T>,
    labels: Vec<T>,
    l2: T,
    noise: LogisticNoise<T>,
    lipschitz: T,
    sigma_sq: T,
    f_inf: T,
}

const LABEL_FLIP_PROB: f64 = 0.1;
const F_INF_MAX_ITERS: usize = 1_000_000;

impl<T: Scalar> LogisticProblem<T> {
    pub fn new(features: Matrix<T>, labels: Vec<T>, l2: T, noise: LogisticNoise<T>) -> Result<Self> {
        let (n, d) = (features.rows(), features.cols());
        if n == 0 || d == 0 {
            return Err(Error::InvalidDimension("logistic data must be non-empty".into()));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "logistic labels",
                expected: n,
                found: labels.len(),
            });
        }
        if labels.iter().any(|&y| y != T::one() && y != -T::one()) {
            return Err(Error::config("logistic labels must be ±1"));
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("logistic features"));
        }
        if !(l2 >= T::zero()) {
            return Err(Error::config(format!("l2 {l2} must be >= 0")));
        }
        let sigma_sq = match noise {
            LogisticNoise::MiniBatch { batch } => {
                if batch == 0 {
                    return Err(Error::config("mini-batch size must be >= 1"));
                }
                // E‖∇fᵢ − ∇F‖² ≤ E‖∇fᵢ − λw‖² ≤ mean ‖aᵢ‖² since the logistic weight is in (0, 1)
                let mean_sq = (0..n).map(|i| norm_sq(features.row(i))).sum::<T>() / T::from_usize_lossy(n);
                mean_sq / T::from_usize_lossy(batch)
            }
            LogisticNoise::Gaussian { sigma_sq } => {
                if !(sigma_sq >= T::zero()) {
                    return Err(Error::config(format!("sigma_sq {sigma_sq} must be >= 0")));
                }
                sigma_sq
            }
        };
        let gram = features.transpose().matmul(&features)?;
        let top = linalg::symmetric_eigenvalues(&gram)?[0];
        let lipschitz = top / (T::lit(4.0) * T::from_usize_lossy(n)) + l2;

        let mut problem = Self {
            features,
            labels,
            l2,
            noise,
            lipschitz,
            sigma_sq,
            f_inf: T::zero(),
        };
        problem.f_inf = problem.solve_lower_bound()?;
        Ok(problem)
    }

    /// Seeded synthetic data: standard-normal features, labels from a planted
    /// separator with 10% of them flipped.
    pub fn synthetic(n: usize, d: usize, seed: u64, l2: T, noise: LogisticNoise<T>) -> Result<Self> {
        let mut rng = auxiliary_stream(seed);
        let planted: Vec<T> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let features = Matrix::<T>::from_fn(n, d, |_, _| standard_normal(&mut rng));
        let labels = (0..n)
            .map(|i| {
                let clean = if dot(features.row(i), &planted) >= T::zero() {
                    T::one()
                } else {
                    -T::one()
                };
                if rng.gen_bool(LABEL_FLIP_PROB) {
                    -clean
                } else {
                    clean
                }
            })
            .collect();
        Self::new(features, labels, l2, noise)
    }

    pub fn samples(&self) -> usize {
        self.features.rows()
    }

    /// Deterministic gradient descent with step `1/L` down to `‖∇F‖ < 1e-10`.
    fn solve_lower_bound(&self) -> Result<T> {
        let d = self.dim();
        let step = T::one() / self.lipschitz;
        let target = T::lit(1e-10).max(T::epsilon() * T::lit(1e3));
        let mut w = vec![T::zero(); d];
        let mut grad = vec![T::zero(); d];
        for _ in 0..F_INF_MAX_ITERS {
            self.gradient_into(&w, &mut grad);
            if norm_sq(&grad).sqrt() < target {
                return Ok(self.value(&w));
            }
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= step * *gi;
            }
        }
        Err(Error::Unbounded(format!(
            "gradient descent did not reach ‖∇F‖ < {target} in {F_INF_MAX_ITERS} steps"
        )))
    }

    fn add_sample_gradient(&self, i: usize, w: &[T], weight: T, out: &mut [T]) {
        let a = self.features.row(i);
        let y = self.labels[i];
        let margin = y * dot(a, w);
        // d/dw log(1 + exp(−m)) = −y·σ(−m)·a
        let coeff = -y * sigmoid(-margin) * weight;
        for (o, &ai) in out.iter_mut().zip(a) {
            *o += coeff * ai;
        }
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl<T: Scalar> GradientOracle<T> for LogisticProblem<T> {
    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn value(&self, w: &[T]) -> T {
        let n = self.samples();
        let loss = (0..n)
            .map(|i| softplus(-self.labels[i] * dot(self.features.row(i), w)))
            .sum::<T>()
            / T::from_usize_lossy(n);
        loss + self.l2 * norm_sq(w) / T::lit(2.0)
    }

    fn gradient_into(&self, w: &[T], out: &mut [T]) {
        let n = self.samples();
        for (o, &wi) in out.iter_mut().zip(w) {
            *o = self.l2 * wi;
        }
        let weight = T::one() / T::from_usize_lossy(n);
        for i in 0..n {
            self.add_sample_gradient(i, w, weight, out);
        }
    }

    fn stochastic_gradient_into(&self, w: &[T], rng: &mut StreamRng, out: &mut [T]) {
        match self.noise {
            LogisticNoise::MiniBatch { batch } => {
                for (o, &wi) in out.iter_mut().zip(w) {
                    *o = self.l2 * wi;
                }
                let weight = T::one() / T::from_usize_lossy(batch);
                let n = self.samples();
                for _ in 0..batch {
                    let i = rng.gen_range(0..n);
                    self.add_sample_gradient(i, w, weight, out);
                }
            }
            LogisticNoise::Gaussian { sigma_sq } => {
                self.gradient_into(w, out);
                perturb(out, T::zero(), sigma_sq, rng);
            }
        }
    }

    fn lipschitz(&self) -> T {
        self.lipschitz
    }

    fn beta(&self) -> T {
        T::zero()
    }

    fn sigma_sq(&self) -> T {
        self.sigma_sq
    }

    fn f_inf(&self) -> T {
        self.f_inf
    }
}

/// Any of the built-in objectives.
#[derive(Debug, Clone)]
pub enum Problem<T> {
    Quadratic(QuadraticProblem<T>),
    Logistic(LogisticProblem<T>),
}

macro_rules! delegate {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::Quadratic($p) => $e,
            Problem::Logistic($p) => $e,
        }
    };
}

impl<T: Scalar> GradientOracle<T> for Problem<T> {
    fn dim(&self) -> usize {
        delegate!(self, p => p.dim())
    }
    fn value(&self, x: &[T]) -> T {
        delegate!(self, p => p.value(x))
    }
    fn gradient_into(&self, x: &[T], out: &mut [T]) {
        delegate!(self, p => p.gradient_into(x, out))
    }
    fn stochastic_gradient_into(&self, x: &[T], rng: &mut StreamRng, out: &mut [T]) {
        delegate!(self, p => p.stochastic_gradient_into(x, rng, out))
    }
    fn lipschitz(&self) -> T {
        delegate!(self, p => p.lipschitz())
    }
    fn beta(&self) -> T {
        delegate!(self, p => p.beta())
    }
    fn sigma_sq(&self) -> T {
        delegate!(self, p => p.sigma_sq())
    }
    fn f_inf(&self) -> T {
        delegate!(self, p => p.f_inf())
    }
}

/// JSON description of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        sigma_sq: f64,
        #[serde(default)]
        beta: f64,
    },
    Logistic {
        n: usize,
        d: usize,
        seed: u64,
        l2: f64,
        batch: usize,
        /// When present, replaces mini-batch sampling by additive Gaussian noise.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_sq: Option<f64>,
    },
}

impl ProblemSpec {
    pub fn build<T: Scalar>(&self) -> Result<Problem<T>> {
        match self {
            ProblemSpec::Quadratic { a, b, sigma_sq, beta } => {
                let rows: Vec<Vec<T>> = a.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect();
                let a = Matrix::from_rows(&rows)?;
                let b = b.iter().map(|&v| T::lit(v)).collect();
                let q = QuadraticProblem::new(a, b, T::lit(*sigma_sq))?.with_beta(T::lit(*beta))?;
                Ok(Problem::Quadratic(q))
            }
            ProblemSpec::Logistic {
                n,
                d,
                seed,
                l2,
                batch,
                sigma_sq,
            } => {
                let noise = match sigma_sq {
                    Some(s) => LogisticNoise::Gaussian { sigma_sq: T::lit(*s) },
                    None => LogisticNoise::MiniBatch { batch: *batch },
                };
                Ok(Problem::Logistic(LogisticProblem::synthetic(*n, *d, *seed, T::lit(*l2), noise)?))
            }
        }
    }

    /// Describes an existing quadratic so it can be written to a config.
    pub fn from_quadratic<T: Scalar>(q: &QuadraticProblem<T>) -> Self {
        ProblemSpec::Quadratic {
            a: q.a().to_rows().iter().map(|r| r.iter().map(|v| v.to_f64_lossy()).collect()).collect(),
            b: q.b().iter().map(|v| v.to_f64_lossy()).collect(),
            sigma_sq: q.sigma_sq().to_f64_lossy(),
            beta: q.beta().to_f64_lossy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::worker_stream;

    fn quad(diag: &[f64], b: &[f64], sigma_sq: f64) -> QuadraticProblem<f64> {
        QuadraticProblem::new(Matrix::diagonal(diag), b.to_vec(), sigma_sq).unwrap()
    }

    #[test]
    fn quadratic_gradients() {
        let q = quad(&[1.0, 1.0], &[0.0, 0.0], 0.0);
        assert_eq!(full_gradient(&q, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let q = quad(&[2.0, 1.0], &[2.0, 1.0], 0.0);
        assert_eq!(full_gradient(&q, &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            full_gradient(&q, &[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(full_gradient(&q, &[1.0]).is_err());
    }

    #[test]
    fn quadratic_values_and_constants() {
        let q = quad(&[1.0, 1.0], &[0.0, 0.0], 0.0);
        assert_eq!(objective_value(&q, &[0.0, 0.0]), 0.0);
        assert_eq!(q.f_inf(), 0.0);
        assert_eq!(objective_value(&q, &[1.0, 1.0]), 1.0);
        assert_eq!(lipschitz_constant(&quad(&[4.0, 1.0], &[0.0, 0.0], 0.0)), 4.0);
        assert_eq!(lipschitz_constant(&quad(&[1.0; 5], &[0.0; 5], 0.0)), 1.0);

        let q = quad(&[2.0, 1.0], &[2.0, 1.0], 0.0);
        // minimiser (1, 1), F = ½(2 + 1) − 3
        assert!((q.f_inf() + 1.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_pseudo_inverse_lower_bound() {
        // singular A with b in its range
        let q = quad(&[2.0, 0.0], &[4.0, 0.0], 0.0);
        assert!((q.f_inf() + 4.0).abs() < 1e-14);
        let err = QuadraticProblem::new(Matrix::diagonal(&[2.0, 0.0]), vec![4.0, 1.0], 0.0);
        assert!(matches!(err, Err(Error::Unbounded(_))));
        let indefinite = QuadraticProblem::new(Matrix::diagonal(&[1.0, -1.0]), vec![0.0, 0.0], 0.0);
        assert!(indefinite.is_err());
    }

    #[test]
    fn noiseless_draw_is_exact() {
        let q = quad(&[2.0, 1.0, 0.5], &[1.0, 0.0, -1.0], 0.0);
        let x = [0.3, -0.2, 1.0];
        let mut rng = worker_stream(3, 0);
        assert_eq!(stochastic_gradient(&q, &x, &mut rng).unwrap(), full_gradient(&q, &x).unwrap());
    }

    #[test]
    fn synthetic_quadratic_spectrum() {
        let q = QuadraticProblem::<f64>::synthetic(10, 0.1, 1.0, 5, 1.0).unwrap();
        let values = linalg::symmetric_eigenvalues(q.a()).unwrap();
        assert!((values[0] - 1.0).abs() < 1e-12);
        assert!((values[9] - 0.1).abs() < 1e-12);
        assert!((q.lipschitz() - 1.0).abs() < 1e-12);
        let g = full_gradient(&q, q.minimizer()).unwrap();
        assert!(norm_sq(&g).sqrt() < 1e-12);
    }

    #[test]
    fn logistic_zero_weights_is_ln2() {
        let features = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let labels = vec![1.0, -1.0];
        let p = LogisticProblem::new(features, labels, 0.0, LogisticNoise::MiniBatch { batch: 2 });
        // tiny separable set: no finite minimiser without ridge
        assert!(matches!(p, Err(Error::Unbounded(_))));

        let p = LogisticProblem::<f64>::synthetic(100, 10, 1, 0.01, LogisticNoise::MiniBatch { batch: 8 }).unwrap();
        assert!((p.value(&[0.0; 10]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(p.f_inf() < std::f64::consts::LN_2);
        assert!(p.lipschitz() > 0.0);
    }

    #[test]
    fn problem_spec_json() {
        let text = r#"{"type":"quadratic","A":[[1.0,0.0],[0.0,2.0]],"b":[0.0,1.0],"sigma_sq":1.0}"#;
        let spec: ProblemSpec = serde_json::from_str(text).unwrap();
        let p = spec.build::<f64>().unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.lipschitz(), 2.0);

        let text = r#"{"type":"logistic","n":50,"d":3,"seed":2,"l2":0.1,"batch":5}"#;
        let spec: ProblemSpec = serde_json::from_str(text).unwrap();
        assert!(matches!(spec.build::<f64>().unwrap(), Problem::Logistic(_)));

        let bad = r#"{"type":"quadratic","A":[[1.0]],"b":[0.0],"sigma_sq":1.0,"gamma":3}"#;
        let err = serde_json::from_str::<ProblemSpec>(bad).unwrap_err().to_string();
        assert!(err.contains("gamma"), "{err}");
    }
}
