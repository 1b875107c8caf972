//! Simulator and analysis toolkit for cooperative SGD `A(τ, W, v)`.
//!
//! Workers take local stochastic gradient steps and are mixed by a doubly
//! stochastic matrix `W` every `τ` iterations, optionally alongside `v`
//! auxiliary variables. Periodic averaging, elastic averaging and decentralized
//! SGD are all instances.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mixing;
pub mod objectives;
pub mod rng;
pub mod scalar;
pub mod theory;
pub mod timeline;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MatrixF64 = linalg::Matrix<f64>;
pub type MatrixF32 = linalg::Matrix<f32>;
pub type MixingMatrixF64 = mixing::MixingMatrix<f64>;
pub type MixingMatrixF32 = mixing::MixingMatrix<f32>;
pub type ParamMatrixF64 = engine::ParamMatrix<f64>;
pub type ParamMatrixF32 = engine::ParamMatrix<f32>;
pub type AlgorithmConfigF64 = engine::AlgorithmConfig<f64>;
pub type AlgorithmConfigF32 = engine::AlgorithmConfig<f32>;
pub type QuadraticF64 = objectives::QuadraticProblem<f64>;
pub type QuadraticF32 = objectives::QuadraticProblem<f32>;
pub type LogisticF64 = objectives::LogisticProblem<f64>;
pub type LogisticF32 = objectives::LogisticProblem<f32>;
pub type ProblemF64 = objectives::Problem<f64>;
pub type ProblemF32 = objectives::Problem<f32>;
pub type BoundInputsF64 = theory::BoundInputs<f64>;
pub type BoundInputsF32 = theory::BoundInputs<f32>;
pub type BoundReportF64 = theory::BoundReport<f64>;
pub type BoundReportF32 = theory::BoundReport<f32>;
