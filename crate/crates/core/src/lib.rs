//! Transport in binary Markovian stochastic slabs.
//!
//! Per-realization benchmark ensembles, the Levermore-Pomraning model and its
//! adjusted (rescaled transition length) variant, the atomic-mix
//! approximation, and their asymptotic diffusion limits.
//!
//! Solvers are generic over [`Real`] (`f32`/`f64`); the `*64` aliases below are
//! the double-precision instantiations the CLI and reports use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diffusion;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod mixing;
pub mod num;
pub mod report;
pub mod sn;

pub use error::{Error, Result};
pub use num::Real;

pub type MaterialSpec64 = mixing::MaterialSpec<f64>;
pub type MixingStats64 = mixing::MixingStats<f64>;
pub type AveragedSpec64 = mixing::AveragedSpec<f64>;
pub type Realization64 = mixing::Realization<f64>;
pub type Quadrature64 = sn::Quadrature<f64>;
pub type Mesh64 = sn::Mesh<f64>;
pub type FluxField64 = sn::FluxField<f64>;
pub type LpProblem64 = lp::LpProblem<f64>;
pub type LpSolution64 = lp::LpSolution<f64>;
pub type DiffusionProblem64 = diffusion::DiffusionProblem<f64>;
pub type EnsembleStats64 = ensemble::EnsembleStats<f64>;

pub type MaterialSpec32 = mixing::MaterialSpec<f32>;
pub type MixingStats32 = mixing::MixingStats<f32>;
pub type Quadrature32 = sn::Quadrature<f32>;
pub type Mesh32 = sn::Mesh<f32>;
pub type FluxField32 = sn::FluxField<f32>;
pub type LpProblem32 = lp::LpProblem<f32>;
