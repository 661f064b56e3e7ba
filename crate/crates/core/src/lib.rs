//! Stochastic transition kernels and their lifts to quantum channels.
//!
//! The crate is organised around the stochastic side ([`kernels`]), the
//! operator side and the kernel/channel dictionary ([`lifts`]), CK-divisible
//! lifted families and Lindblad generators ([`dynamics`]), phase memory and
//! readout channels ([`memory`]), and divisibility criteria ([`division`]).
//!
//! All numerical code is generic over a [`Real`] scalar (`f32` or `f64`);
//! the linear feasibility solver in [`simplex`] additionally runs on exact
//! rationals. The aliases at the crate root fix the scalar to `f64`.

// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod division;
pub mod dynamics;
pub mod error;
pub mod formats;
pub mod kernels;
pub mod lifts;
pub mod linalg;
pub mod memory;
pub mod random;
pub mod scalar;
pub mod simplex;
pub mod tolerance;

pub use error::{Error, Result};
pub use scalar::Real;
pub use simplex::LpScalar;
pub use tolerance::Tolerances;

pub use linalg::{CMatrix, RMatrix};

/// Exact rational scalar accepted by the simplex solver.
pub type Rational = num_rational::BigRational;

pub type ProbabilityVector = kernels::ProbabilityVector<f64>;
pub type StochasticKernel = kernels::StochasticKernel<f64>;
pub type RateMatrix = kernels::RateMatrix<f64>;
pub type KernelFamily = kernels::KernelFamily<f64>;
pub type DensityOperator = lifts::DensityOperator<f64>;
pub type KrausMap = lifts::KrausMap<f64>;
pub type LeftRightMap = lifts::LeftRightMap<f64>;
pub type SuperOperator = lifts::SuperOperator<f64>;
pub type ChoiMatrix = lifts::ChoiMatrix<f64>;
pub type GkslGenerator = dynamics::GkslGenerator<f64>;
pub type SuperOperatorFamily = dynamics::SuperOperatorFamily<f64>;
pub type PovmEffects = memory::PovmEffects<f64>;
pub type DivisionVerdict = division::DivisionVerdict<f64>;

pub type StochasticKernelF32 = kernels::StochasticKernel<f32>;
pub type KrausMapF32 = lifts::KrausMap<f32>;
pub type SuperOperatorF32 = lifts::SuperOperator<f32>;
