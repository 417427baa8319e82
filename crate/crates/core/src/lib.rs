//! Recovery of the potential `c(x)` in `u_tt = Δu + c(x) F(x, u, u_t, ∇u)`
//! from lateral Cauchy data, by a Carleman-weighted contraction iteration on
//! the Fourier coefficients of `u` in a special time basis.

// `!(x > 0.0)` style checks are there to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod config;
pub mod driver;
pub mod elliptic;
pub mod error;
pub mod fixed;
pub mod forward;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod quadrature;
pub mod reconstruct;
pub mod rng;
pub mod scalar;
pub mod time_basis;

pub use error::{Error, Result};
pub use scalar::{BasisField, Scalar};

/// `f64` instances of the generic types.
pub type Grid = grid::SpatialGrid<f64>;
pub type Basis = time_basis::TimeBasis<f64>;
pub type Field = elliptic::FourierField<f64>;
pub type System = elliptic::EllipticSystem<f64>;
pub type Weight = carleman::CarlemanWeight<f64>;
pub type Data = forward::CauchyData<f64>;
pub type Vectors = forward::BoundaryVectors<f64>;
pub type PotentialGrid = forward::Potential<f64>;
pub type History = driver::RunHistory<f64>;
