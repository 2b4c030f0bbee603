//! Toolkit for the quadratic Schrödinger system
//!
//! ```text
//!     i ∂t u + Δu   = v ū
//!     i ∂t v + κ Δv = u²        κ > 0
//! ```
//!
//! posed either on radially symmetric data in five dimensions (truncated to a
//! ball with a Dirichlet boundary) or on a periodic one-dimensional box.
//!
//! The crate provides
//! * spectral grids with self-adjoint discrete Laplacians ([`fields`]),
//! * every conserved and variational functional of the system ([`functionals`]),
//! * a renormalized fixed-point solver for ground states of the associated
//!   elliptic system ([`ground_state`]),
//! * exact linear flows and Strang-split time stepping with an optional
//!   absorbing layer ([`propagators`]),
//! * trajectory diagnostics: scattering/blow-up classification, virial-rate
//!   checks, Galilean covariance at the mass-resonance coupling κ = 1/2,
//!   and S-norm monitoring ([`diagnostics`]),
//! * a config-driven CLI with reproducible experiment presets ([`cli_io`]).
//!
//! All numerical kernels are generic over the scalar type through [`Real`];
//! `f64` aliases are exported at the crate root and are what the CLI uses.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

pub mod cli_io;
pub mod diagnostics;
pub mod fields;
pub mod functionals;
pub mod ground_state;
pub mod propagators;

/// Scalar type the numerical core is generic over. Implemented by `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Sum
    + fmt::Display
    + fmt::LowerExp
    + fmt::Debug
    + Default
    + Send
    + Sync
    + rustfft::FftNum
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssignOps
        + Sum
        + fmt::Display
        + fmt::LowerExp
        + fmt::Debug
        + Default
        + Send
        + Sync
        + rustfft::FftNum
{
}

/// Convert an `f64` literal into the working scalar type.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal must be representable in the scalar type")
}

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid state: {0}")]
    State(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub type Grid64 = fields::Grid<f64>;
pub type Grid32 = fields::Grid<f32>;
pub type FieldPair64 = fields::FieldPair<f64>;
pub type FieldPair32 = fields::FieldPair<f32>;
pub type PhysicsParams64 = fields::PhysicsParams<f64>;
pub type FunctionalReport64 = functionals::FunctionalReport<f64>;
pub type GroundState64 = ground_state::GroundState<f64>;
pub type EvolveOptions64 = propagators::EvolveOptions<f64>;
pub type TrajectoryRecord64 = diagnostics::TrajectoryRecord<f64>;
