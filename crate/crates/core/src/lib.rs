//! Joint pruning and quantization analysis toolkit.
//!
//! * [`metrics`]: theoretical compression rate, retention, and SrCr metrics.
//! * [`numerics`]: dense matrices, Cholesky, damped inverses, matrix files.
//! * [`pruning`]: Hessian-compensated one-shot pruning with N:M support.
//! * [`quantization`]: RTN, NF4, absmax int8 and GPTQ (full and masked variants).
//! * [`error_lab`]: seeded synthetic-layer experiments on sequential compression error.
//! * [`results`]: score tables, retention reports, tables and plot data.
//!
//! Matrix code is generic over [`Scalar`] (`f32`/`f64`); the aliases below fix the
//! precision used by the experiment and reporting layers.

pub mod error_lab;
mod hessian;
pub mod metrics;
pub mod numerics;
pub mod pruning;
pub mod quantization;
pub mod results;
mod scalar;

pub use scalar::Scalar;

/// Exact rational used for sparsities, bit-widths and compression rates.
pub type Rational = num_rational::Ratio<i64>;
/// Double-precision dense matrix.
pub type DenseMatrix = numerics::Matrix<f64>;
/// Single-precision dense matrix.
pub type DenseMatrixF32 = numerics::Matrix<f32>;
