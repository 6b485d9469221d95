//! Minimal dense linear algebra for the Hessian-based compressors.

mod io;
mod linalg;
mod matrix;

pub use io::{
    read_matrix, read_matrix_csv, read_srcrmat, write_matrix_csv, write_srcrmat, MATRIX_MAGIC,
    MAX_CSV_DIM,
};
pub use linalg::{cholesky, damped, hessian_from_calibration, invert_psd, matmul, reconstruct};
pub use matrix::Matrix;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {op} got {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("data length {len} does not match {rows}x{cols}")]
    BadLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix still not invertible after dampening {dampening}")]
    Singular {
        dampening: f64,
        #[source]
        source: Box<NumericsError>,
    },
    #[error("matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NumericsError {
    /// Failure of the arithmetic itself rather than of the input's shape or encoding.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Self::NotPositiveDefinite { .. } | Self::Singular { .. }
        )
    }
}
