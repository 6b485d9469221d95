//! Weight quantizers: round-to-nearest, NF4, absmax int8 and GPTQ.
//!
//! GPTQ runs in two modes after pruning. The full mode quantizes every weight and
//! lets updates move pruned positions. The masked mode keeps pruned positions at
//! exactly zero and routes error through the masked Hessian only.

mod gptq;
mod grid;
mod simple;

pub use gptq::{gptq_quantize, gptq_quantize_with_hessian, GptqConfig, GridMode, MaskMode};
pub use grid::{
    nf4_nearest, uniform_noise_variance, QuantGrid, QuantScheme, UniformParams, NF4_LEVELS,
};
pub use simple::{
    int8_absmax_quantize, nf4_quantize, rtn_quantize, INT8_OUTLIER_THRESHOLD, NF4_BLOCK_SIZE,
};

use serde::Serialize;
use thiserror::Error;

use crate::numerics::{matmul, Matrix, NumericsError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum QuantizationError {
    #[error("unsupported bit-width {0} (expected 1..=16)")]
    InvalidBits(u32),
    #[error("group size must be positive")]
    EmptyGroup,
    #[error("mask is {mask:?} but weights are {weights:?}")]
    MaskShape {
        mask: (usize, usize),
        weights: (usize, usize),
    },
    #[error("masked mode needs a sparsity mask")]
    MissingMask,
    #[error("weights are {weights:?} but the Hessian is {hessian:?}")]
    HessianShape {
        weights: (usize, usize),
        hessian: (usize, usize),
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl QuantizationError {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Numerics(e) if e.is_numerical())
    }
}

pub(crate) fn check_bits(bits: u32) -> Result<(), QuantizationError> {
    if (1..=16).contains(&bits) {
        Ok(())
    } else {
        Err(QuantizationError::InvalidBits(bits))
    }
}

#[derive(Debug, Clone)]
pub struct QuantizedLayer<T> {
    pub dequantized: Matrix<T>,
    pub grid: QuantGrid,
    /// `E_j = ‖w_j + δ_j − q_j‖²` per column, over the positions that were quantized.
    pub per_column_error: Vec<f64>,
    /// `‖δ_j‖²` per column: squared norm of the updates accumulated before quantizing.
    pub delta_sq_norms: Vec<f64>,
    /// The accumulated update `δ` for every entry (zero for one-shot quantizers).
    pub updates: Matrix<T>,
}

/// JSON metadata written next to a dequantized matrix.
#[derive(Debug, Clone, Serialize)]
pub struct QuantSidecar<'a> {
    pub scheme: &'static str,
    pub bits: u32,
    pub group_size: Option<usize>,
    pub per_column_error: &'a [f64],
    pub delta_sq_norms: &'a [f64],
}

impl<T: Scalar> QuantizedLayer<T> {
    pub fn sidecar(&self) -> QuantSidecar<'_> {
        QuantSidecar {
            scheme: self.grid.scheme.name(),
            bits: self.grid.scheme.bits(),
            group_size: self.grid.scheme.group_size(),
            per_column_error: &self.per_column_error,
            delta_sq_norms: &self.delta_sq_norms,
        }
    }

    pub fn total_error(&self) -> f64 {
        self.per_column_error.iter().sum()
    }

    pub fn total_delta_sq(&self) -> f64 {
        self.delta_sq_norms.iter().sum()
    }
}

/// Squared distance per column between two equally shaped matrices.
pub(crate) fn column_errors<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Vec<f64> {
    let mut out = vec![0.0; a.cols()];
    for r in 0..a.rows() {
        for (c, (&x, &y)) in a.row(r).iter().zip(b.row(r)).enumerate() {
            let d = (x - y).to_f64_lossy();
            out[c] += d * d;
        }
    }
    out
}

/// `‖WX − ŴX‖²`.
pub fn layer_objective<T: Scalar>(
    w: &Matrix<T>,
    w_hat: &Matrix<T>,
    x: &Matrix<T>,
) -> Result<f64, NumericsError> {
    let diff = w.sub(w_hat)?;
    Ok(matmul(&diff, x)?.frobenius_sq().to_f64_lossy())
}

/// `Σ_r d_r H d_rᵀ` with `d = W − Ŵ`; equals twice [`layer_objective`] when `H = 2XXᵀ`.
pub fn hessian_objective<T: Scalar>(
    w: &Matrix<T>,
    w_hat: &Matrix<T>,
    h: &Matrix<T>,
) -> Result<f64, NumericsError> {
    let diff = w.sub(w_hat)?;
    let dh = matmul(&diff, h)?;
    let mut total = 0.0;
    for r in 0..diff.rows() {
        for (&a, &b) in diff.row(r).iter().zip(dh.row(r)) {
            total += (a * b).to_f64_lossy();
        }
    }
    Ok(total)
}
