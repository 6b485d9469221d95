//! One-shot pruning with Hessian-based error compensation.
//!
//! N:M patterns prune `n` of every `m` consecutive weights along a row (2:8 is 25%
//! sparsity). Groups are aligned at column 0.

mod magnitude;
mod mask;
mod sparsegpt;

pub use magnitude::magnitude_mask;
pub use mask::{mask_overhead_bits, validate_mask, MaskValidation, MaskViolation, SparsityMask};
pub use sparsegpt::{sparsegpt_prune, sparsegpt_prune_with_hessian, PruneReport};

use thiserror::Error;

use crate::metrics::{CompressionConfig, SparsityPattern};
use crate::numerics::NumericsError;
use crate::Rational;

#[derive(Debug, Error)]
pub enum PruningError {
    #[error("group size {m_group} does not divide row length {cols}")]
    GroupMisaligned { cols: usize, m_group: usize },
    #[error("weights are {weights:?} but calibration inputs have {features} features")]
    CalibrationMismatch {
        weights: (usize, usize),
        features: usize,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl PruningError {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Numerics(e) if e.is_numerical())
    }
}

/// Number of weights to prune in each row of length `cols`.
pub(crate) fn row_quota(target: &CompressionConfig, cols: usize) -> Result<usize, PruningError> {
    match target.pattern() {
        SparsityPattern::Nm(nm) => {
            if !cols.is_multiple_of(nm.m_group) {
                return Err(PruningError::GroupMisaligned {
                    cols,
                    m_group: nm.m_group,
                });
            }
            Ok(cols / nm.m_group * nm.n_pruned)
        }
        _ => Ok((target.sparsity() * Rational::from_integer(cols as i64))
            .round()
            .to_integer() as usize),
    }
}
