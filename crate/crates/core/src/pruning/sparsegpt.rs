use super::magnitude::smallest;
use super::{row_quota, PruningError, SparsityMask};
use crate::hessian::{block_factors, propagate};
use crate::metrics::{CompressionConfig, SparsityPattern};
use crate::numerics::{damped, hessian_from_calibration, Matrix};
use crate::quantization::layer_objective;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct PruneReport<T> {
    pub mask: SparsityMask,
    /// Weights after pruning and compensation; zero exactly where the mask is.
    pub pruned_weights: Matrix<T>,
    /// `‖WX − W'X‖²` against the calibration inputs (0 when pruning from a bare Hessian).
    pub layer_objective_delta: f64,
    pub achieved_sparsity: f64,
}

/// Prune `w` (out × in) against calibration inputs `x` (in × samples).
///
/// Columns are swept left to right in blocks. Candidates are ranked by
/// `w² / [H⁻¹]ᵢᵢ`, and each pruned weight's error is pushed onto the columns not
/// yet processed.
pub fn sparsegpt_prune<T: Scalar>(
    w: &Matrix<T>,
    x: &Matrix<T>,
    target: &CompressionConfig,
    block_size: usize,
    dampening: T,
) -> Result<PruneReport<T>, PruningError> {
    if x.rows() != w.cols() {
        return Err(PruningError::CalibrationMismatch {
            weights: w.shape(),
            features: x.rows(),
        });
    }
    let h = hessian_from_calibration(x);
    let mut report = sparsegpt_prune_with_hessian(w, &h, target, block_size, dampening)?;
    report.layer_objective_delta = layer_objective(w, &report.pruned_weights, x)?;
    Ok(report)
}

/// As [`sparsegpt_prune`], with the layer Hessian supplied directly.
pub fn sparsegpt_prune_with_hessian<T: Scalar>(
    w: &Matrix<T>,
    h: &Matrix<T>,
    target: &CompressionConfig,
    block_size: usize,
    dampening: T,
) -> Result<PruneReport<T>, PruningError> {
    let (rows, cols) = w.shape();
    if h.shape() != (cols, cols) {
        return Err(PruningError::CalibrationMismatch {
            weights: w.shape(),
            features: h.rows(),
        });
    }
    let quota = row_quota(target, cols)?;
    if quota == 0 {
        return Ok(PruneReport {
            mask: SparsityMask::all_ones(rows, cols),
            pruned_weights: w.clone(),
            layer_objective_delta: 0.0,
            achieved_sparsity: 0.0,
        });
    }
    let (h, _) = damped(h, dampening)?;
    let factors = block_factors(&h, block_size)?;
    let mut out = w.clone();
    let mut keep = vec![true; rows * cols];
    for r in 0..rows {
        let row = out.row_mut(r);
        let kept = &mut keep[r * cols..(r + 1) * cols];
        let mut remaining = quota;
        for f in &factors {
            let saliency = |row: &[T], c: usize| row[c] * row[c] / f.inv_diag[c - f.start];
            if let SparsityPattern::Unstructured = target.pattern() {
                // Rank everything not yet processed; commit the picks inside this block.
                let scores: Vec<_> = (f.start..cols).map(|c| (c, saliency(row, c))).collect();
                for c in smallest(&scores, remaining) {
                    if c < f.end {
                        kept[c] = false;
                        remaining -= 1;
                    }
                }
            }
            for j in f.start..f.end {
                if let SparsityPattern::Nm(nm) = target.pattern() {
                    if j % nm.m_group == 0 {
                        let scores: Vec<_> =
                            (j..j + nm.m_group).map(|c| (c, saliency(row, c))).collect();
                        for c in smallest(&scores, nm.n_pruned) {
                            kept[c] = false;
                        }
                    }
                }
                if kept[j] {
                    continue;
                }
                let err = row[j] / f.upper(j - f.start, j - f.start);
                row[j] = T::zero();
                propagate(row, f, j, err, None);
            }
        }
    }
    let mask = SparsityMask::from_keep(rows, cols, keep)?;
    Ok(PruneReport {
        achieved_sparsity: mask.sparsity(),
        mask,
        pruned_weights: out,
        layer_objective_delta: 0.0,
    })
}
