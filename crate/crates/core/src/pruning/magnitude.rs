use super::{row_quota, PruningError, SparsityMask};
use crate::hessian::cmp_scalar;
use crate::metrics::{CompressionConfig, SparsityPattern};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Indices of the `k` smallest scores, ties to the lower index.
pub(crate) fn smallest<T: Scalar>(scores: &[(usize, T)], k: usize) -> Vec<usize> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| cmp_scalar(a.1, b.1).then(a.0.cmp(&b.0)));
    sorted.into_iter().take(k).map(|(i, _)| i).collect()
}

/// Prune the smallest-magnitude weights of each row, honoring the pattern.
/// Weights are not modified.
pub fn magnitude_mask<T: Scalar>(
    w: &Matrix<T>,
    target: &CompressionConfig,
) -> Result<SparsityMask, PruningError> {
    let (rows, cols) = w.shape();
    let quota = row_quota(target, cols)?;
    let mut keep = vec![true; rows * cols];
    for r in 0..rows {
        let row = w.row(r);
        let pruned = match target.pattern() {
            SparsityPattern::Nm(nm) => (0..cols)
                .step_by(nm.m_group)
                .flat_map(|g| {
                    let scores: Vec<_> = (g..g + nm.m_group).map(|c| (c, row[c].abs())).collect();
                    smallest(&scores, nm.n_pruned)
                })
                .collect(),
            _ => {
                let scores: Vec<_> = row.iter().map(|v| v.abs()).enumerate().collect();
                smallest(&scores, quota)
            }
        };
        for c in pruned {
            keep[r * cols + c] = false;
        }
    }
    Ok(SparsityMask::from_keep(rows, cols, keep)?)
}
