//! Per-block inverse-Hessian factors shared by the pruning and quantization sweeps.

use crate::numerics::{cholesky, invert_psd, Matrix, NumericsError};
use crate::scalar::Scalar;

/// Inverse-Hessian information for the columns `start..n` that remain unprocessed
/// when a block begins.
pub(crate) struct BlockFactor<T> {
    pub start: usize,
    pub end: usize,
    /// Diagonal of `inv(H[start.., start..])`.
    pub inv_diag: Vec<T>,
    /// Upper Cholesky factor `U` of that inverse (`inverse = Uᵀ U`), stored as its
    /// transpose so that `upper(a, b) = lower.get(b, a)`.
    lower: Matrix<T>,
}

impl<T: Scalar> BlockFactor<T> {
    /// Entry `U[a][b]` with indices relative to `start`.
    #[inline]
    pub fn upper(&self, a: usize, b: usize) -> T {
        self.lower.get(b, a)
    }
}

/// Refactor the trailing inverse at every block boundary of the damped Hessian.
pub(crate) fn block_factors<T: Scalar>(
    damped: &Matrix<T>,
    block_size: usize,
) -> Result<Vec<BlockFactor<T>>, NumericsError> {
    let n = damped.rows();
    let block_size = block_size.max(1);
    let mut out = Vec::with_capacity(n.div_ceil(block_size));
    let mut start = 0;
    while start < n {
        let end = (start + block_size).min(n);
        let inverse = invert_psd(&damped.trailing_block(start), T::zero())?;
        let lower = cholesky(&inverse)?;
        out.push(BlockFactor {
            start,
            end,
            inv_diag: inverse.diag(),
            lower,
        });
        start = end;
    }
    Ok(out)
}

/// Push the error of column `j` onto every later column of `row`:
/// `row[k] -= err · U[j][k]`, skipping `frozen` positions.
#[inline]
pub(crate) fn propagate<T: Scalar>(
    row: &mut [T],
    factor: &BlockFactor<T>,
    j: usize,
    err: T,
    frozen: Option<&[bool]>,
) {
    let a = j - factor.start;
    for k in (j + 1)..row.len() {
        if frozen.is_some_and(|f| f[k]) {
            continue;
        }
        row[k] = row[k] - err * factor.upper(a, k - factor.start);
    }
}

/// Total order over scalars for deterministic selection (NaN sorts last).
pub(crate) fn cmp_scalar<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.to_f64_lossy().total_cmp(&b.to_f64_lossy())
}
