use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::grid::{QuantGrid, QuantScheme, UniformParams};
use super::{check_bits, QuantizationError, QuantizedLayer};
use crate::hessian::{block_factors, propagate, BlockFactor};
use crate::numerics::{damped, hessian_from_calibration, Matrix};
use crate::pruning::SparsityMask;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Quantize every weight; pruned zeros are ordinary weights that updates may move.
    FullCaseA,
    /// Pruned positions stay zero, contribute no error and are cut out of the Hessian.
    MaskedCaseB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridMode {
    /// Min-max grid refitted at the start of every group.
    MinMax,
    /// One fixed grid `scale · (k − zero_point)` for the whole layer.
    Fixed { scale: f64, zero_point: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GptqConfig {
    pub bits: u32,
    pub group_size: usize,
    pub block_size: usize,
    pub dampening: f64,
    pub grid: GridMode,
}

impl Default for GptqConfig {
    fn default() -> Self {
        Self {
            bits: 4,
            group_size: 128,
            block_size: 128,
            dampening: 0.01,
            grid: GridMode::MinMax,
        }
    }
}

impl GptqConfig {
    pub fn with_bits(bits: u32) -> Self {
        Self {
            bits,
            ..Self::default()
        }
    }
}

/// GPTQ on `w` (out × in) with calibration inputs `x` (in × samples).
pub fn gptq_quantize<T: Scalar>(
    w: &Matrix<T>,
    x: &Matrix<T>,
    config: &GptqConfig,
    mask: Option<&SparsityMask>,
    mode: MaskMode,
) -> Result<QuantizedLayer<T>, QuantizationError> {
    if x.rows() != w.cols() {
        return Err(QuantizationError::HessianShape {
            weights: w.shape(),
            hessian: (x.rows(), x.rows()),
        });
    }
    gptq_quantize_with_hessian(w, &hessian_from_calibration(x), config, mask, mode)
}

/// Zero the off-diagonal Hessian entries touching a pruned coordinate.
fn masked_hessian<T: Scalar>(h: &Matrix<T>, keep: &[bool]) -> Matrix<T> {
    let n = h.rows();
    let mut out = h.clone();
    for i in 0..n {
        for j in 0..n {
            if i != j && !(keep[i] && keep[j]) {
                out.set(i, j, T::zero());
            }
        }
    }
    out
}

/// As [`gptq_quantize`], with the layer Hessian supplied directly.
///
/// Columns are processed left to right. Each column's rounding error is pushed onto
/// the later columns through the upper Cholesky factor of the inverse Hessian, which
/// is refactored at every block boundary.
pub fn gptq_quantize_with_hessian<T: Scalar>(
    w: &Matrix<T>,
    h: &Matrix<T>,
    config: &GptqConfig,
    mask: Option<&SparsityMask>,
    mode: MaskMode,
) -> Result<QuantizedLayer<T>, QuantizationError> {
    check_bits(config.bits)?;
    if config.group_size == 0 {
        return Err(QuantizationError::EmptyGroup);
    }
    let (rows, cols) = w.shape();
    if h.shape() != (cols, cols) {
        return Err(QuantizationError::HessianShape {
            weights: w.shape(),
            hessian: h.shape(),
        });
    }
    if let Some(m) = mask {
        if m.shape() != w.shape() {
            return Err(QuantizationError::MaskShape {
                mask: m.shape(),
                weights: w.shape(),
            });
        }
    }
    let mask = match mode {
        MaskMode::FullCaseA => None,
        MaskMode::MaskedCaseB => Some(mask.ok_or(QuantizationError::MissingMask)?),
    };

    let dampening = T::lit(config.dampening);
    let all_kept = vec![true; cols];
    let mut factor_cache: HashMap<Vec<bool>, Vec<BlockFactor<T>>> = HashMap::new();
    let groups_per_row = cols.div_ceil(config.group_size);
    let mut scales = Vec::with_capacity(rows * groups_per_row);
    let mut zero_points = Vec::with_capacity(rows * groups_per_row);
    let mut dequantized = Matrix::zeros(rows, cols);
    let mut updates = Matrix::zeros(rows, cols);
    let mut per_column_error = vec![0.0; cols];
    let mut delta_sq_norms = vec![0.0; cols];

    for r in 0..rows {
        let keep = mask.map_or(all_kept.as_slice(), |m| m.row(r));
        if !factor_cache.contains_key(keep) {
            let (hm, _) = damped(&masked_hessian(h, keep), dampening)?;
            factor_cache.insert(keep.to_vec(), block_factors(&hm, config.block_size)?);
        }
        let factors = &factor_cache[keep];
        let frozen: Option<Vec<bool>> = mask.map(|_| keep.iter().map(|k| !k).collect());
        let original = w.row(r);
        let mut current: Vec<T> = original
            .iter()
            .zip(keep)
            .map(|(&v, &k)| if k { v } else { T::zero() })
            .collect();
        let mut params = UniformParams::fixed(T::one(), 0, config.bits);
        for f in factors {
            for j in f.start..f.end {
                if j % config.group_size == 0 {
                    params = match config.grid {
                        GridMode::MinMax => {
                            let end = (j + config.group_size).min(cols);
                            UniformParams::fit(&current[j..end], config.bits)
                        }
                        GridMode::Fixed { scale, zero_point } => {
                            UniformParams::fixed(T::lit(scale), zero_point, config.bits)
                        }
                    };
                    scales.push(params.scale.to_f64_lossy());
                    zero_points.push(params.zero_point.to_f64_lossy() as i64);
                }
                if !keep[j] {
                    continue;
                }
                let delta = current[j] - original[j];
                updates.set(r, j, delta);
                delta_sq_norms[j] += (delta * delta).to_f64_lossy();
                let q = params.quantize(current[j]);
                let e = current[j] - q;
                per_column_error[j] += (e * e).to_f64_lossy();
                dequantized.set(r, j, q);
                let err = e / f.upper(j - f.start, j - f.start);
                propagate(&mut current, f, j, err, frozen.as_deref());
            }
        }
    }

    Ok(QuantizedLayer {
        dequantized,
        grid: QuantGrid {
            scheme: QuantScheme::UniformAsymmetric {
                bits: config.bits,
                group_size: config.group_size,
            },
            groups_per_row,
            scales,
            zero_points,
            passthrough_columns: Vec::new(),
        },
        per_column_error,
        delta_sq_norms,
        updates,
    })
}
