use super::grid::{nf4_nearest, QuantGrid, QuantScheme, UniformParams};
use super::{check_bits, column_errors, QuantizationError, QuantizedLayer};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Default outlier threshold for int8 absmax quantization.
pub const INT8_OUTLIER_THRESHOLD: f64 = 6.0;
/// Default NF4 block length along a row.
pub const NF4_BLOCK_SIZE: usize = 64;

fn finish<T: Scalar>(
    w: &Matrix<T>,
    data: Vec<T>,
    grid: QuantGrid,
) -> Result<QuantizedLayer<T>, QuantizationError> {
    let dequantized = Matrix::new(w.rows(), w.cols(), data)?;
    Ok(QuantizedLayer {
        per_column_error: column_errors(w, &dequantized),
        delta_sq_norms: vec![0.0; w.cols()],
        updates: Matrix::zeros(w.rows(), w.cols()),
        dequantized,
        grid,
    })
}

/// Round-to-nearest on an asymmetric min-max grid fitted per group of
/// `group_size` consecutive entries along each row.
pub fn rtn_quantize<T: Scalar>(
    w: &Matrix<T>,
    bits: u32,
    group_size: usize,
) -> Result<QuantizedLayer<T>, QuantizationError> {
    check_bits(bits)?;
    if group_size == 0 {
        return Err(QuantizationError::EmptyGroup);
    }
    let groups_per_row = w.cols().div_ceil(group_size);
    let mut scales = Vec::with_capacity(w.rows() * groups_per_row);
    let mut zero_points = Vec::with_capacity(scales.capacity());
    let mut data = Vec::with_capacity(w.rows() * w.cols());
    for r in 0..w.rows() {
        for chunk in w.row(r).chunks(group_size) {
            let p = UniformParams::fit(chunk, bits);
            scales.push(p.scale.to_f64_lossy());
            zero_points.push(p.zero_point.to_f64_lossy() as i64);
            data.extend(chunk.iter().map(|&v| p.quantize(v)));
        }
    }
    let grid = QuantGrid {
        scheme: QuantScheme::UniformAsymmetric { bits, group_size },
        groups_per_row,
        scales,
        zero_points,
        passthrough_columns: Vec::new(),
    };
    finish(w, data, grid)
}

/// NF4: per block of `block_size` entries along a row, scale by the block absmax
/// and snap to the nearest of the 16 NormalFloat levels.
pub fn nf4_quantize<T: Scalar>(
    w: &Matrix<T>,
    block_size: usize,
) -> Result<QuantizedLayer<T>, QuantizationError> {
    if block_size == 0 {
        return Err(QuantizationError::EmptyGroup);
    }
    let groups_per_row = w.cols().div_ceil(block_size);
    let mut scales = Vec::with_capacity(w.rows() * groups_per_row);
    let mut data = Vec::with_capacity(w.rows() * w.cols());
    for r in 0..w.rows() {
        for chunk in w.row(r).chunks(block_size) {
            let absmax = chunk.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if absmax.is_zero() {
                scales.push(1.0);
                data.extend(chunk.iter().map(|_| T::zero()));
                continue;
            }
            scales.push(absmax.to_f64_lossy());
            data.extend(
                chunk
                    .iter()
                    .map(|&v| absmax * T::lit(nf4_nearest((v / absmax).to_f64_lossy()))),
            );
        }
    }
    let grid = QuantGrid {
        scheme: QuantScheme::Nf4 { block_size },
        groups_per_row,
        scales,
        zero_points: Vec::new(),
        passthrough_columns: Vec::new(),
    };
    finish(w, data, grid)
}

/// Row-wise absmax int8 (`scale = 127 / absmax`). With a threshold, every column
/// holding an entry above it in magnitude is passed through unquantized and left
/// out of the absmax.
pub fn int8_absmax_quantize<T: Scalar>(
    w: &Matrix<T>,
    outlier_threshold: Option<f64>,
) -> Result<QuantizedLayer<T>, QuantizationError> {
    let (rows, cols) = w.shape();
    let passthrough: Vec<usize> = match outlier_threshold {
        Some(t) => (0..cols)
            .filter(|&c| (0..rows).any(|r| w.get(r, c).abs().to_f64_lossy() > t))
            .collect(),
        None => Vec::new(),
    };
    let mut is_outlier = vec![false; cols];
    for &c in &passthrough {
        is_outlier[c] = true;
    }
    let q_max = T::lit(127.0);
    let mut scales = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row = w.row(r);
        let absmax = row
            .iter()
            .zip(&is_outlier)
            .filter(|(_, o)| !**o)
            .fold(T::zero(), |m, (v, _)| m.max(v.abs()));
        let scale = if absmax.is_zero() {
            T::zero()
        } else {
            q_max / absmax
        };
        scales.push(scale.to_f64_lossy());
        data.extend(row.iter().zip(&is_outlier).map(|(&v, &o)| {
            if o {
                v
            } else if scale.is_zero() {
                T::zero()
            } else {
                (v * scale).round().max(-q_max).min(q_max) / scale
            }
        }));
    }
    let grid = QuantGrid {
        scheme: QuantScheme::Int8Absmax { outlier_threshold },
        groups_per_row: 1,
        scales,
        zero_points: Vec::new(),
        passthrough_columns: passthrough,
    };
    finish(w, data, grid)
}
