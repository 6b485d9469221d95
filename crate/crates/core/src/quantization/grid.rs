use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// The 16 NormalFloat4 levels on `[-1, 1]`.
pub const NF4_LEVELS: [f64; 16] = [
    -1.0,
    -0.696_192_800_998_687_7,
    -0.525_073_051_452_636_7,
    -0.394_917_488_098_144_53,
    -0.284_441_381_692_886_35,
    -0.184_773_430_228_233_34,
    -0.091_050_036_251_544_95,
    0.0,
    0.079_580_299_556_255_34,
    0.160_930_201_411_247_25,
    0.246_112_301_945_686_34,
    0.337_915_241_718_292_24,
    0.440_709_829_330_444_34,
    0.562_617_003_917_694_1,
    0.722_956_836_223_602_3,
    1.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantScheme {
    UniformAsymmetric { bits: u32, group_size: usize },
    Nf4 { block_size: usize },
    Int8Absmax { outlier_threshold: Option<f64> },
}

impl QuantScheme {
    pub fn bits(&self) -> u32 {
        match self {
            Self::UniformAsymmetric { bits, .. } => *bits,
            Self::Nf4 { .. } => 4,
            Self::Int8Absmax { .. } => 8,
        }
    }

    pub fn group_size(&self) -> Option<usize> {
        match self {
            Self::UniformAsymmetric { group_size, .. } => Some(*group_size),
            Self::Nf4 { block_size } => Some(*block_size),
            Self::Int8Absmax { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformAsymmetric { .. } => "uniform_asymmetric",
            Self::Nf4 { .. } => "nf4",
            Self::Int8Absmax { .. } => "int8_absmax",
        }
    }
}

/// Per-group parameters of a quantized layer. Groups are laid out row-major:
/// group `g` of row `r` sits at `r * groups_per_row + g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantGrid {
    pub scheme: QuantScheme,
    pub groups_per_row: usize,
    /// Uniform: step between levels. NF4: block absmax. Int8: `127 / absmax`.
    pub scales: Vec<f64>,
    /// Uniform scheme only.
    pub zero_points: Vec<i64>,
    /// Int8 columns left unquantized because they hold outliers.
    pub passthrough_columns: Vec<usize>,
}

/// Asymmetric uniform grid `scale · (k − zero_point)` for `k ∈ [0, 2^bits − 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformParams<T> {
    pub scale: T,
    pub zero_point: T,
    pub max_level: T,
}

impl<T: Scalar> UniformParams<T> {
    /// Min-max fit over `values` with 0 forced into the range. A degenerate range
    /// gets scale 1 and zero point 0.
    pub fn fit(values: &[T], bits: u32) -> Self {
        let max_level = T::lit(((1u64 << bits) - 1) as f64);
        let (lo, hi) = values.iter().fold((T::zero(), T::zero()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if hi == lo {
            return Self {
                scale: T::one(),
                zero_point: T::zero(),
                max_level,
            };
        }
        let scale = (hi - lo) / max_level;
        Self {
            scale,
            zero_point: (-lo / scale).round(),
            max_level,
        }
    }

    pub fn fixed(scale: T, zero_point: i64, bits: u32) -> Self {
        Self {
            scale,
            zero_point: T::lit(zero_point as f64),
            max_level: T::lit(((1u64 << bits) - 1) as f64),
        }
    }

    /// Integer level of `v`, rounding half away from zero.
    pub fn level(&self, v: T) -> T {
        ((v / self.scale).round() + self.zero_point)
            .max(T::zero())
            .min(self.max_level)
    }

    pub fn dequantize(&self, level: T) -> T {
        self.scale * (level - self.zero_point)
    }

    pub fn quantize(&self, v: T) -> T {
        self.dequantize(self.level(v))
    }

    /// Every representable value, ascending.
    pub fn levels(&self) -> Vec<T> {
        let n = self.max_level.to_f64_lossy() as usize;
        (0..=n).map(|k| self.dequantize(T::lit(k as f64))).collect()
    }
}

/// Variance of uniform rounding noise for a grid step: `scale² / 12`.
pub fn uniform_noise_variance(scale: f64) -> f64 {
    scale * scale / 12.0
}

/// Nearest NF4 level to `v` on the normalized scale; ties go to the lower level.
pub fn nf4_nearest(v: f64) -> f64 {
    let mut best = NF4_LEVELS[0];
    for &l in &NF4_LEVELS[1..] {
        if (v - l).abs() < (v - best).abs() {
            best = l;
        }
    }
    best
}
