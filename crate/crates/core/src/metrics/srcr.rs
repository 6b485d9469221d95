//! Semantic-retention compression rates.
//!
//! Each variant scales a retention value by a compression-aggressiveness factor:
//! `√p` for pruning, `-log₂(q/16)/4` for quantization (1 at 1-bit), their product
//! for joint compression.

use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::{CompressionConfig, ConfigKind, MetricsError, BASELINE_BITS};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrcrBreakdown {
    pub config: CompressionConfig,
    pub sr: f64,
    pub compression_factor: f64,
    pub srcr: f64,
}

impl SrcrBreakdown {
    fn new(config: CompressionConfig, sr: f64, compression_factor: f64) -> Self {
        Self {
            config,
            sr,
            compression_factor,
            srcr: compression_factor * sr,
        }
    }
}

fn check_sr(sr: f64) -> Result<(), MetricsError> {
    if sr >= 0.0 && sr.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::NegativeRetention(sr))
    }
}

pub fn pruning_factor(sparsity: Rational) -> f64 {
    sparsity.to_f64().unwrap_or(f64::NAN).sqrt()
}

/// `-log₂(bits/16) / 4`; 0 at 16 bits, 1 at 1 bit.
pub fn quantization_factor(bits: Rational) -> f64 {
    let ratio = (bits / Rational::from_integer(BASELINE_BITS))
        .to_f64()
        .unwrap_or(f64::NAN);
    let f = -ratio.log2() / 4.0;
    // log2(1) is exactly 0 but negates to -0.0
    if f == 0.0 {
        0.0
    } else {
        f
    }
}

/// Bit-widths below 1 would push the factor past its maximum of 1.
fn check_bits(bits: Rational) -> Result<(), MetricsError> {
    if bits < Rational::from_integer(1) || bits > Rational::from_integer(BASELINE_BITS) {
        return Err(MetricsError::BitsOutOfRange(bits.to_string()));
    }
    Ok(())
}

pub fn srcr_pruning(sparsity: Rational, sr: f64) -> Result<SrcrBreakdown, MetricsError> {
    check_sr(sr)?;
    let config = CompressionConfig::pruning(sparsity)?;
    Ok(SrcrBreakdown::new(config, sr, pruning_factor(sparsity)))
}

pub fn srcr_quantization(bits: Rational, sr: f64) -> Result<SrcrBreakdown, MetricsError> {
    check_sr(sr)?;
    check_bits(bits)?;
    let config = CompressionConfig::quantization(bits)?;
    Ok(SrcrBreakdown::new(config, sr, quantization_factor(bits)))
}

/// Joint rate; zero when the configuration is not actually joint.
pub fn srcr_joint(config: &CompressionConfig, sr: f64) -> Result<SrcrBreakdown, MetricsError> {
    check_sr(sr)?;
    check_bits(config.bits())?;
    let factor = if config.sparsity().is_zero() || !config.is_quantized() {
        0.0
    } else {
        quantization_factor(config.bits()) * pruning_factor(config.sparsity())
    };
    Ok(SrcrBreakdown::new(*config, sr, factor))
}

/// The variant matching the configuration's kind (baseline scores 0).
pub fn srcr_for_config(config: &CompressionConfig, sr: f64) -> Result<SrcrBreakdown, MetricsError> {
    match config.kind() {
        ConfigKind::Baseline => {
            check_sr(sr)?;
            Ok(SrcrBreakdown::new(*config, sr, 0.0))
        }
        ConfigKind::PruningOnly => {
            check_sr(sr)?;
            Ok(SrcrBreakdown::new(
                *config,
                sr,
                pruning_factor(config.sparsity()),
            ))
        }
        ConfigKind::QuantizationOnly => srcr_quantization(config.bits(), sr),
        ConfigKind::Joint => srcr_joint(config, sr),
    }
}

/// Product of single-method rates, the estimate of the joint rate.
pub fn srcr_estimate(pruning: &SrcrBreakdown, quantization: &SrcrBreakdown) -> f64 {
    pruning.srcr * quantization.srcr
}
