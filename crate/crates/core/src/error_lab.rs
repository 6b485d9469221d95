//! Seeded synthetic-layer experiments on sequential compression error.
//!
//! Two experiments run on generated layers. The first compares full and masked
//! GPTQ after pruning. The second compares GPTQ against a one-shot quantizer on the
//! same pruned weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{CompressionConfig, MetricsError};
use crate::numerics::NumericsError;
use crate::pruning::{sparsegpt_prune, PruningError, SparsityMask};
use crate::quantization::{
    gptq_quantize, int8_absmax_quantize, layer_objective, nf4_quantize, rtn_quantize, GptqConfig,
    MaskMode, QuantizationError, QuantizedLayer, INT8_OUTLIER_THRESHOLD, NF4_BLOCK_SIZE,
};
use crate::{DenseMatrix, Rational};

#[derive(Debug, Error)]
pub enum ErrorLabError {
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Pruning(#[from] PruningError),
    #[error(transparent)]
    Quantization(#[from] QuantizationError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl ErrorLabError {
    pub fn is_numerical(&self) -> bool {
        match self {
            Self::Numerics(e) => e.is_numerical(),
            Self::Pruning(e) => e.is_numerical(),
            Self::Quantization(e) => e.is_numerical(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDist {
    Gaussian { sigma: f64 },
    Uniform { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLayerSpec {
    pub seed: u64,
    pub out_dim: usize,
    pub in_dim: usize,
    pub n_samples: usize,
    pub weight_dist: WeightDist,
    /// Pairwise correlation `ρ ∈ [0, 1)` between calibration features.
    pub calib_correlation: f64,
}

impl Default for SyntheticLayerSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dim: 64,
            in_dim: 64,
            n_samples: 1024,
            weight_dist: WeightDist::Gaussian { sigma: 1.0 },
            calib_correlation: 0.5,
        }
    }
}

impl SyntheticLayerSpec {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), ErrorLabError> {
        if self.out_dim == 0 || self.in_dim == 0 || self.n_samples == 0 {
            return Err(ErrorLabError::InvalidSpec(
                "dimensions must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.calib_correlation) {
            return Err(ErrorLabError::InvalidSpec(format!(
                "correlation {} outside [0, 1)",
                self.calib_correlation
            )));
        }
        if self.calib_correlation > 0.0 && self.in_dim < 2 {
            return Err(ErrorLabError::InvalidSpec(
                "correlated calibration needs at least two features".into(),
            ));
        }
        match self.weight_dist {
            WeightDist::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                ErrorLabError::InvalidSpec(format!("gaussian sigma {sigma} must be positive")),
            ),
            WeightDist::Uniform { a, b } if !(a < b && a.is_finite() && b.is_finite()) => Err(
                ErrorLabError::InvalidSpec(format!("uniform range [{a}, {b}) is empty")),
            ),
            _ => Ok(()),
        }
    }
}

/// Weights (out × in) and calibration inputs (in × samples). Every feature is
/// `√ρ·z + √(1−ρ)·e` with a per-sample common factor `z`.
pub fn generate_layer(
    spec: &SyntheticLayerSpec,
) -> Result<(DenseMatrix, DenseMatrix), ErrorLabError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights: Vec<f64> = match spec.weight_dist {
        WeightDist::Gaussian { sigma } => {
            let d =
                Normal::new(0.0, sigma).map_err(|e| ErrorLabError::InvalidSpec(e.to_string()))?;
            (0..spec.out_dim * spec.in_dim)
                .map(|_| d.sample(&mut rng))
                .collect()
        }
        WeightDist::Uniform { a, b } => {
            let d = Uniform::new(a, b).map_err(|e| ErrorLabError::InvalidSpec(e.to_string()))?;
            (0..spec.out_dim * spec.in_dim)
                .map(|_| d.sample(&mut rng))
                .collect()
        }
    };
    let shared = spec.calib_correlation.sqrt();
    let own = (1.0 - spec.calib_correlation).sqrt();
    let mut x = vec![0.0; spec.in_dim * spec.n_samples];
    for s in 0..spec.n_samples {
        let z: f64 = rng.sample(StandardNormal);
        for i in 0..spec.in_dim {
            let e: f64 = rng.sample(StandardNormal);
            x[i * spec.n_samples + s] = shared * z + own * e;
        }
    }
    Ok((
        DenseMatrix::new(spec.out_dim, spec.in_dim, weights)?,
        DenseMatrix::new(spec.in_dim, spec.n_samples, x)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTrace {
    pub config: CompressionConfig,
    /// `E_j` per column.
    pub per_column_error: Vec<f64>,
    /// `‖δ_j‖²` per column.
    pub delta_sq_norms: Vec<f64>,
    /// `‖WX − ŴX‖²` against the dense, unpruned weights.
    pub layer_objective: f64,
}

impl ErrorTrace {
    fn new(
        config: &CompressionConfig,
        q: &QuantizedLayer<f64>,
        w: &DenseMatrix,
        x: &DenseMatrix,
    ) -> Result<Self, ErrorLabError> {
        Ok(Self {
            config: *config,
            per_column_error: q.per_column_error.clone(),
            delta_sq_norms: q.delta_sq_norms.clone(),
            layer_objective: layer_objective(w, &q.dequantized, x)?,
        })
    }

    pub fn total_error(&self) -> f64 {
        self.per_column_error.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseAbResult {
    pub trace_a: ErrorTrace,
    pub trace_b: ErrorTrace,
    /// `E_A,j / E_B,j`, with `0/0` reported as 1.
    pub ratio_per_column: Vec<f64>,
    /// Weights quantized per column in the masked run (the unpruned count).
    pub quantized_per_column: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl RatioSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Some(Self {
            min: v[0],
            median,
            max: v[n - 1],
        })
    }
}

fn prune_layer(
    w: &DenseMatrix,
    x: &DenseMatrix,
    config: &CompressionConfig,
    gptq: &GptqConfig,
) -> Result<(DenseMatrix, SparsityMask), ErrorLabError> {
    let report = sparsegpt_prune(w, x, config, gptq.block_size, gptq.dampening)?;
    Ok((report.pruned_weights, report.mask))
}

/// Prune, then run GPTQ in full and masked mode on identical inputs.
pub fn case_ab_experiment(
    spec: &SyntheticLayerSpec,
    sparsity: Rational,
    bits: u32,
) -> Result<CaseAbResult, ErrorLabError> {
    let (w, x) = generate_layer(spec)?;
    case_ab_with_inputs(&w, &x, sparsity, &GptqConfig::with_bits(bits))
}

/// [`case_ab_experiment`] on caller-supplied weights and calibration inputs.
pub fn case_ab_with_inputs(
    w: &DenseMatrix,
    x: &DenseMatrix,
    sparsity: Rational,
    gptq: &GptqConfig,
) -> Result<CaseAbResult, ErrorLabError> {
    let config =
        CompressionConfig::with_sparsity(sparsity, Rational::from_integer(gptq.bits as i64))?;
    let (pruned, mask) = prune_layer(w, x, &config, gptq)?;
    let a = gptq_quantize(&pruned, x, gptq, Some(&mask), MaskMode::FullCaseA)?;
    let b = gptq_quantize(&pruned, x, gptq, Some(&mask), MaskMode::MaskedCaseB)?;
    let ratio_per_column = a
        .per_column_error
        .iter()
        .zip(&b.per_column_error)
        .map(|(&ea, &eb)| if ea == 0.0 && eb == 0.0 { 1.0 } else { ea / eb })
        .collect();
    let quantized_per_column = (0..mask.cols())
        .map(|c| (0..mask.rows()).filter(|&r| mask.is_kept(r, c)).count())
        .collect();
    Ok(CaseAbResult {
        trace_a: ErrorTrace::new(&config, &a, w, x)?,
        trace_b: ErrorTrace::new(&config, &b, w, x)?,
        ratio_per_column,
        quantized_per_column,
    })
}

/// One (sparsity, bit-width) point of the δ-estimation protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaLevel {
    pub sparsity: Rational,
    pub bits: u32,
}

/// 4-bit at 25% sparsity (against NF4) and 8-bit at 50% (against int8).
pub fn default_delta_levels() -> Vec<DeltaLevel> {
    vec![
        DeltaLevel {
            sparsity: Rational::new(1, 4),
            bits: 4,
        },
        DeltaLevel {
            sparsity: Rational::new(1, 2),
            bits: 8,
        },
    ]
}

/// Name of the one-shot quantizer matched to a bit-width.
pub fn simple_quantizer_name(bits: u32) -> &'static str {
    match bits {
        4 => "nf4",
        8 => "int8_absmax",
        _ => "rtn",
    }
}

fn simple_quantize(
    w: &DenseMatrix,
    gptq: &GptqConfig,
) -> Result<QuantizedLayer<f64>, ErrorLabError> {
    Ok(match gptq.bits {
        4 => nf4_quantize(w, NF4_BLOCK_SIZE)?,
        8 => int8_absmax_quantize(w, Some(INT8_OUTLIER_THRESHOLD))?,
        b => rtn_quantize(w, b, gptq.group_size)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub config: CompressionConfig,
    pub simple_quantizer: &'static str,
    pub e_gptq_per_column: Vec<f64>,
    pub e_simple_per_column: Vec<f64>,
    pub e_gptq_total: f64,
    pub e_simple_total: f64,
    /// `Σ_j (E_gptq,j − E_simple,j)` per column.
    pub delta_per_column: Vec<f64>,
    pub delta_estimate: f64,
    /// `Σ_j ‖δ_j‖²` read directly from the GPTQ run.
    pub delta_measured: f64,
    /// Constant-noise prediction `n·ε_q²` with `ε_q² = mean(scale²)/12` over the GPTQ groups.
    pub e_model: f64,
}

/// Full-mode GPTQ against the matched one-shot quantizer on the same pruned weights.
pub fn delta_estimation_experiment(
    spec: &SyntheticLayerSpec,
    levels: &[DeltaLevel],
) -> Result<Vec<DeltaRow>, ErrorLabError> {
    let (w, x) = generate_layer(spec)?;
    levels
        .iter()
        .map(|l| delta_with_inputs(&w, &x, l.sparsity, &GptqConfig::with_bits(l.bits)))
        .collect()
}

/// One δ-estimation row on caller-supplied weights and calibration inputs.
pub fn delta_with_inputs(
    w: &DenseMatrix,
    x: &DenseMatrix,
    sparsity: Rational,
    gptq: &GptqConfig,
) -> Result<DeltaRow, ErrorLabError> {
    let config =
        CompressionConfig::with_sparsity(sparsity, Rational::from_integer(gptq.bits as i64))?;
    let (pruned, _) = prune_layer(w, x, &config, gptq)?;
    let g = gptq_quantize(&pruned, x, gptq, None, MaskMode::FullCaseA)?;
    let s = simple_quantize(&pruned, gptq)?;
    let delta_per_column: Vec<f64> = g
        .per_column_error
        .iter()
        .zip(&s.per_column_error)
        .map(|(a, b)| a - b)
        .collect();
    let mean_var = g
        .grid
        .scales
        .iter()
        .map(|&sc| crate::quantization::uniform_noise_variance(sc))
        .sum::<f64>()
        / g.grid.scales.len().max(1) as f64;
    Ok(DeltaRow {
        config,
        simple_quantizer: simple_quantizer_name(gptq.bits),
        e_gptq_total: g.total_error(),
        e_simple_total: s.total_error(),
        delta_estimate: delta_per_column.iter().sum(),
        delta_per_column,
        delta_measured: g.total_delta_sq(),
        e_model: (w.rows() * w.cols()) as f64 * mean_var,
        e_gptq_per_column: g.per_column_error,
        e_simple_per_column: s.per_column_error,
    })
}

/// One output record per (layer spec, level).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub spec: SyntheticLayerSpec,
    pub config: CompressionConfig,
    pub e_gptq_total: f64,
    pub e_simple_total: f64,
    pub delta_estimate: f64,
    pub delta_measured: f64,
    /// Spread of the full-vs-masked error ratio across columns.
    pub ratio_summary: RatioSummary,
}

pub fn run_record(
    spec: &SyntheticLayerSpec,
    level: DeltaLevel,
) -> Result<ExperimentRecord, ErrorLabError> {
    let (w, x) = generate_layer(spec)?;
    let gptq = GptqConfig::with_bits(level.bits);
    let ab = case_ab_with_inputs(&w, &x, level.sparsity, &gptq)?;
    let d = delta_with_inputs(&w, &x, level.sparsity, &gptq)?;
    Ok(ExperimentRecord {
        spec: *spec,
        config: d.config,
        e_gptq_total: d.e_gptq_total,
        e_simple_total: d.e_simple_total,
        delta_estimate: d.delta_estimate,
        delta_measured: d.delta_measured,
        ratio_summary: RatioSummary::of(&ab.ratio_per_column).unwrap_or(RatioSummary {
            min: 1.0,
            median: 1.0,
            max: 1.0,
        }),
    })
}

/// Run every (spec, level) pair on `jobs` threads. Output order follows the input
/// order (specs outer, levels inner) regardless of scheduling.
pub fn run_records(
    specs: &[SyntheticLayerSpec],
    levels: &[DeltaLevel],
    jobs: usize,
) -> Result<Vec<ExperimentRecord>, ErrorLabError> {
    let work: Vec<_> = specs
        .iter()
        .flat_map(|s| levels.iter().map(move |l| (*s, *l)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ErrorLabError::ThreadPool(e.to_string()))?;
    pool.install(|| work.par_iter().map(|(s, l)| run_record(s, *l)).collect())
}
