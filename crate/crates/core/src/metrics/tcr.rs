use super::{format_percent, CompressionConfig, MetricsError, BASELINE_BITS};
use crate::Rational;
use num_traits::One;

/// Bit-widths forming the rows of the reference rate grid.
pub const TABLE_BITS: [i64; 5] = [16, 8, 4, 3, 2];
/// Sparsities (numerator, denominator) forming its columns.
pub const TABLE_SPARSITIES: [(i64, i64); 4] = [(0, 1), (1, 4), (1, 3), (1, 2)];

/// Fraction of information-bearing bits removed relative to 16-bit storage:
/// `1 - (q/16)(1 - s)`. Reduces to `s` at 16 bits and to `1 - q/16` at zero sparsity.
pub fn theoretical_compression_rate(config: &CompressionConfig) -> Rational {
    Rational::one()
        - (config.bits() / Rational::from_integer(BASELINE_BITS))
            * (Rational::one() - config.sparsity())
}

/// Percentage with up to four decimals, e.g. `81.25%`.
pub fn render_tcr(rate: Rational) -> String {
    format!("{}%", format_percent(rate, 4))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcrTable {
    pub bit_widths: Vec<Rational>,
    pub sparsities: Vec<Rational>,
    /// `cells[i][j]` is the rate at `bit_widths[i]`, `sparsities[j]`.
    pub cells: Vec<Vec<Rational>>,
}

impl TcrTable {
    pub fn get(&self, bits: Rational, sparsity: Rational) -> Option<Rational> {
        let i = self.bit_widths.iter().position(|&b| b == bits)?;
        let j = self.sparsities.iter().position(|&s| s == sparsity)?;
        Some(self.cells[i][j])
    }
}

/// Full cross product of rates; rows are bit-widths, columns sparsities.
pub fn tcr_table(
    sparsities: &[Rational],
    bit_widths: &[Rational],
) -> Result<TcrTable, MetricsError> {
    if sparsities.is_empty() {
        return Err(MetricsError::EmptyAxis("sparsity"));
    }
    if bit_widths.is_empty() {
        return Err(MetricsError::EmptyAxis("bit-width"));
    }
    let cells = bit_widths
        .iter()
        .map(|&bits| {
            sparsities
                .iter()
                .map(|&s| {
                    CompressionConfig::with_sparsity(s, bits)
                        .map(|c| theoretical_compression_rate(&c))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TcrTable {
        bit_widths: bit_widths.to_vec(),
        sparsities: sparsities.to_vec(),
        cells,
    })
}
