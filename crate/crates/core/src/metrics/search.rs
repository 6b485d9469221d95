use std::cmp::Ordering;

use super::{
    srcr_joint, theoretical_compression_rate, CompressionConfig, MetricsError, SrcrBreakdown,
};

/// Score every record with the joint rate (non-joint configs score 0) and rank
/// descending. Ties go to the higher compression rate, then to fewer bits; the sort is
/// stable, so remaining ties keep input order.
pub fn optimal_config_search(
    records: &[(CompressionConfig, f64)],
) -> Result<Vec<SrcrBreakdown>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let mut ranked = records
        .iter()
        .map(|(c, sr)| srcr_joint(c, *sr))
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(|a, b| {
        b.srcr
            .total_cmp(&a.srcr)
            .then_with(|| {
                theoretical_compression_rate(&b.config)
                    .cmp(&theoretical_compression_rate(&a.config))
            })
            .then_with(|| a.config.bits().cmp(&b.config.bits()))
            .then(Ordering::Equal)
    });
    Ok(ranked)
}
