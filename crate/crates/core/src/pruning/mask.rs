use serde::Serialize;

use crate::metrics::{NMPattern, SparsityPattern};
use crate::numerics::{Matrix, NumericsError};
use crate::scalar::Scalar;
use crate::Rational;

/// Binary keep-mask aligned with a weight matrix; `true` keeps the weight.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparsityMask {
    rows: usize,
    cols: usize,
    keep: Vec<bool>,
}

impl SparsityMask {
    pub fn all_ones(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            keep: vec![true; rows * cols],
        }
    }

    pub fn from_keep(rows: usize, cols: usize, keep: Vec<bool>) -> Result<Self, NumericsError> {
        if keep.len() != rows * cols {
            return Err(NumericsError::BadLength {
                rows,
                cols,
                len: keep.len(),
            });
        }
        Ok(Self { rows, cols, keep })
    }

    /// Keep exactly the non-zero entries of `w`.
    pub fn from_nonzero<T: Scalar>(w: &Matrix<T>) -> Self {
        Self {
            rows: w.rows(),
            cols: w.cols(),
            keep: w.as_slice().iter().map(|v| !v.is_zero()).collect(),
        }
    }

    /// Inverse of [`SparsityMask::to_matrix`]: any non-zero entry is kept.
    pub fn from_matrix<T: Scalar>(m: &Matrix<T>) -> Self {
        Self::from_nonzero(m)
    }

    /// 0/1 matrix, the on-disk form of a mask.
    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::new(
            self.rows,
            self.cols,
            self.keep
                .iter()
                .map(|&k| if k { T::one() } else { T::zero() })
                .collect(),
        )
        .expect("0/1 entries are finite")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_kept(&self, r: usize, c: usize) -> bool {
        self.keep[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[bool] {
        &self.keep[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_zeros(&self, r: usize) -> usize {
        self.row(r).iter().filter(|k| !**k).count()
    }

    pub fn count_kept(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    pub fn density(&self) -> f64 {
        if self.keep.is_empty() {
            return 1.0;
        }
        self.count_kept() as f64 / self.keep.len() as f64
    }

    pub fn sparsity(&self) -> f64 {
        1.0 - self.density()
    }

    pub fn is_all_ones(&self) -> bool {
        self.keep.iter().all(|k| *k)
    }

    /// Zero every pruned position of `w`.
    pub fn apply<T: Scalar>(&self, w: &Matrix<T>) -> Matrix<T> {
        let data = w
            .as_slice()
            .iter()
            .zip(&self.keep)
            .map(|(&v, &k)| if k { v } else { T::zero() })
            .collect();
        Matrix::new(w.rows(), w.cols(), data).expect("masking keeps entries finite")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskViolation {
    /// An aligned N:M group with the wrong number of pruned entries.
    Group {
        row: usize,
        group: usize,
        zeros: usize,
        expected: usize,
    },
    /// Row length is not a multiple of the group size.
    Misaligned { cols: usize, m_group: usize },
    /// Row sparsity more than one element away from the target.
    RowDensity {
        row: usize,
        zeros: usize,
        expected: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskValidation {
    pub achieved_sparsity: f64,
    pub violations: Vec<MaskViolation>,
}

impl MaskValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check a mask against its pattern. Violations are reported, never raised.
pub fn validate_mask(
    mask: &SparsityMask,
    pattern: &SparsityPattern,
    target_sparsity: Rational,
) -> MaskValidation {
    let mut violations = Vec::new();
    match pattern {
        SparsityPattern::Nm(NMPattern { n_pruned, m_group }) => {
            if !mask.cols.is_multiple_of(*m_group) {
                violations.push(MaskViolation::Misaligned {
                    cols: mask.cols,
                    m_group: *m_group,
                });
            }
            for r in 0..mask.rows {
                for (g, chunk) in mask.row(r).chunks(*m_group).enumerate() {
                    if chunk.len() < *m_group {
                        continue;
                    }
                    let zeros = chunk.iter().filter(|k| !**k).count();
                    if zeros != *n_pruned {
                        violations.push(MaskViolation::Group {
                            row: r,
                            group: g,
                            zeros,
                            expected: *n_pruned,
                        });
                    }
                }
            }
        }
        SparsityPattern::Unstructured | SparsityPattern::None => {
            let expected =
                num_traits::ToPrimitive::to_f64(&target_sparsity).unwrap_or(0.0) * mask.cols as f64;
            for r in 0..mask.rows {
                let zeros = mask.row_zeros(r);
                if (zeros as f64 - expected).abs() > 1.0 {
                    violations.push(MaskViolation::RowDensity {
                        row: r,
                        zeros,
                        expected,
                    });
                }
            }
        }
    }
    MaskValidation {
        achieved_sparsity: mask.sparsity(),
        violations,
    }
}

/// Bits per weight needed to store the mask: 1 for unstructured,
/// `log₂(C(m, n)) / m` for N:M, 0 with no pattern.
pub fn mask_overhead_bits(pattern: &SparsityPattern) -> f64 {
    match pattern {
        SparsityPattern::None => 0.0,
        SparsityPattern::Unstructured => 1.0,
        SparsityPattern::Nm(NMPattern { n_pruned, m_group }) => {
            let k = (*n_pruned).min(m_group - n_pruned);
            let choices = (0..k).fold(1.0f64, |acc, i| acc * (m_group - i) as f64 / (i + 1) as f64);
            choices.log2() / *m_group as f64
        }
    }
}
