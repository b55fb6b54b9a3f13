//! Measure-weighted relative L2 error against the closed-form price.

use crate::error::{Error, Result};
use crate::grid::TensorGrid;

/// One row of an error table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rel_l2: f64,
    pub max_abs: f64,
    pub n: usize,
    pub scheme: String,
    pub seconds: f64,
}

/// Pairwise sum; the result does not depend on thread count or chunking.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (lo, hi) = v.split_at(v.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// `sqrt(sum meas (u - u_ref)^2) / sqrt(sum meas u_ref^2)` over interior cells, plus the
/// largest pointwise deviation. `scheme` and `seconds` are left for the caller to fill.
pub fn rel_l2_error(numeric: &[f64], reference: &[f64], grid: &TensorGrid) -> Result<ErrorReport> {
    let n2 = grid.unknowns();
    for len in [numeric.len(), reference.len()] {
        if len != n2 {
            return Err(Error::DimensionMismatch { expected: n2, got: len });
        }
    }
    let meas = grid.measures();
    let diff: Vec<f64> = (0..n2).map(|k| meas[k] * (numeric[k] - reference[k]).powi(2)).collect();
    let norm: Vec<f64> = (0..n2).map(|k| meas[k] * reference[k] * reference[k]).collect();
    let den = pairwise_sum(&norm);
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let max_abs = numeric.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ErrorReport {
        rel_l2: (pairwise_sum(&diff) / den).sqrt(),
        max_abs,
        n: grid.n(),
        scheme: String::new(),
        seconds: 0.0,
    })
}
