//! Pareto front quality metrics.
//!
//! All functions take points already projected onto the masked dimensions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{approx_equal, dominates};
use crate::graph::Route;
use crate::weights::simplex_grid;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("exact hypervolume supports 1 to 4 dimensions, got {0}")]
    UnsupportedDimension(usize),
    #[error("point has {got} dimensions, reference has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Indices of the non-dominated subset, in input order. Equal points
/// collapse onto the first occurrence.
pub fn nd_filter(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().enumerate().any(|(j, q)| {
                dominates(q, &points[i]) || (j < i && approx_equal(q, &points[i]))
            })
        })
        .collect()
}

/// Exact dominated hypervolume up to `reference`.
///
/// Points outside the reference box are clamped onto it, so they add no
/// volume along the offending dimension.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64]) -> Result<f64, MetricsError> {
    let dims = reference.len();
    if dims == 0 || dims > 4 {
        return Err(MetricsError::UnsupportedDimension(dims));
    }
    let mut clamped_any = false;
    let mut points = Vec::with_capacity(front.len());
    for p in front {
        if p.len() != dims {
            return Err(MetricsError::DimensionMismatch {
                expected: dims,
                got: p.len(),
            });
        }
        let q: Vec<f64> = p
            .iter()
            .zip(reference)
            .map(|(v, r)| {
                if v > r {
                    clamped_any = true;
                    *r
                } else {
                    *v
                }
            })
            .collect();
        points.push(q);
    }
    if clamped_any {
        log::debug!("hypervolume: clamped points beyond the reference point");
    }
    Ok(slice_volume(&mut points, reference))
}

/// Recursive slicing along the last dimension.
fn slice_volume(points: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    let d = reference.len();
    if points.is_empty() {
        return 0.0;
    }
    if d == 1 {
        let best = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        return reference[0] - best;
    }
    if d == 2 {
        points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let mut volume = 0.0;
        let mut best_y = reference[1];
        for i in 0..points.len() {
            if points[i][1] < best_y {
                best_y = points[i][1];
            }
            let next_x = points.get(i + 1).map_or(reference[0], |p| p[0]);
            volume += (next_x - points[i][0]) * (reference[1] - best_y);
        }
        return volume;
    }
    points.sort_by(|a, b| a[d - 1].total_cmp(&b[d - 1]));
    let sub_ref = &reference[..d - 1];
    let mut volume = 0.0;
    let mut i = 0;
    while i < points.len() {
        let z = points[i][d - 1];
        let mut end = i + 1;
        while end < points.len() && points[end][d - 1] == z {
            end += 1;
        }
        let next_z = points.get(end).map_or(reference[d - 1], |p| p[d - 1]);
        if next_z > z {
            let mut slab: Vec<Vec<f64>> = points[..end].iter().map(|p| p[..d - 1].to_vec()).collect();
            volume += (next_z - z) * slice_volume(&mut slab, sub_ref);
        }
        i = end;
    }
    volume
}

/// Uniform weights over the masked-dimension simplex with step 1/10.
pub fn default_r2_weights(dims: usize) -> Vec<Vec<f64>> {
    simplex_grid(dims, 10)
}

/// Unary R2 with weighted Chebyshev utility `max_i w_i·(v_i − z_i)`.
/// `None` for an empty front.
pub fn r2_indicator(front: &[Vec<f64>], weights: &[Vec<f64>], utopia: &[f64]) -> Option<f64> {
    if front.is_empty() || weights.is_empty() {
        return None;
    }
    let total: f64 = weights
        .iter()
        .map(|w| {
            front
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(w)
                        .zip(utopia)
                        .map(|((v, wi), z)| wi * (v - z))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some(total / weights.len() as f64)
}

/// `(percent of b strictly dominated by a, percent of a strictly dominated by b)`.
pub fn dominance_coverage(a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, f64) {
    fn covered(by: &[Vec<f64>], of: &[Vec<f64>]) -> f64 {
        if of.is_empty() {
            return 0.0;
        }
        let n = of.iter().filter(|p| by.iter().any(|q| dominates(q, p))).count();
        100.0 * n as f64 / of.len() as f64
    }
    (covered(a, b), covered(b, a))
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 100]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-dimension affine map sending `[P_lo, P_hi]` onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileNormalizer {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl PercentileNormalizer {
    /// Fits on every route cost collected for one target. `None` when empty.
    pub fn fit(points: &[Vec<f64>], p_lo: f64, p_hi: f64) -> Option<Self> {
        let dims = points.first()?.len();
        let mut lo = Vec::with_capacity(dims);
        let mut hi = Vec::with_capacity(dims);
        for d in 0..dims {
            let mut column: Vec<f64> = points.iter().map(|p| p[d]).collect();
            column.sort_by(f64::total_cmp);
            lo.push(percentile(&column, p_lo));
            hi.push(percentile(&column, p_hi));
        }
        Some(PercentileNormalizer { lo, hi })
    }

    /// Degenerate dimensions (`P_lo = P_hi`) map to 0.
    pub fn apply(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let span = self.hi[d] - self.lo[d];
                if span <= 0.0 {
                    0.0
                } else {
                    ((v - self.lo[d]) / span).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

/// `1 − Jaccard` over reaction signatures.
pub fn route_dissimilarity(a: &Route, b: &Route) -> f64 {
    let sa = a.signatures();
    let sb = b.signatures();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - sa.intersection(&sb).count() as f64 / union as f64
}

/// Front quality for one (target, strategy) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontStats {
    pub hv: f64,
    pub r2: Option<f64>,
    pub n_routes: usize,
    pub baseline_dominated_pct: Option<f64>,
    pub self_dominated_pct: Option<f64>,
    pub success: bool,
}
