use nalgebra::{Cholesky, DMatrix, DVector};

use super::gp::GaussianProcess;
use super::{WeightVector, WeightsError};

const MAX_VALUE_SAMPLES: usize = 10;
const DIVERSITY_JITTER: f64 = 1e-9;
const SD_FLOOR: f64 = 1e-12;

fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Samples of the maximum posterior value, drawn from a Gumbel fit to
/// `P(y* < z) = Π Φ((z − μ_i)/σ_i)`.
fn max_value_samples(moments: &[(f64, f64)]) -> Vec<f64> {
    let cdf = |z: f64| -> f64 {
        moments
            .iter()
            .map(|(m, s)| norm_cdf((z - m) / s))
            .product()
    };
    let lo0 = moments.iter().map(|(m, s)| m - 8.0 * s).fold(f64::INFINITY, f64::min);
    let hi0 = moments.iter().map(|(m, s)| m + 8.0 * s).fold(f64::NEG_INFINITY, f64::max);
    let quantile = |p: f64| -> f64 {
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (q1, q2, q3) = (quantile(0.25), quantile(0.5), quantile(0.75));
    let scale = ((q3 - q1) / ((-(0.25f64).ln()).ln() - (-(0.75f64).ln()).ln())).max(SD_FLOOR);
    let loc = q2 + scale * (2f64.ln()).ln();
    (0..MAX_VALUE_SAMPLES)
        .map(|s| {
            let r = (s as f64 + 0.5) / MAX_VALUE_SAMPLES as f64;
            loc - scale * (-r.ln()).ln()
        })
        .collect()
}

/// Max-value entropy information gain per candidate.
fn information_gain(gp: &GaussianProcess, candidates: &[WeightVector]) -> Vec<f64> {
    if gp.is_flat() {
        return vec![0.0; candidates.len()];
    }
    let moments: Vec<(f64, f64)> = candidates
        .iter()
        .map(|c| {
            let (m, v) = gp.predict(c.as_slice());
            (m, v.sqrt().max(SD_FLOOR))
        })
        .collect();
    let spread = moments.iter().map(|(_, s)| *s).fold(0.0, f64::max);
    if spread <= 1e-9 {
        return vec![0.0; candidates.len()];
    }
    let ystar = max_value_samples(&moments);
    moments
        .iter()
        .map(|(m, s)| {
            let sum: f64 = ystar
                .iter()
                .map(|y| {
                    let g = (y - m) / s;
                    let big = norm_cdf(g).max(1e-300);
                    g * norm_pdf(g) / (2.0 * big) - big.ln()
                })
                .sum();
            (sum / ystar.len() as f64).max(0.0)
        })
        .collect()
}

/// Variance of `q` under the prior kernel after conditioning on `batch`.
fn conditional_variance(gp: &GaussianProcess, batch: &[&WeightVector], q: &WeightVector) -> f64 {
    if batch.is_empty() {
        return 1.0;
    }
    let n = batch.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        gp.kernel(batch[i].as_slice(), batch[j].as_slice())
            + if i == j { DIVERSITY_JITTER } else { 0.0 }
    });
    let kq = DVector::from_iterator(n, batch.iter().map(|b| gp.kernel(b.as_slice(), q.as_slice())));
    match Cholesky::new(k) {
        Some(chol) => {
            let v = chol.l().solve_lower_triangular(&kq).unwrap_or(kq);
            (1.0 + DIVERSITY_JITTER - v.dot(&v)).max(DIVERSITY_JITTER)
        }
        None => DIVERSITY_JITTER,
    }
}

/// Greedy batch selection: each step adds the candidate maximising
/// information gain plus half the log conditional variance given the batch
/// so far. Ties go to the earlier candidate.
pub fn bo_propose(
    gp: Option<&GaussianProcess>,
    candidates: &[WeightVector],
    batch: usize,
) -> Result<Vec<WeightVector>, WeightsError> {
    let gp = gp.ok_or(WeightsError::Unfitted)?;
    if candidates.is_empty() {
        return Err(WeightsError::NoCandidates);
    }
    let gain = information_gain(gp, candidates);
    let mut chosen: Vec<usize> = Vec::with_capacity(batch);
    while chosen.len() < batch.min(candidates.len()) {
        let selected: Vec<&WeightVector> = chosen.iter().map(|&i| &candidates[i]).collect();
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if chosen.contains(&i) || selected.contains(&c) {
                continue;
            }
            let score = if batch == 1 {
                gain[i]
            } else {
                gain[i] + 0.5 * conditional_variance(gp, &selected, c).ln()
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        match best {
            Some((i, _)) => chosen.push(i),
            None => break,
        }
    }
    Ok(chosen.into_iter().map(|i| candidates[i].clone()).collect())
}
