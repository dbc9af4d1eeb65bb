use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gp::{GpConfig, Surrogate};
use super::{bo_propose, grid_pool, sobol_pool, warmup_grid, WeightVector, WeightsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    Grid,
    Sobol,
    Bo,
    /// A fixed list of weights that is never re-sampled.
    Fixed,
}

impl SamplingStrategy {
    /// Iterations between re-sampling events.
    pub fn default_w_budget(self) -> usize {
        match self {
            SamplingStrategy::Grid => 16,
            SamplingStrategy::Sobol => 10,
            SamplingStrategy::Bo => 12,
            SamplingStrategy::Fixed => usize::MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum CandidateSource {
    Sobol { count: usize },
    Grid { resolution: f64 },
}

impl Default for CandidateSource {
    fn default() -> Self {
        CandidateSource::Sobol { count: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub warmup_resolution: f64,
    pub warmup_min_guidance: f64,
    pub candidates: CandidateSource,
    pub decay: f64,
    pub max_age: u32,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            warmup_resolution: 0.25,
            warmup_min_guidance: 0.5,
            candidates: CandidateSource::default(),
            decay: 0.5,
            max_age: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolConfig {
    pub strategy: SamplingStrategy,
    pub dims: usize,
    pub guidance_index: usize,
    /// N_S, the number of weights active at once.
    pub n_weights: usize,
    pub w_budget: usize,
    pub grid_resolution: f64,
    pub sobol_count: usize,
    pub sobol_extremes: bool,
    pub seed: u64,
    /// Start over from the full pool instead of stopping when it runs dry.
    pub recycle: bool,
    pub fixed: Vec<WeightVector>,
    pub bo: BoConfig,
}

impl PoolConfig {
    pub fn new(strategy: SamplingStrategy, dims: usize, guidance_index: usize) -> Self {
        PoolConfig {
            strategy,
            dims,
            guidance_index,
            n_weights: 5,
            w_budget: strategy.default_w_budget(),
            grid_resolution: 0.33,
            sobol_count: 32,
            sobol_extremes: true,
            seed: 0,
            recycle: false,
            fixed: Vec::new(),
            bo: BoConfig::default(),
        }
    }

    pub fn fixed(weights: Vec<WeightVector>) -> Self {
        let dims = weights.first().map_or(0, WeightVector::dims);
        let mut c = PoolConfig::new(SamplingStrategy::Fixed, dims, dims.saturating_sub(1));
        c.n_weights = weights.len();
        c.fixed = weights;
        c
    }
}

/// Sampler state: the active batch, the unused remainder of the pool and,
/// for the BO strategy, the utility surrogate.
#[derive(Clone, Debug)]
pub struct WeightPool {
    config: PoolConfig,
    active: Vec<WeightVector>,
    queue: VecDeque<WeightVector>,
    full: Vec<WeightVector>,
    rng: ChaCha8Rng,
    surrogate: Surrogate,
    exhausted: bool,
    resamples: usize,
}

impl WeightPool {
    pub fn new(config: PoolConfig) -> Result<Self, WeightsError> {
        if config.n_weights == 0 {
            return Err(WeightsError::InvalidConfig("n_weights must be at least 1".into()));
        }
        if config.w_budget == 0 {
            return Err(WeightsError::InvalidConfig("w_budget must be at least 1".into()));
        }
        if config.guidance_index >= config.dims {
            return Err(WeightsError::InvalidConfig("guidance index out of range".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let full = match config.strategy {
            SamplingStrategy::Grid => {
                let mut g = grid_pool(config.grid_resolution, config.dims)?;
                g.shuffle(&mut rng);
                g
            }
            SamplingStrategy::Sobol => {
                if config.sobol_count == 0 {
                    return Err(WeightsError::InvalidConfig("sobol count must be at least 1".into()));
                }
                let seed = (config.seed ^ (config.seed >> 32)) as u32;
                sobol_pool(config.sobol_count, config.dims, seed, config.sobol_extremes)
            }
            SamplingStrategy::Bo => warmup_grid(
                config.bo.warmup_resolution,
                config.dims,
                config.guidance_index,
                config.bo.warmup_min_guidance,
            )?,
            SamplingStrategy::Fixed => {
                if config.fixed.is_empty() || config.fixed.iter().any(|w| w.dims() != config.dims) {
                    return Err(WeightsError::InvalidConfig(
                        "fixed weights missing or of the wrong dimension".into(),
                    ));
                }
                config.fixed.clone()
            }
        };
        if full.is_empty() {
            return Err(WeightsError::NoCandidates);
        }
        let surrogate = Surrogate::new(config.bo.decay, config.bo.max_age, GpConfig::default());
        let mut pool = WeightPool {
            queue: full.iter().cloned().collect(),
            full,
            config,
            active: Vec::new(),
            rng,
            surrogate,
            exhausted: false,
            resamples: 0,
        };
        let n = if pool.config.strategy == SamplingStrategy::Fixed {
            pool.full.len()
        } else {
            pool.config.n_weights
        };
        pool.active = pool.take(n);
        Ok(pool)
    }

    fn take(&mut self, n: usize) -> Vec<WeightVector> {
        if self.queue.is_empty() && self.config.recycle {
            self.full.shuffle(&mut self.rng);
            self.queue = self.full.iter().cloned().collect();
        }
        let n = n.min(self.queue.len());
        self.queue.drain(..n).collect()
    }

    pub fn config(&self) -> &PoolConfig {
        &self.config
    }

    pub fn active(&self) -> &[WeightVector] {
        &self.active
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn resamples(&self) -> usize {
        self.resamples
    }

    pub fn surrogate(&self) -> &Surrogate {
        &self.surrogate
    }

    /// True when iteration `k` is a re-sampling point for this pool.
    pub fn due(&self, k: usize) -> bool {
        self.config.strategy != SamplingStrategy::Fixed
            && !self.exhausted
            && k > 0
            && k.is_multiple_of(self.config.w_budget)
    }

    /// Replaces the active batch. `hv_gain[j]` is the hypervolume gained
    /// by active weight `j` since the last re-sampling. Returns whether the
    /// batch changed.
    pub fn resample(&mut self, k: usize, hv_gain: &[f64]) -> Result<bool, WeightsError> {
        if k == 0 || !k.is_multiple_of(self.config.w_budget) {
            return Err(WeightsError::OffSchedule {
                k,
                w_budget: self.config.w_budget,
            });
        }
        if self.exhausted || self.config.strategy == SamplingStrategy::Fixed {
            return Ok(false);
        }
        self.resamples += 1;
        let n = self.config.n_weights;
        let next = match self.config.strategy {
            SamplingStrategy::Bo => {
                let feedback: Vec<(WeightVector, f64)> = self
                    .active
                    .iter()
                    .cloned()
                    .zip(hv_gain.iter().copied().chain(std::iter::repeat(0.0)))
                    .collect();
                self.surrogate.record(&feedback);
                if !self.queue.is_empty() {
                    self.queue.drain(..n.min(self.queue.len())).collect()
                } else {
                    self.surrogate.fit()?;
                    let candidates = self.candidates()?;
                    bo_propose(self.surrogate.gp(), &candidates, n)?
                }
            }
            _ => self.take(n),
        };
        if next.is_empty() {
            self.exhausted = true;
            return Ok(false);
        }
        self.active = next;
        Ok(true)
    }

    fn candidates(&self) -> Result<Vec<WeightVector>, WeightsError> {
        Ok(match &self.config.bo.candidates {
            CandidateSource::Sobol { count } => {
                let seed = (self.config.seed ^ (self.config.seed >> 32)) as u32;
                sobol_pool(*count, self.config.dims, seed.wrapping_add(1), true)
            }
            CandidateSource::Grid { resolution } => grid_pool(*resolution, self.config.dims)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(strategy: SamplingStrategy) -> PoolConfig {
        PoolConfig::new(strategy, 4, 3)
    }

    #[test]
    fn grid_pool_exhausts_after_four_resamples() {
        let mut pool = WeightPool::new(config(SamplingStrategy::Grid)).unwrap();
        let mut seen: Vec<WeightVector> = pool.active().to_vec();
        let w = pool.config().w_budget;
        for r in 1..=3 {
            assert!(pool.resample(r * w, &[0.0; 5]).unwrap());
            assert_eq!(pool.active().len(), 5);
            seen.extend(pool.active().iter().cloned());
            assert!(!pool.is_exhausted());
        }
        assert!(!pool.resample(4 * w, &[0.0; 5]).unwrap());
        assert!(pool.is_exhausted());
        assert!(!pool.due(5 * w));
        assert_eq!(seen.len(), 20);
        for i in 0..seen.len() {
            for j in i + 1..seen.len() {
                assert_ne!(seen[i], seen[j]);
            }
        }
    }

    #[test]
    fn recycling_pool_never_exhausts() {
        let mut c = config(SamplingStrategy::Grid);
        c.recycle = true;
        let mut pool = WeightPool::new(c).unwrap();
        for r in 1..=10 {
            assert!(pool.resample(r * 16, &[]).unwrap());
            assert_eq!(pool.active().len(), 5);
        }
        assert!(!pool.is_exhausted());
    }

    #[test]
    fn sobol_pool_serves_partial_last_batch() {
        let mut pool = WeightPool::new(config(SamplingStrategy::Sobol)).unwrap();
        let mut total = pool.active().len();
        let mut r = 1;
        while pool.resample(r * 10, &[]).unwrap() {
            total += pool.active().len();
            r += 1;
        }
        assert_eq!(total, 36);
        assert_eq!(pool.active().len(), 1);
    }

    #[test]
    fn schedule() {
        let mut pool = WeightPool::new(config(SamplingStrategy::Bo)).unwrap();
        assert_eq!(pool.config().w_budget, 12);
        assert!(pool.due(12));
        assert!(!pool.due(13));
        assert!(!pool.due(0));
        assert_eq!(
            pool.resample(13, &[]),
            Err(WeightsError::OffSchedule { k: 13, w_budget: 12 })
        );
        assert!(pool.resample(12, &[0.0; 5]).is_ok());
    }

    #[test]
    fn bo_warms_up_then_proposes() {
        let mut pool = WeightPool::new(config(SamplingStrategy::Bo)).unwrap();
        let warm = warmup_grid(0.25, 4, 3, 0.5).unwrap();
        assert_eq!(pool.active(), &warm[..5]);
        pool.resample(12, &[0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(pool.active(), &warm[5..]);
        assert!(pool.surrogate().gp().is_none());
        pool.resample(24, &[0.0, 0.3, 0.0, 0.0, 0.0]).unwrap();
        assert!(pool.surrogate().gp().is_some());
        assert_eq!(pool.surrogate().len(), 10);
        assert_eq!(pool.active().len(), 5);
        for w in pool.active() {
            assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let again = {
            let mut p = WeightPool::new(config(SamplingStrategy::Bo)).unwrap();
            p.resample(12, &[0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
            p.resample(24, &[0.0, 0.3, 0.0, 0.0, 0.0]).unwrap();
            p.active().to_vec()
        };
        assert_eq!(pool.active(), &again[..]);
    }

    #[test]
    fn zero_gain_weights_fade_from_the_surrogate() {
        let mut pool = WeightPool::new(config(SamplingStrategy::Bo)).unwrap();
        let first = pool.active()[0].clone();
        pool.resample(12, &[0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        for r in 2..=4 {
            pool.resample(12 * r, &[0.0; 5]).unwrap();
        }
        let obs = pool.surrogate().observations();
        let u = obs.iter().find(|(w, _)| *w == first).unwrap().1;
        assert_eq!(u, 0.0);
    }

    #[test]
    fn fixed_pool_is_static() {
        let w = WeightVector::new(vec![0.2, 0.2, 0.2, 0.4]).unwrap();
        let mut pool = WeightPool::new(PoolConfig::fixed(vec![w.clone()])).unwrap();
        assert_eq!(pool.active(), std::slice::from_ref(&w));
        assert!(!pool.due(16));
        assert!(!pool.resample(usize::MAX, &[]).unwrap());
        assert_eq!(pool.active(), &[w]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = config(SamplingStrategy::Grid);
        c.n_weights = 0;
        assert!(WeightPool::new(c).is_err());
        let mut c = config(SamplingStrategy::Grid);
        c.grid_resolution = 0.3;
        assert!(WeightPool::new(c).is_err());
        assert!(WeightPool::new(PoolConfig::fixed(vec![])).is_err());
    }
}
