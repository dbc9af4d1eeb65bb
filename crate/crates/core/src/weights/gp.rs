use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{decay_utility, WeightVector, WeightsError};

/// Hyperparameter grid searched by marginal likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct GpConfig {
    pub lengthscales: Vec<f64>,
    pub noise_variances: Vec<f64>,
}

impl Default for GpConfig {
    fn default() -> Self {
        let (lo, hi, n) = (0.05f64, 0.5f64, 12);
        let lengthscales = (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect();
        GpConfig {
            lengthscales,
            noise_variances: vec![1e-6, 1e-4, 1e-2, 1e-1],
        }
    }
}

pub(crate) fn rbf(a: &[f64], b: &[f64], lengthscale: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-0.5 * d2 / (lengthscale * lengthscale)).exp()
}

/// Zero-mean GP with unit-variance RBF kernel on standardized targets.
#[derive(Clone, Debug)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_scale: f64,
    flat: bool,
    lengthscale: f64,
    noise: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GaussianProcess {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<Self, WeightsError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(WeightsError::NoCandidates);
        }
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
        let flat = var.sqrt() < 1e-12;
        let y_scale = if flat { 1.0 } else { var.sqrt() };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));

        let mut best: Option<(f64, GaussianProcess)> = None;
        for &lengthscale in &config.lengthscales {
            for &noise in &config.noise_variances {
                let k = DMatrix::from_fn(x.len(), x.len(), |i, j| {
                    rbf(&x[i], &x[j], lengthscale) + if i == j { noise } else { 0.0 }
                });
                let Some(chol) = Cholesky::new(k) else {
                    continue;
                };
                let alpha = chol.solve(&ys);
                let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
                let lml = -0.5 * ys.dot(&alpha)
                    - 0.5 * log_det
                    - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((
                        lml,
                        GaussianProcess {
                            x: x.to_vec(),
                            y_mean,
                            y_scale,
                            flat,
                            lengthscale,
                            noise,
                            chol,
                            alpha,
                        },
                    ));
                }
            }
        }
        best.map(|(_, gp)| gp).ok_or(WeightsError::Singular)
    }

    /// True when every observation had the same value.
    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Noise variance in standardized units.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Noise standard deviation in the units of the observations.
    pub fn noise_sd(&self) -> f64 {
        self.noise.sqrt() * self.y_scale
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        rbf(a, b, self.lengthscale)
    }

    /// Posterior mean and variance of the latent function at `q`.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.x.len(), self.x.iter().map(|x| self.kernel(x, q)));
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&ks).unwrap_or_else(|| ks.clone());
        let var = (1.0 - v.dot(&v)).max(0.0);
        (
            self.y_mean + self.y_scale * mean,
            var * self.y_scale * self.y_scale,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Observation {
    weight: WeightVector,
    u0: f64,
    age: u32,
}

/// Decayed-utility history plus the GP fitted to it.
#[derive(Clone, Debug)]
pub struct Surrogate {
    history: Vec<Observation>,
    pub lambda: f64,
    pub max_age: u32,
    pub config: GpConfig,
    gp: Option<GaussianProcess>,
}

impl Surrogate {
    pub fn new(lambda: f64, max_age: u32, config: GpConfig) -> Self {
        Surrogate {
            history: Vec::new(),
            lambda,
            max_age,
            config,
            gp: None,
        }
    }

    /// Ages every entry by one cycle, then records the hypervolume gain of
    /// each weight that was just active.
    pub fn record(&mut self, feedback: &[(WeightVector, f64)]) {
        for obs in &mut self.history {
            obs.age += 1;
        }
        for (weight, gain) in feedback {
            match self.history.iter_mut().find(|o| &o.weight == weight) {
                Some(obs) if *gain > 0.0 => {
                    obs.u0 = *gain;
                    obs.age = 0;
                }
                Some(_) => {}
                None => self.history.push(Observation {
                    weight: weight.clone(),
                    u0: gain.max(0.0),
                    age: 0,
                }),
            }
        }
        self.gp = None;
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// `(weight, decayed utility)` pairs in insertion order.
    pub fn observations(&self) -> Vec<(WeightVector, f64)> {
        self.history
            .iter()
            .map(|o| {
                (
                    o.weight.clone(),
                    decay_utility(o.u0, o.age, self.lambda, self.max_age),
                )
            })
            .collect()
    }

    pub fn fit(&mut self) -> Result<&GaussianProcess, WeightsError> {
        let obs = self.observations();
        let x: Vec<Vec<f64>> = obs.iter().map(|(w, _)| w.as_slice().to_vec()).collect();
        let y: Vec<f64> = obs.iter().map(|(_, u)| *u).collect();
        if x.is_empty() {
            return Err(WeightsError::Unfitted);
        }
        self.gp = Some(GaussianProcess::fit(&x, &y, &self.config)?);
        Ok(self.gp.as_ref().expect("just fitted"))
    }

    pub fn gp(&self) -> Option<&GaussianProcess> {
        self.gp.as_ref()
    }
}
