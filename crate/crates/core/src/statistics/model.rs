//! Poisson photoelectron statistics broadened by Gaussian readout noise:
//!
//! ```text
//! N(x) = 1/(sqrt(2 pi) sigma) * sum_l P_n(l) exp(-(x - M l)^2 / (2 sigma^2))
//! ```
//!
//! The sum runs over `l = 0..=l_max` with
//! `l_max = max(20, ceil(n + 10 sqrt(n) + 10))`. The neglected Poisson tail
//! beyond `l_max` sits more than `10 sqrt(n) + 10` above the mean; its mass is
//! below 1e-12 for every `n >= 0` (at `n = 0` it is exactly zero, at `n = 1`
//! it is about 1e-19, and the Chernoff bound tightens as `n` grows).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean photoelectron number.
    pub n: f64,
    /// Mean gain.
    pub mean_gain: f64,
    /// Readout noise, electrons RMS.
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(n: f64, mean_gain: f64, sigma: f64) -> Self {
        ModelParams { n, mean_gain, sigma }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 0.0) || !self.n.is_finite() {
            return Err(Error::domain(format!(
                "mean photoelectron number must be >= 0, got {}",
                self.n
            )));
        }
        if !(self.mean_gain >= 1.0) || !self.mean_gain.is_finite() {
            return Err(Error::domain(format!("mean gain must be >= 1, got {}", self.mean_gain)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!("readout noise must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

pub fn poisson_truncation(n: f64) -> usize {
    (n + 10.0 * n.sqrt() + 10.0).ceil().max(20.0) as usize
}

fn poisson_weights(n: f64) -> Vec<f64> {
    let l_max = poisson_truncation(n);
    if n == 0.0 {
        let mut w = vec![0.0; l_max + 1];
        w[0] = 1.0;
        return w;
    }
    let ln_n = n.ln();
    (0..=l_max)
        .map(|l| {
            let l = l as f64;
            (l * ln_n - n - libm::lgamma(l + 1.0)).exp()
        })
        .collect()
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
#[inline]
fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Beyond this many standard deviations a Gaussian term of the CDF is taken
/// as exactly 0 or 1; the neglected tail is below 1e-20.
const SATURATION_Z: f64 = 9.5;

/// The model with its Poisson weights precomputed, for evaluating many points.
#[derive(Debug, Clone)]
pub struct ElectronNumberModel {
    params: ModelParams,
    weights: Vec<f64>,
    /// `cumulative[l]` is the sum of `weights[..l]`.
    cumulative: Vec<f64>,
}

impl ElectronNumberModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let weights = poisson_weights(params.n);
        let mut cumulative = Vec::with_capacity(weights.len() + 1);
        let mut acc = 0.0;
        cumulative.push(acc);
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(ElectronNumberModel {
            params,
            weights,
            cumulative,
        })
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        let ModelParams { mean_gain, sigma, .. } = self.params;
        if sigma == 0.0 {
            return Err(Error::domain(
                "density is singular at sigma = 0; use model_point_masses",
            ));
        }
        let inv = 1.0 / sigma;
        let sum: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(l, &w)| {
                let z = (x - mean_gain * l as f64) * inv;
                w * (-0.5 * z * z).exp()
            })
            .sum();
        Ok(sum * INV_SQRT_2PI * inv)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let ModelParams { mean_gain, sigma, .. } = self.params;
        let terms = self.weights.len();
        let acc = if sigma == 0.0 {
            // Point masses at M l <= x.
            let below = if x < 0.0 {
                0
            } else {
                ((x / mean_gain).floor() as usize + 1).min(terms)
            };
            self.cumulative[below]
        } else {
            // Terms with M l < x - SATURATION_Z sigma contribute their full
            // weight; terms above x + SATURATION_Z sigma contribute nothing.
            let lo = ((x - SATURATION_Z * sigma) / mean_gain).ceil().clamp(0.0, terms as f64) as usize;
            let hi = ((x + SATURATION_Z * sigma) / mean_gain)
                .floor()
                .clamp(-1.0, terms as f64 - 1.0);
            let mut acc = self.cumulative[lo];
            if hi >= 0.0 {
                let inv = 1.0 / sigma;
                for l in lo..=hi as usize {
                    acc += self.weights[l] * phi((x - mean_gain * l as f64) * inv);
                }
            }
            acc
        };
        acc.clamp(0.0, 1.0)
    }

    /// `(position, probability)` pairs of the noiseless distribution.
    pub fn point_masses(&self) -> Vec<(f64, f64)> {
        self.weights
            .iter()
            .enumerate()
            .map(|(l, &w)| (self.params.mean_gain * l as f64, w))
            .collect()
    }
}

pub fn model_density(x: f64, params: &ModelParams) -> Result<f64> {
    ElectronNumberModel::new(*params)?.density(x)
}

pub fn model_cdf(x: f64, params: &ModelParams) -> Result<f64> {
    Ok(ElectronNumberModel::new(*params)?.cdf(x))
}

/// Discrete companion of [`model_density`] for `sigma = 0`.
pub fn model_point_masses(params: &ModelParams) -> Result<Vec<(f64, f64)>> {
    Ok(ElectronNumberModel::new(*params)?.point_masses())
}
