//! Moment estimators built on the compound-Poisson variance relation
//! `Var(x) = n M^2 F + sigma^2`, where `F = <g^2> / <g>^2` of the
//! single-electron gain and `sigma` is the readout noise of one charge sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::ChargeSamples;

pub const MIN_EXCESS_NOISE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessNoiseEstimate {
    /// `(Var - sigma^2) / (n M^2)`, unclamped.
    pub f_apd: f64,
    /// `Var / (n M^2)`.
    pub f_total: f64,
    pub stderr_f: f64,
    pub n_used: f64,
    pub m_used: f64,
    pub sigma_used: f64,
    /// `max(f_apd, 1)`: the physical floor of the excess noise factor.
    pub f_apd_floor: f64,
    /// `f_apd < 1`.
    pub sub_unity: bool,
    /// Sample variance is below `sigma^2` by more than three standard errors.
    pub inconsistent_sigma: bool,
    pub samples: usize,
}

/// Mean and unbiased variance.
pub fn sample_mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Standard error of the sample variance from the centred squares
/// `d_i = (x_i - mean)^2`: `Var(s^2) ~ (gamma_0 + 2 gamma_1) / N`, where
/// `gamma_k` is the lag-k autocovariance of `d`. Charges extracted by
/// differencing share one window value with each neighbour, so lag 1 is
/// correlated and lags beyond it are not.
fn variance_stderr(xs: &[f64], mean: f64) -> f64 {
    let n = xs.len() as f64;
    let d: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let md = d.iter().sum::<f64>() / n;
    let gamma0 = d.iter().map(|v| (v - md) * (v - md)).sum::<f64>() / n;
    let gamma1 = d.windows(2).map(|w| (w[0] - md) * (w[1] - md)).sum::<f64>() / n;
    ((gamma0 + 2.0 * gamma1).max(0.0) / n).sqrt()
}

pub fn estimate_excess_noise(
    samples: &ChargeSamples,
    n: f64,
    mean_gain: f64,
    sigma: f64,
) -> Result<ExcessNoiseEstimate> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::domain(format!("mean photoelectron number must be > 0, got {n}")));
    }
    if !(mean_gain >= 1.0) || !mean_gain.is_finite() {
        return Err(Error::domain(format!("mean gain must be >= 1, got {mean_gain}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("readout noise must be >= 0, got {sigma}")));
    }
    if samples.len() < MIN_EXCESS_NOISE_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "excess-noise estimate needs at least {MIN_EXCESS_NOISE_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let (mean, var) = sample_mean_and_variance(&samples.charges);
    let se_var = variance_stderr(&samples.charges, mean);
    let scale = n * mean_gain * mean_gain;
    let f_total = var / scale;
    let f_apd = (var - sigma * sigma) / scale;
    Ok(ExcessNoiseEstimate {
        f_apd,
        f_total,
        stderr_f: se_var / scale,
        n_used: n,
        m_used: mean_gain,
        sigma_used: sigma,
        f_apd_floor: f_apd.max(1.0),
        sub_unity: f_apd < 1.0,
        inconsistent_sigma: var - sigma * sigma < -3.0 * se_var,
        samples: samples.len(),
    })
}

/// Mean gain from the mean charge at operating bias and at zero bias (unity
/// gain) for the same light pulses.
pub fn calibrate_gain(biased_mean_charge: f64, unity_gain_mean_charge: f64) -> Result<f64> {
    if !(unity_gain_mean_charge > 0.0) {
        return Err(Error::domain(format!(
            "unity-gain mean charge must be positive, got {unity_gain_mean_charge}"
        )));
    }
    Ok(biased_mean_charge / unity_gain_mean_charge)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCalibration {
    pub gain: f64,
    /// Propagated from the standard errors of both sample means.
    pub stderr: f64,
    pub biased_mean: f64,
    pub unity_mean: f64,
    pub biased_pulses: usize,
    pub unity_pulses: usize,
}

pub fn calibrate_gain_from_samples(biased: &[f64], unity: &[f64]) -> Result<GainCalibration> {
    if biased.len() < 2 || unity.len() < 2 {
        return Err(Error::InsufficientData(
            "gain calibration needs at least 2 pulses per arm".into(),
        ));
    }
    let (mb, vb) = sample_mean_and_variance(biased);
    let (mu, vu) = sample_mean_and_variance(unity);
    let gain = calibrate_gain(mb, mu)?;
    let rel_b = vb / biased.len() as f64 / (mb * mb);
    let rel_u = vu / unity.len() as f64 / (mu * mu);
    Ok(GainCalibration {
        gain,
        stderr: gain.abs() * (rel_b + rel_u).sqrt(),
        biased_mean: mb,
        unity_mean: mu,
        biased_pulses: biased.len(),
        unity_pulses: unity.len(),
    })
}
