//! Photodetection limit: the photon number at which the signal equals the
//! total RMS noise (SNR = 1). A pulse is read against `sigma_total`; a
//! continuum signal read by one correlated double sample carries `sqrt(2)`
//! times that noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMode {
    Pulse,
    ContinuumCds,
}

impl std::str::FromStr for LimitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pulse" => Ok(LimitMode::Pulse),
            "continuum_cds" => Ok(LimitMode::ContinuumCds),
            other => Err(Error::domain(format!(
                "unknown limit mode `{other}` (expected `pulse` or `continuum_cds`)"
            ))),
        }
    }
}

pub fn photodetection_limit(sigma_total: f64, mean_gain: f64, eta: f64, mode: LimitMode) -> Result<f64> {
    if !(mean_gain >= 1.0) || !mean_gain.is_finite() {
        return Err(Error::domain(format!("mean gain must be >= 1, got {mean_gain}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!(
            "quantum efficiency must lie in (0, 1], got {eta}"
        )));
    }
    if !(sigma_total >= 0.0) || !sigma_total.is_finite() {
        return Err(Error::domain(format!("noise must be >= 0, got {sigma_total}")));
    }
    let noise = match mode {
        LimitMode::Pulse => sigma_total,
        LimitMode::ContinuumCds => std::f64::consts::SQRT_2 * sigma_total,
    };
    Ok(noise / (mean_gain * eta))
}

/// Noise contributions in anode electrons, combined in quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub readout_e: f64,
    pub apd_excess_e: f64,
    pub dark_e: f64,
    pub total_e: f64,
    pub limit_photons: f64,
    pub mode: LimitMode,
}

/// `apd_excess_e = M sqrt(n (F - 1))` is the part of `sqrt(n M^2 F)` in
/// excess of Poisson noise on `n` photoelectrons.
pub fn noise_budget(
    readout_e: f64,
    f_apd: f64,
    n: f64,
    mean_gain: f64,
    eta: f64,
    dark_e: f64,
    mode: LimitMode,
) -> Result<NoiseBudget> {
    if !(f_apd >= 1.0) || !f_apd.is_finite() {
        return Err(Error::domain(format!("excess noise factor must be >= 1, got {f_apd}")));
    }
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::domain(format!("photoelectron number must be >= 0, got {n}")));
    }
    for (name, v) in [("readout noise", readout_e), ("dark noise", dark_e)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    let apd_excess_e = mean_gain * (n * (f_apd - 1.0)).sqrt();
    let total_e = (readout_e * readout_e + apd_excess_e * apd_excess_e + dark_e * dark_e).sqrt();
    Ok(NoiseBudget {
        readout_e,
        apd_excess_e,
        dark_e,
        total_e,
        limit_photons: photodetection_limit(total_e, mean_gain, eta, mode)?,
        mode,
    })
}
