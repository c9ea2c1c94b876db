//! Scenario configuration and end-to-end simulation:
//! source -> photoelectrons -> avalanche -> integrator -> extracted charges ->
//! histogram and summary statistics.
//!
//! Pulse `i` draws all of its randomness from `trial_rng(seed, i)`; the
//! readout trace draws from `trial_rng(seed, READOUT_STREAM)`. Pulses can
//! therefore be simulated in any order, or in parallel, with identical results.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avalanche::{mcintyre_excess_noise, ApdSpec, GainSampler};
use crate::error::{Error, Result};
use crate::readout::{
    cds_noise, extract_pulse_charges, pulse_events, simulate_trace, ChargeSamples, ReadoutSpec, VoltageTrace,
};
use crate::seed::trial_rng;
use crate::statistics::{
    build_histogram, estimate_excess_noise, ks_distance, photodetection_limit, ElectronHistogram, ExcessNoiseEstimate,
    KsResult, LimitMode, ModelParams, DEFAULT_BIN_WIDTH, MIN_EXCESS_NOISE_SAMPLES, MIN_KS_SAMPLES,
};

/// Trial index reserved for the readout noise stream.
pub const READOUT_STREAM: u64 = u64::MAX;

/// Version tag written into every run summary.
pub const SUMMARY_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Pulsed,
    Continuum,
    Dark,
}

fn default_pulse_interval() -> f64 {
    0.05
}

fn default_pulses() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub mode: SourceMode,
    /// Mean incident photons per pulse. Zero in dark mode; unused in
    /// continuum mode, where it follows from `continuum_rate`.
    #[serde(default)]
    pub mean_photons_per_pulse: f64,
    #[serde(default = "default_pulse_interval")]
    pub pulse_interval: f64,
    /// Seconds. Informational; intensity is set by the photon mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_width: Option<f64>,
    /// Photons per second, continuum mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuum_rate: Option<f64>,
    #[serde(default = "default_pulses")]
    pub n_pulses: usize,
}

impl SourceSpec {
    pub fn pulsed(mean_photons: f64, n_pulses: usize) -> Self {
        SourceSpec {
            mode: SourceMode::Pulsed,
            mean_photons_per_pulse: mean_photons,
            pulse_interval: default_pulse_interval(),
            pulse_width: None,
            continuum_rate: None,
            n_pulses,
        }
    }

    pub fn dark(n_pulses: usize) -> Self {
        SourceSpec {
            mode: SourceMode::Dark,
            ..SourceSpec::pulsed(0.0, n_pulses)
        }
    }

    pub fn continuum(photons_per_second: f64, n_samples: usize) -> Self {
        SourceSpec {
            mode: SourceMode::Continuum,
            continuum_rate: Some(photons_per_second),
            ..SourceSpec::pulsed(0.0, n_samples)
        }
    }

    /// Pulsed source whose mean photoelectron number is `n` at efficiency `eta`.
    pub fn pulsed_photoelectrons(n: f64, eta: f64, n_pulses: usize) -> Self {
        SourceSpec::pulsed(n / eta, n_pulses)
    }

    /// Mean photons arriving in one pulse interval.
    pub fn photons_per_interval(&self) -> f64 {
        match self.mode {
            SourceMode::Pulsed => self.mean_photons_per_pulse,
            SourceMode::Continuum => self.continuum_rate.unwrap_or(0.0) * self.pulse_interval,
            SourceMode::Dark => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mu = self.mean_photons_per_pulse;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::validation(
                "source.mean_photons_per_pulse",
                "must be a finite number >= 0",
            ));
        }
        match self.mode {
            SourceMode::Pulsed if mu == 0.0 => {
                return Err(Error::validation(
                    "source.mean_photons_per_pulse",
                    "must be > 0 for a pulsed source (use mode `dark` for no light)",
                ))
            }
            SourceMode::Dark if mu != 0.0 => {
                return Err(Error::validation(
                    "source.mean_photons_per_pulse",
                    "must be 0 in dark mode",
                ))
            }
            SourceMode::Continuum if mu != 0.0 => {
                return Err(Error::validation(
                    "source.mean_photons_per_pulse",
                    "must be 0 in continuum mode (intensity comes from source.continuum_rate)",
                ))
            }
            _ => {}
        }
        match (self.mode, self.continuum_rate) {
            (SourceMode::Continuum, Some(r)) if r > 0.0 && r.is_finite() => {}
            (SourceMode::Continuum, _) => {
                return Err(Error::validation(
                    "source.continuum_rate",
                    "must be > 0 in continuum mode",
                ))
            }
            (_, Some(_)) => {
                return Err(Error::validation(
                    "source.continuum_rate",
                    "is only valid in continuum mode",
                ))
            }
            _ => {}
        }
        if !(self.pulse_interval > 0.0) || !self.pulse_interval.is_finite() {
            return Err(Error::validation("source.pulse_interval", "must be positive"));
        }
        if let Some(w) = self.pulse_width {
            if !(w >= 0.0) || w > self.pulse_interval {
                return Err(Error::validation(
                    "source.pulse_width",
                    "must lie in [0, source.pulse_interval]",
                ));
            }
        }
        if self.n_pulses == 0 {
            return Err(Error::validation("source.n_pulses", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub source: SourceSpec,
    pub apd: ApdSpec,
    #[serde(default)]
    pub readout: ReadoutSpec,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.apd.validate()?;
        self.readout.validate()?;
        if !(self.source.pulse_interval > self.readout.window) {
            return Err(Error::validation(
                "source.pulse_interval",
                "must exceed the readout averaging window",
            ));
        }
        let rel = (self.source.pulse_interval - self.readout.sample_interval).abs() / self.readout.sample_interval;
        if rel > 1e-12 {
            return Err(Error::validation(
                "source.pulse_interval",
                "must equal readout.sample_interval (one readout window per pulse)",
            ));
        }
        if let Some(d) = self.readout.trace_duration {
            if d < self.required_duration() {
                return Err(Error::validation(
                    "readout.trace_duration",
                    format!(
                        "must be at least {} s for {} pulses",
                        self.required_duration(),
                        self.source.n_pulses
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Trace length holding one window before the first pulse and one after
    /// each pulse.
    pub fn required_duration(&self) -> f64 {
        self.readout.duration_for_windows(self.source.n_pulses + 1)
    }

    /// Mean primary photoelectrons per pulse, `mu * eta`.
    pub fn mean_photoelectrons(&self) -> f64 {
        self.source.photons_per_interval() * self.apd.quantum_efficiency
    }

    /// Mean dark electrons per pulse interval.
    pub fn mean_dark_electrons(&self) -> f64 {
        self.apd.dark_rate * self.source.pulse_interval
    }

    /// Mean multiplied primaries per pulse: photoelectrons plus, if dark
    /// current is multiplied, dark electrons.
    pub fn mean_primaries(&self) -> f64 {
        let dark = if self.apd.dark_multiplied {
            self.mean_dark_electrons()
        } else {
            0.0
        };
        self.mean_photoelectrons() + dark
    }

    /// Noise of one extracted charge: two read-noise windows are differenced.
    pub fn charge_noise(&self) -> f64 {
        cds_noise(&self.readout)
    }

    /// Electron-number model for this scenario's extracted charges.
    pub fn model_params(&self) -> ModelParams {
        ModelParams::new(self.mean_primaries(), self.apd.mean_gain, self.charge_noise())
    }
}

/// Per-pulse anode charge generator.
#[derive(Debug, Clone)]
pub struct PulseSimulator {
    seed: u64,
    sampler: GainSampler,
    photo: Option<Poisson<f64>>,
    dark: Option<Poisson<f64>>,
    dark_multiplied: bool,
}

impl PulseSimulator {
    pub fn new(s: &Scenario) -> Result<Self> {
        s.validate()?;
        let poisson = |mean: f64| -> Result<Option<Poisson<f64>>> {
            if mean > 0.0 {
                Poisson::new(mean).map(Some).map_err(|e| Error::domain(e.to_string()))
            } else {
                Ok(None)
            }
        };
        Ok(PulseSimulator {
            seed: s.seed,
            sampler: GainSampler::new(&s.apd)?,
            photo: poisson(s.mean_photoelectrons())?,
            dark: poisson(s.mean_dark_electrons())?,
            dark_multiplied: s.apd.dark_multiplied,
        })
    }

    /// Anode electrons deposited by pulse `index`.
    pub fn anode_charge(&self, index: u64) -> f64 {
        let mut rng = trial_rng(self.seed, index);
        let photo = self.photo.map_or(0, |p| p.sample(&mut rng) as u64);
        let dark = self.dark.map_or(0, |p| p.sample(&mut rng) as u64);
        let (multiplied, surface) = if self.dark_multiplied {
            (photo + dark, 0)
        } else {
            (photo, dark)
        };
        (self.sampler.multiply(multiplied, &mut rng).anode_electrons + surface) as f64
    }

    pub fn anode_charges(&self, n_pulses: usize) -> Vec<f64> {
        (0..n_pulses as u64)
            .into_par_iter()
            .map(|i| self.anode_charge(i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: String,
    pub seed: u64,
    pub pulses: usize,
    pub mean_photons_per_pulse: f64,
    pub quantum_efficiency: f64,
    /// Expected mean multiplied primaries per pulse.
    pub n: f64,
    pub mean_gain: f64,
    pub configured_excess_noise: Option<f64>,
    pub mcintyre_excess_noise: f64,
    /// Readout noise of one extracted charge.
    pub charge_noise_e: f64,
    pub mean_charge_e: f64,
    /// `mean_charge_e / mean_gain`.
    pub n_observed: f64,
    pub excess_noise: Option<ExcessNoiseEstimate>,
    /// Extracted charges against the electron-number model.
    pub ks: Option<KsResult>,
    pub limit_pulse_photons: f64,
    pub limit_continuum_cds_photons: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub trace: VoltageTrace,
    pub charges: ChargeSamples,
    pub histogram: ElectronHistogram,
    pub summary: RunSummary,
}

pub fn run_scenario(s: &Scenario) -> Result<ScenarioResult> {
    run_scenario_binned(s, DEFAULT_BIN_WIDTH)
}

pub fn run_scenario_binned(s: &Scenario, bin_width: f64) -> Result<ScenarioResult> {
    let sim = PulseSimulator::new(s)?;
    let anode = sim.anode_charges(s.source.n_pulses);

    let mut readout = s.readout.clone();
    readout.trace_duration = Some(s.required_duration());
    let events = pulse_events(&readout, &anode);
    let trace = simulate_trace(&events, &readout, &mut trial_rng(s.seed, READOUT_STREAM))?;
    let charges = extract_pulse_charges(&trace)?;
    let histogram = build_histogram(&charges, bin_width)?;
    let summary = summarize(s, &charges)?;
    Ok(ScenarioResult {
        trace,
        charges,
        histogram,
        summary,
    })
}

fn summarize(s: &Scenario, charges: &ChargeSamples) -> Result<RunSummary> {
    let params = s.model_params();
    let m = s.apd.mean_gain;
    let eta = s.apd.quantum_efficiency;
    let mean_charge = charges.charges.iter().sum::<f64>() / charges.len() as f64;
    let excess_noise = if params.n > 0.0 && charges.len() >= MIN_EXCESS_NOISE_SAMPLES {
        Some(estimate_excess_noise(charges, params.n, m, params.sigma)?)
    } else {
        None
    };
    // With no readout noise the model is a lattice of point masses, which the
    // continuous KS statistic does not handle.
    let ks = if charges.len() >= MIN_KS_SAMPLES && params.sigma > 0.0 {
        Some(ks_distance(charges, &params)?)
    } else {
        None
    };
    Ok(RunSummary {
        schema_version: SUMMARY_VERSION.to_string(),
        seed: s.seed,
        pulses: charges.len(),
        mean_photons_per_pulse: s.source.photons_per_interval(),
        quantum_efficiency: eta,
        n: params.n,
        mean_gain: m,
        configured_excess_noise: s.apd.configured_excess_noise(),
        mcintyre_excess_noise: mcintyre_excess_noise(m, s.apd.ionization_ratio)?,
        charge_noise_e: params.sigma,
        mean_charge_e: mean_charge,
        n_observed: mean_charge / m,
        excess_noise,
        ks,
        limit_pulse_photons: photodetection_limit(params.sigma, m, eta, LimitMode::Pulse)?,
        limit_continuum_cds_photons: photodetection_limit(params.sigma, m, eta, LimitMode::ContinuumCds)?,
    })
}
