//! Monte Carlo simulation and statistical analysis of a linear-mode avalanche
//! photodiode read out by a charge-integrating amplifier with correlated
//! double sampling.
//!
//! The chain modelled per light pulse:
//!
//! 1. photons ~ Poisson(mu), photoelectrons ~ Binomial(photons, eta), drawn
//!    directly as Poisson(mu eta);
//! 2. dark electrons ~ Poisson(dark_rate * interval);
//! 3. avalanche multiplication of every primary ([`avalanche`]);
//! 4. integration on the feedback capacitor, window averaging with read
//!    noise, and charge extraction by differencing ([`readout`]);
//! 5. histogramming, comparison with the Poisson-Gaussian electron-number
//!    model, and excess-noise and detection-limit estimates ([`statistics`]).
//!
//! ```no_run
//! use apdsim::prelude::*;
//!
//! let scenario = Scenario {
//!     source: SourceSpec::pulsed_photoelectrons(1.0, 0.61, 100_000),
//!     apd: ApdSpec::new(10.8, GainModel::Deterministic),
//!     readout: ReadoutSpec::default().with_read_noise(7.0 / 2f64.sqrt()),
//!     seed: 42,
//! };
//! let result = run_scenario(&scenario)?;
//! println!("KS p = {:?}", result.summary.ks.map(|k| k.p_value));
//! # Ok::<(), apdsim::Error>(())
//! ```

// `!(x >= 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avalanche;
pub mod cli;
pub mod error;
pub mod io;
pub mod readout;
pub mod scenario;
pub mod seed;
pub mod statistics;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::avalanche::{
        fit_gain_curve, mcintyre_excess_noise, multiply_primaries, sample_single_electron_gain, ApdSpec, GainCurve,
        GainModel, GainSample, GainSampler,
    };
    pub use crate::readout::{
        cds_noise, estimate_dark_current_bound, extract_pulse_charges, pulse_events, simulate_trace, BiasTrace,
        ChargeSamples, DarkBoundMethod, ReadoutSpec, VoltageTrace,
    };
    pub use crate::scenario::{run_scenario, Scenario, ScenarioResult, SourceMode, SourceSpec};
    pub use crate::seed::{derive_trial_seed, trial_rng};
    pub use crate::statistics::{
        build_histogram, calibrate_gain, calibrate_gain_from_samples, estimate_excess_noise, ks_distance, model_cdf,
        model_density, noise_budget, photodetection_limit, LimitMode, ModelParams,
    };
}
