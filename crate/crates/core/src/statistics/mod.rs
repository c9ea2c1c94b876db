//! Electron-number model, histograms, goodness of fit, excess-noise and gain
//! estimators, and photodetection limits.

mod estimators;
mod histogram;
mod ks;
mod limits;
mod model;

pub use estimators::{
    calibrate_gain, calibrate_gain_from_samples, estimate_excess_noise, sample_mean_and_variance, ExcessNoiseEstimate,
    GainCalibration, MIN_EXCESS_NOISE_SAMPLES,
};
pub use histogram::{build_histogram, ElectronHistogram, DEFAULT_BIN_WIDTH};
pub use ks::{kolmogorov_survival, ks_distance, ks_test, KsResult, MIN_KS_SAMPLES};
pub use limits::{noise_budget, photodetection_limit, LimitMode, NoiseBudget};
pub use model::{model_cdf, model_density, model_point_masses, poisson_truncation, ElectronNumberModel, ModelParams};
