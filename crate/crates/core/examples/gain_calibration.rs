//! Gain calibration from two measurement arms: the mean charge at the
//! operating bias divided by the mean charge at unity gain, with the error
//! propagated from both sample means.
//!
//! ```bash
//! cargo run --release -p apdsim --example gain_calibration
//! ```

use apdsim::prelude::*;

fn arm(n: f64, gain: f64, model: GainModel, seed: u64) -> apdsim::Result<Vec<f64>> {
    let scenario = Scenario {
        source: SourceSpec::pulsed_photoelectrons(n, 0.61, 2000),
        apd: ApdSpec::new(gain, model),
        readout: ReadoutSpec::default().with_read_noise(7.0 / 2f64.sqrt()),
        seed,
    };
    Ok(run_scenario(&scenario)?.charges.charges)
}

fn main() -> apdsim::Result<()> {
    // Bright enough that the unity-gain arm is well above the readout noise.
    let n = 500.0;
    for (k, gain) in [10.8, 31.1].into_iter().enumerate() {
        let biased = arm(n, gain, GainModel::GammaVariance, 2 * k as u64)?;
        let unity = arm(n, 1.0, GainModel::Deterministic, 2 * k as u64 + 1)?;
        let cal = calibrate_gain_from_samples(&biased, &unity)?;
        println!(
            "true M = {gain:>5.1}: estimate {:.3} +- {:.3}  (means {:.1} / {:.1} e)",
            cal.gain, cal.stderr, cal.biased_mean, cal.unity_mean
        );
    }
    Ok(())
}
