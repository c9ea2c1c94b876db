//! Electron-number distributions in the linear, low-excess-noise regime:
//! mean gain 10.8, 7 e of noise per extracted charge, n = 1, 3 and 10 mean
//! photoelectrons. Each simulated distribution is compared with the
//! Poisson-Gaussian model by a KS test, and the histogram is printed next to
//! the model's expected counts.
//!
//! ```bash
//! cargo run --release -p apdsim --example linear_regime
//! ```

use apdsim::prelude::*;
use apdsim::statistics::ElectronNumberModel;

fn main() -> apdsim::Result<()> {
    let eta = 0.61;
    let gain = 10.8;
    // Differencing two windows adds their noise in quadrature.
    let window_noise = 7.0 / 2f64.sqrt();

    for (k, n) in [1.0, 3.0, 10.0].into_iter().enumerate() {
        let scenario = Scenario {
            source: SourceSpec::pulsed_photoelectrons(n, eta, 100_000),
            apd: ApdSpec::new(gain, GainModel::GammaVariance).with_excess_noise(1.01),
            readout: ReadoutSpec::default().with_read_noise(window_noise),
            seed: 2005 + k as u64,
        };
        let t0 = std::time::Instant::now();
        let result = run_scenario(&scenario)?;
        let ks = result.summary.ks.expect("10^5 samples");
        println!(
            "n = {n:>4}: KS D = {:.5}, p = {:.3}  ({:.2} s)",
            ks.d,
            ks.p_value,
            t0.elapsed().as_secs_f64()
        );

        let model = ElectronNumberModel::new(scenario.model_params())?;
        let total = result.histogram.total as f64;
        println!("  bin [e]        count    model");
        for (lo, hi, count) in result.histogram.bins().filter(|b| b.0 >= -25.0 && b.1 <= 200.0) {
            let expected = total * (model.cdf(hi) - model.cdf(lo));
            println!("  [{lo:>6.1},{hi:>6.1})  {count:>6}  {expected:>8.1}");
        }
    }
    Ok(())
}
