//! Recovering the APD excess noise factor from the charge variance,
//! `Var = n M^2 F + sigma^2`, over a grid of true F and photoelectron means.
//!
//! ```bash
//! cargo run --release -p apdsim --example excess_noise_recovery
//! ```

use apdsim::prelude::*;

fn main() -> apdsim::Result<()> {
    let gain = 10.8;
    let sigma = 7.0;
    println!(
        "{:>6} {:>5} {:>8} {:>8} {:>8} {:>7}",
        "F", "n", "f_apd", "stderr", "f_total", "z"
    );
    for (i, f_true) in [1.2, 2.0, 5.0].into_iter().enumerate() {
        for (j, n) in [1.0, 3.0, 10.0].into_iter().enumerate() {
            let scenario = Scenario {
                source: SourceSpec::pulsed_photoelectrons(n, 0.61, 100_000),
                apd: ApdSpec::new(gain, GainModel::GammaVariance).with_excess_noise(f_true),
                readout: ReadoutSpec::default().with_read_noise(sigma / 2f64.sqrt()),
                seed: (10 * i + j) as u64,
            };
            let charges = run_scenario(&scenario)?.charges;
            let est = estimate_excess_noise(&charges, n, gain, sigma)?;
            println!(
                "{f_true:>6.1} {n:>5} {:>8.4} {:>8.4} {:>8.4} {:>7.2}",
                est.f_apd,
                est.stderr_f,
                est.f_total,
                (est.f_apd - f_true) / est.stderr_f
            );
        }
    }
    Ok(())
}
