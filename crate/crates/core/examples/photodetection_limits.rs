//! Minimum detectable photon number for a given noise floor, in pulse mode
//! and in continuous-illumination CDS mode, and a full noise budget with APD
//! excess noise and dark-current noise added in quadrature.
//!
//! ```bash
//! cargo run -p apdsim --example photodetection_limits
//! ```

use apdsim::prelude::*;

fn main() -> apdsim::Result<()> {
    let (sigma, gain, eta) = (7.0, 10.8, 0.61);
    for mode in [LimitMode::Pulse, LimitMode::ContinuumCds] {
        let photons = photodetection_limit(sigma, gain, eta, mode)?;
        println!("{mode:?}: {photons:.3} photons");
    }

    println!("\nnoise budget, pulse mode, M = {gain}");
    println!(
        "{:>8} {:>6} {:>8} {:>8} {:>8}",
        "dark_e", "n", "excess", "total", "photons"
    );
    let f = mcintyre_excess_noise(gain, 0.006)?;
    for dark_e in [0.0, 5.27, 20.0] {
        for n in [0.0, 1.0] {
            let b = noise_budget(sigma, f, n, gain, eta, dark_e, LimitMode::Pulse)?;
            println!(
                "{dark_e:>8.2} {n:>6} {:>8.2} {:>8.2} {:>8.3}",
                b.apd_excess_e, b.total_e, b.limit_photons
            );
        }
    }
    Ok(())
}
