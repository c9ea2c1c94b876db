//! Single-electron gain distributions of the three multiplication models at
//! the same mean gain: fixed gain, gamma-distributed gain with a chosen excess
//! noise factor, and a discrete branching chain whose excess noise follows
//! from its stage count.
//!
//! ```bash
//! cargo run --release -p apdsim --example gain_models
//! ```

use apdsim::avalanche::{branching_excess_noise, branching_parameters, GainSampler};
use apdsim::prelude::*;
use apdsim::statistics::sample_mean_and_variance;

fn main() -> apdsim::Result<()> {
    let gain = 10.8;
    let (stages, p) = branching_parameters(gain);
    println!(
        "branching chain: {stages} stages, p = {p:.5}, F = {:.4}",
        branching_excess_noise(stages, p)
    );

    let models = [
        ("deterministic", ApdSpec::new(gain, GainModel::Deterministic)),
        ("gamma (McIntyre)", ApdSpec::new(gain, GainModel::GammaVariance)),
        ("branching", ApdSpec::new(gain, GainModel::Branching)),
    ];
    for (label, spec) in models {
        let sampler = GainSampler::new(&spec)?;
        let mut rng = trial_rng(4, 0);
        let draws: Vec<f64> = (0..200_000)
            .map(|_| sampler.multiply(1, &mut rng).anode_electrons as f64)
            .collect();
        let (mean, var) = sample_mean_and_variance(&draws);
        let f = (var + mean * mean) / (mean * mean);
        let max = draws.iter().cloned().fold(0.0, f64::max);
        println!("{label:>17}: mean {mean:.3}, F {f:.3}, largest {max}");
    }

    let spec = ApdSpec::new(gain, GainModel::Deterministic);
    let s = multiply_primaries(10, &spec, &mut trial_rng(0, 0))?;
    println!(
        "10 primaries at fixed M = {gain}: {} anode electrons",
        s.anode_electrons
    );
    Ok(())
}
