//! Sweeping the mean gain of a scenario and writing the sweep table as CSV:
//! McIntyre F, the excess noise recovered from each simulated run, and the
//! photodetection limit.
//!
//! ```bash
//! cargo run --release -p apdsim --example parameter_sweep
//! ```

use apdsim::cli::{parse_range, run_sweep, write_sweep_csv, ScenarioConfig, SweepParam};
use apdsim::prelude::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig {
        source: SourceSpec::pulsed_photoelectrons(10.0, 0.61, 20_000),
        apd: ApdSpec::new(10.8, GainModel::GammaVariance),
        readout: ReadoutSpec::default().with_read_noise(7.0 / 2f64.sqrt()),
        seed: None,
    };
    let grid = parse_range("5:50:10")?;
    let rows = run_sweep(&cfg, SweepParam::Gain, &grid, 2024)?;
    write_sweep_csv(std::io::stdout().lock(), SweepParam::Gain, &rows)?;
    Ok(())
}
