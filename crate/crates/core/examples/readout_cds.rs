//! The charge-integrating readout: window-averaged voltages, charge extraction
//! by differencing adjacent windows, the resulting sqrt(2) noise growth and
//! negative lag-1 correlation, and the immunity of differences to linear drift.
//!
//! ```bash
//! cargo run --release -p apdsim --example readout_cds
//! ```

use apdsim::prelude::*;
use apdsim::statistics::sample_mean_and_variance;

fn lag1_correlation(xs: &[f64]) -> f64 {
    let (mean, var) = sample_mean_and_variance(xs);
    let cov = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    cov / var
}

fn main() -> apdsim::Result<()> {
    let spec = ReadoutSpec::default().with_read_noise(7.0);
    let spec = spec.clone().with_duration(spec.duration_for_windows(50_001));
    println!(
        "{:.3} e per mV at C_f = {:e} F",
        spec.electrons_per_volt() * 1e-3,
        spec.feedback_capacitance
    );

    let trace = simulate_trace(&[], &spec, &mut trial_rng(9, 0))?;
    let windows: Vec<f64> = trace.voltages.iter().map(|&v| trace.to_electrons(v)).collect();
    let charges = extract_pulse_charges(&trace)?;
    let (_, vw) = sample_mean_and_variance(&windows);
    let (_, vq) = sample_mean_and_variance(&charges.charges);
    println!(
        "window noise {:.3} e, charge noise {:.3} e (cds_noise {:.3})",
        vw.sqrt(),
        vq.sqrt(),
        cds_noise(&spec)
    );
    println!(
        "variance ratio {:.4}, lag-1 correlation {:+.4}",
        vq / vw,
        lag1_correlation(&charges.charges)
    );

    let mut drifting = spec.clone();
    drifting.drift_rate = 2e-3;
    let shifted = extract_pulse_charges(&simulate_trace(&[], &drifting, &mut trial_rng(9, 0))?)?;
    let offset = shifted.charges[0] - charges.charges[0];
    let (_, vd) = sample_mean_and_variance(&shifted.charges);
    println!(
        "drift {} V/s: offset {:.3} e per charge, variance change {:.1e}",
        drifting.drift_rate,
        offset,
        vd / vq - 1.0
    );

    let spec = ReadoutSpec::default().with_read_noise(0.0);
    let spec = spec.clone().with_duration(spec.duration_for_windows(4));
    let trace = simulate_trace(&pulse_events(&spec, &[10.0, 20.0, 30.0]), &spec, &mut trial_rng(0, 0))?;
    println!(
        "noiseless [10, 20, 30] -> {:.6?}",
        extract_pulse_charges(&trace)?.charges
    );
    Ok(())
}
