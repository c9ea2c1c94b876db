//! Fitting a Miller gain-voltage curve `M = 1 / (1 - (V / V_br)^m)` to
//! measured (bias, gain) points, then building an APD description at a new
//! bias from the fitted curve.
//!
//! ```bash
//! cargo run -p apdsim --example gain_curve_fit
//! ```

use apdsim::prelude::*;

fn main() -> apdsim::Result<()> {
    let anchors = [(92.2, 10.8), (99.5, 31.1)];
    let fit = fit_gain_curve(&anchors)?;
    println!(
        "V_br = {:.3} V, m = {:.3}",
        fit.curve.breakdown_voltage, fit.curve.exponent
    );
    for w in &fit.warnings {
        println!("warning: {w}");
    }
    for ((v, m), r) in anchors.iter().zip(&fit.residuals) {
        println!("  {v:>6.1} V: measured {m:>5.1}, residual {r:+.2e}");
    }

    println!("\n bias [V]    gain   McIntyre F");
    for bias in [0.0, 50.0, 80.0, 92.2, 95.0, 99.5, 102.0] {
        let m = fit.curve.gain_at(bias)?;
        println!("{bias:>9.1} {m:>7.2} {:>12.4}", mcintyre_excess_noise(m, 0.006)?);
    }

    let apd = ApdSpec::at_bias(fit.curve, 97.0, GainModel::GammaVariance)?;
    println!(
        "\nat 97 V: M = {:.2}, F = {:.3}",
        apd.mean_gain,
        apd.configured_excess_noise().unwrap_or(1.0)
    );
    Ok(())
}
