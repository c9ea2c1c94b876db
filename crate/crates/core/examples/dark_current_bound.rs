//! Upper bounds on dark current from long dark traces: a noiseless injected
//! current, a noise-only trace, and bulk dark current at two bias points,
//! whose slopes scale with gain.
//!
//! ```bash
//! cargo run --release -p apdsim --example dark_current_bound
//! ```

use apdsim::prelude::*;
use apdsim::readout::constant_current_events;

fn main() -> apdsim::Result<()> {
    let windows = 20_000;

    let quiet = ReadoutSpec::default().with_read_noise(0.0);
    let quiet = quiet.clone().with_duration(quiet.duration_for_windows(windows));
    let trace = simulate_trace(
        &constant_current_events(&quiet, 1.0, windows),
        &quiet,
        &mut trial_rng(1, 0),
    )?;
    let b = estimate_dark_current_bound(
        &[BiasTrace {
            bias: 92.2,
            gain: 10.8,
            trace,
        }],
        DarkBoundMethod::Slope,
    )?;
    println!(
        "injected 1 e/s, no noise: slope {:.6} e/s, bound {:.6}",
        b.per_bias_slopes[0].slope, b.bound
    );

    let noisy = ReadoutSpec::default();
    let noisy = noisy.clone().with_duration(noisy.duration_for_windows(windows));
    let trace = simulate_trace(&[], &noisy, &mut trial_rng(2, 0))?;
    let bt = [BiasTrace {
        bias: 92.2,
        gain: 10.8,
        trace,
    }];
    let b = estimate_dark_current_bound(&bt, DarkBoundMethod::Slope)?;
    let s = b.per_bias_slopes[0];
    println!(
        "noise only: slope {:+.5} +- {:.5} e/s, bound {:.5} e/s",
        s.slope, s.stderr, b.bound
    );
    let mv = estimate_dark_current_bound(&bt, DarkBoundMethod::MaxVariation { span: 10.0 })?;
    println!("            largest 10 s excursion: {:.3} e/s", mv.bound);

    let traces = [(92.2, 10.8), (99.5, 31.1)]
        .into_iter()
        .map(|(bias, gain)| {
            let mut apd = ApdSpec::new(gain, GainModel::GammaVariance);
            apd.dark_rate = 5.0;
            let scenario = Scenario {
                source: SourceSpec::dark(windows),
                apd,
                readout: ReadoutSpec::default().with_read_noise(7.0 / 2f64.sqrt()),
                seed: 3,
            };
            Ok(BiasTrace {
                bias,
                gain,
                trace: run_scenario(&scenario)?.trace,
            })
        })
        .collect::<apdsim::Result<Vec<_>>>()?;
    let b = estimate_dark_current_bound(&traces, DarkBoundMethod::Slope)?;
    for s in &b.per_bias_slopes {
        println!(
            "{:.1} V (M = {:.1}): {:.2} +- {:.3} e/s",
            s.bias, s.gain, s.slope, s.stderr
        );
    }
    println!("bias dependent: {}", b.bias_dependent);
    Ok(())
}
