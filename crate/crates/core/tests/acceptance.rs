//! End-to-end acceptance checks. Run with
//! `cargo test -p apdsim --test acceptance -- --nocapture` to see one
//! PASS/FAIL line per criterion.

use std::fs;

use apdsim::cli::{cmd_simulate, parse_config, run_sweep, write_sweep_csv, SweepParam};
use apdsim::prelude::*;
use apdsim::readout::{constant_current_events, ols_slope};
use apdsim::seed::derive_trial_seed;
use apdsim::statistics::sample_mean_and_variance;

const ETA: f64 = 0.61;

fn report(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    println!(
        "acceptance {id} [{name}]: {} - {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
}

fn window_noise_for(charge_sigma: f64) -> f64 {
    charge_sigma / std::f64::consts::SQRT_2
}

fn pulsed(n: f64, gain: f64, model: GainModel, f: Option<f64>, pulses: usize, seed: u64) -> Scenario {
    let mut apd = ApdSpec::new(gain, model);
    apd.excess_noise_override = f;
    Scenario {
        source: SourceSpec::pulsed_photoelectrons(n, ETA, pulses),
        apd,
        readout: ReadoutSpec::default().with_read_noise(window_noise_for(7.0)),
        seed,
    }
}

#[test]
fn criterion_1_mcintyre_values() {
    let f1 = mcintyre_excess_noise(10.8, 0.006).unwrap();
    let f2 = mcintyre_excess_noise(31.1, 0.006).unwrap();
    let unity = [0.0, 0.006, 0.5, 1.0]
        .iter()
        .all(|&k| mcintyre_excess_noise(1.0, k).unwrap() == 1.0);
    let pass = (f1 - 1.961).abs() <= 1e-3 && (f2 - 2.143).abs() <= 1e-3 && unity;
    report(
        1,
        "excess-noise formula",
        pass,
        format!("F(10.8) = {f1:.6}, F(31.1) = {f2:.6}, F(1, k) == 1: {unity}"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_photodetection_limits() {
    let pulse = photodetection_limit(7.0, 10.8, ETA, LimitMode::Pulse).unwrap();
    let cds = photodetection_limit(7.0, 10.8, ETA, LimitMode::ContinuumCds).unwrap();
    let pass = (pulse - 1.063).abs() < 5e-4
        && (cds - 1.503).abs() < 5e-4
        && format!("{pulse:.1}") == "1.1"
        && format!("{cds:.1}") == "1.5";
    report(
        2,
        "photodetection limits",
        pass,
        format!("pulse {pulse:.4}, continuum CDS {cds:.4} photons"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_linear_regime_agreement() {
    const MASTER: u64 = 0x0A11_0003;
    const REPS: u64 = 100;
    let start = std::time::Instant::now();
    let mut all = true;
    let mut details = Vec::new();
    for n in [1.0, 3.0, 10.0] {
        let mut rejected = 0;
        let mut min_p = 1.0f64;
        for rep in 0..REPS {
            let s = pulsed(
                n,
                10.8,
                GainModel::GammaVariance,
                Some(1.01),
                100_000,
                derive_trial_seed(MASTER, rep),
            );
            let res = run_scenario(&s).unwrap();
            let p = res.summary.ks.expect("ks").p_value;
            min_p = min_p.min(p);
            if p.is_nan() || p <= 0.01 {
                rejected += 1;
            }
        }
        let rate = (REPS - rejected) as f64 / REPS as f64;
        all &= rate >= 0.99;
        details.push(format!("n={n}: {rejected}/{REPS} rejected (min p {min_p:.2e})"));
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        3,
        "linear-regime KS agreement",
        all,
        format!("{}; {elapsed:.1} s", details.join(", ")),
    );
    assert!(all);
}

#[test]
fn criterion_4_excess_noise_regime_rejected() {
    let start = std::time::Instant::now();
    let s = pulsed(10.0, 31.1, GainModel::GammaVariance, Some(3.0), 100_000, 0x0A11_0004);
    let res = run_scenario(&s).unwrap();
    let ks = res.summary.ks.unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = ks.p_value < 1e-6;
    report(
        4,
        "excess-noise regime rejected",
        pass,
        format!("D = {:.4}, p = {:.2e}; {elapsed:.1} s", ks.d, ks.p_value),
    );
    assert!(pass);
}

#[test]
fn criterion_5_estimator_recovery() {
    const MASTER: u64 = 0x0A11_0005;
    const REPS: u64 = 20;
    let mut all = true;
    let mut identity_ok = true;
    let mut details = Vec::new();
    let mut cell = 0u64;
    for f_true in [1.2, 2.0, 5.0] {
        for n in [1.0, 3.0, 10.0] {
            let mut hits = 0;
            for rep in 0..REPS {
                let seed = derive_trial_seed(MASTER, cell * REPS + rep);
                let s = pulsed(n, 10.8, GainModel::GammaVariance, Some(f_true), 100_000, seed);
                let res = run_scenario(&s).unwrap();
                let est = estimate_excess_noise(&res.charges, n, 10.8, 7.0).unwrap();
                if (est.f_apd - f_true).abs() < 3.0 * est.stderr_f {
                    hits += 1;
                }
                let lhs = est.f_total - est.f_apd;
                let rhs = 49.0 / (n * 10.8 * 10.8);
                identity_ok &= ((lhs - rhs) / rhs).abs() <= 1e-12;
            }
            let ok = hits as f64 / REPS as f64 >= 0.95;
            all &= ok;
            details.push(format!("F={f_true} n={n}: {hits}/{REPS}"));
            cell += 1;
        }
    }
    let pass = all && identity_ok;
    report(
        5,
        "excess-noise estimator recovery",
        pass,
        format!("within 3 SE {}; identity holds: {identity_ok}", details.join(", ")),
    );
    assert!(pass);
}

fn electrons(trace: &VoltageTrace) -> Vec<f64> {
    trace.voltages.iter().map(|&v| trace.to_electrons(v)).collect()
}

fn variance(xs: &[f64]) -> f64 {
    sample_mean_and_variance(xs).1
}

#[test]
fn criterion_6_readout_properties() {
    // Identity at zero noise.
    let charges: Vec<f64> = (0..1000).map(|i| (i % 97) as f64 * 10.8).collect();
    let quiet = ReadoutSpec::default().with_read_noise(0.0);
    let quiet = quiet
        .clone()
        .with_duration(quiet.duration_for_windows(charges.len() + 1));
    let tr = simulate_trace(&pulse_events(&quiet, &charges), &quiet, &mut trial_rng(0x0A11_0006, 0)).unwrap();
    let back = extract_pulse_charges(&tr).unwrap();
    let max_err = back
        .charges
        .iter()
        .zip(&charges)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let identity = back.len() == charges.len() && max_err < 1e-9;

    // Difference noise at 1e4 pulses.
    let sigma = 7.0;
    let noisy = ReadoutSpec::default().with_read_noise(sigma);
    let noisy = noisy.clone().with_duration(noisy.duration_for_windows(10_001));
    let tr = simulate_trace(&[], &noisy, &mut trial_rng(0x0A11_0006, 1)).unwrap();
    let q = extract_pulse_charges(&tr).unwrap();
    let rms = variance(&q.charges).sqrt();
    // Lag-1 correlation of differenced white noise is -1/2, which inflates
    // the variance of the sample variance by (1 + 2 rho^2).
    let nq = q.len() as f64;
    let se = rms * (1.5 / (2.0 * nq)).sqrt();
    let rms_ok = (rms - sigma * 2f64.sqrt()).abs() < 3.0 * se;

    // CDS variance ratio.
    let long = ReadoutSpec::default().with_read_noise(sigma);
    let long = long.clone().with_duration(long.duration_for_windows(100_001));
    let tr = simulate_trace(&[], &long, &mut trial_rng(0x0A11_0006, 2)).unwrap();
    let ratio = variance(&extract_pulse_charges(&tr).unwrap().charges) / variance(&electrons(&tr));
    let ratio_ok = (ratio - 2.0).abs() <= 0.1;

    // Linear drift: same noise realization with and without drift.
    let mut drifting = noisy.clone();
    drifting.drift_rate = 3.0 / drifting.electrons_per_volt() / drifting.sample_interval;
    let base = extract_pulse_charges(&simulate_trace(&[], &noisy, &mut trial_rng(0x0A11_0006, 3)).unwrap()).unwrap();
    let shifted =
        extract_pulse_charges(&simulate_trace(&[], &drifting, &mut trial_rng(0x0A11_0006, 3)).unwrap()).unwrap();
    let offsets: Vec<f64> = shifted.charges.iter().zip(&base.charges).map(|(a, b)| a - b).collect();
    let spread =
        offsets.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)) - offsets.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let rel_var = (variance(&shifted.charges) - variance(&base.charges)).abs() / variance(&base.charges);
    let drift_ok = spread < 1e-9 && (offsets[0] - 3.0).abs() < 1e-9 && rel_var < 1e-9;

    let pass = identity && rms_ok && ratio_ok && drift_ok;
    report(
        6,
        "readout properties",
        pass,
        format!(
            "identity max err {max_err:.1e}; diff RMS {rms:.3} vs {:.3} (3 SE {:.3}); CDS ratio {ratio:.4}; drift offset spread {spread:.1e}, variance change {rel_var:.1e}",
            sigma * 2f64.sqrt(),
            3.0 * se
        ),
    );
    assert!(pass);
}

fn dark_trace(readout: &ReadoutSpec, windows: usize, rate: f64, rng_index: u64) -> VoltageTrace {
    let spec = readout.clone().with_duration(readout.duration_for_windows(windows));
    let events = constant_current_events(&spec, rate, windows);
    simulate_trace(&events, &spec, &mut trial_rng(0x0A11_0007, rng_index)).unwrap()
}

#[test]
fn criterion_7_dark_current_bound() {
    let windows = 20_000; // 1000 s at 50 ms
    let quiet = ReadoutSpec::default().with_read_noise(0.0);
    let tr = dark_trace(&quiet, windows, 1.0, 0);
    let span = tr.span();
    let b = estimate_dark_current_bound(
        &[BiasTrace {
            bias: 92.2,
            gain: 10.8,
            trace: tr,
        }],
        DarkBoundMethod::Slope,
    )
    .unwrap();
    let slope = b.per_bias_slopes[0].slope;
    let exact = (slope - 1.0).abs() < 1e-9 && format!("{slope:.3}") == "1.000";

    // Noise-only traces: reported 3 * stderr against the spread of slopes
    // over independent noise realizations.
    let noisy = ReadoutSpec::default().with_read_noise(7.0);
    let tr = dark_trace(&noisy, windows, 0.0, 1);
    let b = estimate_dark_current_bound(
        &[BiasTrace {
            bias: 92.2,
            gain: 10.8,
            trace: tr,
        }],
        DarkBoundMethod::Slope,
    )
    .unwrap();
    let s0 = b.per_bias_slopes[0];
    let bound_form = (b.bound - (s0.slope.abs() + 3.0 * s0.stderr)).abs() < 1e-12;
    let slopes: Vec<f64> = (0..1000)
        .map(|r| {
            let tr = dark_trace(&noisy, windows, 0.0, 100 + r);
            ols_slope(&tr.sample_times, &electrons(&tr)).0
        })
        .collect();
    let oracle = 3.0 * variance(&slopes).sqrt();
    let rel = (3.0 * s0.stderr - oracle).abs() / oracle;
    let resample_ok = bound_form && rel < 0.10;

    // Multiplied dark current scales with gain.
    let traces: Vec<BiasTrace> = [(92.2, 10.8), (99.5, 31.1)]
        .iter()
        .enumerate()
        .map(|(i, &(bias, gain))| {
            let mut apd = ApdSpec::new(gain, GainModel::GammaVariance);
            apd.dark_rate = 5.0;
            let s = Scenario {
                source: SourceSpec::dark(windows),
                apd,
                readout: ReadoutSpec::default().with_read_noise(window_noise_for(7.0)),
                seed: derive_trial_seed(0x0A11_0007, i as u64),
            };
            BiasTrace {
                bias,
                gain,
                trace: run_scenario(&s).unwrap().trace,
            }
        })
        .collect();
    let b = estimate_dark_current_bound(&traces, DarkBoundMethod::Slope).unwrap();
    let scaling = b.bias_dependent;

    let pass = exact && resample_ok && scaling;
    report(
        7,
        "dark-current bound",
        pass,
        format!(
            "noiseless slope {slope:.6} e/s over {span:.0} s; 3 SE {:.4} vs oracle {oracle:.4} ({:.1}%); slopes {:.1} / {:.1} e/s, bias_dependent {scaling}",
            3.0 * s0.stderr,
            100.0 * rel,
            b.per_bias_slopes[0].slope,
            b.per_bias_slopes[1].slope
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_gain_calibration() {
    const MASTER: u64 = 0x0A11_0008;
    const REPS: u64 = 20;
    let n = 500.0;
    let mut all = true;
    let mut details = Vec::new();
    for (g, gain) in [10.8, 31.1].into_iter().enumerate() {
        let mut hits = 0;
        for rep in 0..REPS {
            let idx = 2 * (g as u64 * REPS + rep);
            let biased = pulsed(
                n,
                gain,
                GainModel::GammaVariance,
                None,
                2000,
                derive_trial_seed(MASTER, idx),
            );
            let unity = pulsed(
                n,
                1.0,
                GainModel::Deterministic,
                None,
                2000,
                derive_trial_seed(MASTER, idx + 1),
            );
            let qb = run_scenario(&biased).unwrap().charges;
            let qu = run_scenario(&unity).unwrap().charges;
            let cal = calibrate_gain_from_samples(&qb.charges, &qu.charges).unwrap();
            if (cal.gain - gain).abs() < 3.0 * cal.stderr {
                hits += 1;
            }
        }
        all &= hits as f64 / REPS as f64 >= 0.95;
        details.push(format!("M={gain}: {hits}/{REPS} within 3 SE"));
    }
    report(8, "gain calibration", all, details.join(", "));
    assert!(all);
}

#[test]
fn criterion_9_determinism() {
    let config = r#"{
        "scenario": {
            "source": {"mode": "pulsed", "mean_photons_per_pulse": 4.918, "n_pulses": 3000},
            "apd": {"mean_gain": 31.1, "gain_model": "branching", "dark_rate": 2.0},
            "readout": {"read_noise": 4.95, "drift_walk": 1e-6}
        },
        "emit": ["trace", "charges", "histogram", "summary"]
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.json");
    fs::write(&cfg_path, config).unwrap();
    let a = cmd_simulate(&cfg_path, Some(99), Some(&dir.path().join("a"))).unwrap();
    let b = cmd_simulate(&cfg_path, Some(99), Some(&dir.path().join("b"))).unwrap();
    let mut identical = a.files.len() == 4 && a.files.len() == b.files.len();
    for (fa, fb) in a.files.iter().zip(&b.files) {
        identical &= fs::read(fa).unwrap() == fs::read(fb).unwrap();
    }

    let cfg = parse_config(config).unwrap().scenario;
    let grid = [5.0, 10.8, 31.1];
    let sweep = |seed| {
        let rows = run_sweep(&cfg, SweepParam::Gain, &grid, seed).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, SweepParam::Gain, &rows).unwrap();
        buf
    };
    let sweep_identical = sweep(5) == sweep(5);
    let differs = fs::read(&a.files[1]).unwrap()
        != fs::read(
            &cmd_simulate(&cfg_path, Some(100), Some(&dir.path().join("c")))
                .unwrap()
                .files[1],
        )
        .unwrap();

    let pass = identical && sweep_identical && differs;
    report(
        9,
        "determinism",
        pass,
        format!("simulate outputs identical: {identical}; sweep identical: {sweep_identical}; other seed differs: {differs}"),
    );
    assert!(pass);
}
