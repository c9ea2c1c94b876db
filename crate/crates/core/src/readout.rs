//! Ideal charge-integrating readout.
//!
//! The integrator never resets: its output is the cumulative anode charge
//! divided by the feedback capacitance. Between light pulses the output is
//! averaged over a quiet window of length `window`; each averaged value `V_i`
//! carries Gaussian read noise of `read_noise` electrons RMS plus optional
//! linear and random-walk drift. The charge of pulse `i` is recovered by
//! correlated double sampling, `Q_i = C_f (V_{i+1} - V_i)`.
//!
//! Window `i` occupies `[i * sample_interval, i * sample_interval + window)`;
//! its reported time is the window centre.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge in coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Minimum trace span accepted by the dark-current estimators, in seconds.
pub const MIN_DARK_TRACE_SPAN: f64 = 10.0;

fn default_read_noise() -> f64 {
    7.0
}
fn default_window() -> f64 {
    0.04
}
fn default_sample_interval() -> f64 {
    0.05
}
fn default_feedback_capacitance() -> f64 {
    1e-13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    /// Electrons RMS on each averaged window value.
    #[serde(default = "default_read_noise")]
    pub read_noise: f64,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    /// Farads.
    #[serde(default = "default_feedback_capacitance")]
    pub feedback_capacitance: f64,
    /// Volts per second.
    #[serde(default)]
    pub drift_rate: f64,
    /// Volts per square-root second.
    #[serde(default)]
    pub drift_walk: f64,
    /// Seconds. When simulating a scenario this is derived from the pulse
    /// count if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_duration: Option<f64>,
}

impl Default for ReadoutSpec {
    fn default() -> Self {
        ReadoutSpec {
            read_noise: default_read_noise(),
            window: default_window(),
            sample_interval: default_sample_interval(),
            feedback_capacitance: default_feedback_capacitance(),
            drift_rate: 0.0,
            drift_walk: 0.0,
            trace_duration: None,
        }
    }
}

impl ReadoutSpec {
    pub fn with_read_noise(mut self, sigma: f64) -> Self {
        self.read_noise = sigma;
        self
    }

    pub fn with_duration(mut self, seconds: f64) -> Self {
        self.trace_duration = Some(seconds);
        self
    }

    pub fn electrons_per_volt(&self) -> f64 {
        self.feedback_capacitance / ELEMENTARY_CHARGE
    }

    /// Duration that yields exactly `windows` averaged windows.
    pub fn duration_for_windows(&self, windows: usize) -> f64 {
        windows as f64 * self.sample_interval
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.read_noise) {
            return Err(Error::validation("readout.read_noise", "must be a finite number >= 0"));
        }
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(Error::validation("readout.window", "must be positive"));
        }
        if !(self.sample_interval > self.window) || !self.sample_interval.is_finite() {
            return Err(Error::validation(
                "readout.sample_interval",
                "must be finite and exceed readout.window",
            ));
        }
        if !(self.feedback_capacitance > 0.0) || !self.feedback_capacitance.is_finite() {
            return Err(Error::validation("readout.feedback_capacitance", "must be positive"));
        }
        if !self.drift_rate.is_finite() {
            return Err(Error::validation("readout.drift_rate", "must be finite"));
        }
        if !finite_nonneg(self.drift_walk) {
            return Err(Error::validation("readout.drift_walk", "must be a finite number >= 0"));
        }
        if let Some(d) = self.trace_duration {
            if !(d >= self.window) || !d.is_finite() {
                return Err(Error::validation(
                    "readout.trace_duration",
                    "must be finite and at least one window long",
                ));
            }
        }
        Ok(())
    }

    fn window_count(&self, duration: f64) -> usize {
        // Windows whose end lies within the trace.
        ((duration - self.window) / self.sample_interval + 1e-9).floor() as usize + 1
    }
}

/// Averaged integrator output, one value per quiet window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageTrace {
    pub sample_times: Vec<f64>,
    pub voltages: Vec<f64>,
    /// `C_f / e`.
    pub electrons_per_volt: f64,
    pub window: f64,
    pub sample_interval: f64,
}

impl VoltageTrace {
    pub fn len(&self) -> usize {
        self.voltages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltages.is_empty()
    }

    pub fn to_electrons(&self, volts: f64) -> f64 {
        volts * self.electrons_per_volt
    }

    pub fn to_volts(&self, electrons: f64) -> f64 {
        electrons / self.electrons_per_volt
    }

    pub fn span(&self) -> f64 {
        match (self.sample_times.first(), self.sample_times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Checks the grid is uniform with spacing `sample_interval`.
    pub fn validate(&self) -> Result<()> {
        if self.sample_times.len() != self.voltages.len() {
            return Err(Error::domain("trace times and voltages differ in length"));
        }
        let tol = 1e-9 * self.sample_interval.max(1.0) * self.sample_times.len().max(1) as f64;
        for (i, w) in self.sample_times.windows(2).enumerate() {
            if ((w[1] - w[0]) - self.sample_interval).abs() > tol {
                return Err(Error::domain(format!(
                    "non-uniform time grid between samples {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChargeSamples {
    /// Electrons; read noise can make these negative.
    pub charges: Vec<f64>,
    pub pulse_indices: Vec<u64>,
}

impl ChargeSamples {
    pub fn from_charges(charges: Vec<f64>) -> Self {
        let pulse_indices = (0..charges.len() as u64).collect();
        ChargeSamples { charges, pulse_indices }
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }
}

/// Time at which the charge of pulse `i` is deposited: the middle of the gap
/// between windows `i` and `i + 1`.
pub fn pulse_time(spec: &ReadoutSpec, i: usize) -> f64 {
    i as f64 * spec.sample_interval + 0.5 * (spec.window + spec.sample_interval)
}

/// Events that place `charges[i]` in the gap after window `i`.
pub fn pulse_events(spec: &ReadoutSpec, charges: &[f64]) -> Vec<(f64, f64)> {
    charges
        .iter()
        .enumerate()
        .map(|(i, &q)| (pulse_time(spec, i), q))
        .collect()
}

/// A constant current of `rate` electrons per second, lumped into one event
/// per inter-window gap over `windows` windows.
pub fn constant_current_events(spec: &ReadoutSpec, rate: f64, windows: usize) -> Vec<(f64, f64)> {
    let q = rate * spec.sample_interval;
    (0..windows.saturating_sub(1))
        .map(|i| (pulse_time(spec, i), q))
        .collect()
}

/// Integrates `(time, electrons)` events and reports window-averaged output
/// voltages with read noise and drift.
pub fn simulate_trace<R: Rng + ?Sized>(events: &[(f64, f64)], spec: &ReadoutSpec, rng: &mut R) -> Result<VoltageTrace> {
    spec.validate()?;
    let duration = spec
        .trace_duration
        .ok_or_else(|| Error::validation("readout.trace_duration", "is required to simulate a trace"))?;
    let mut prev = f64::NEG_INFINITY;
    for &(t, q) in events {
        if !(0.0..=duration).contains(&t) {
            return Err(Error::domain(format!(
                "event at t = {t} s lies outside the trace [0, {duration}] s"
            )));
        }
        if t < prev {
            return Err(Error::domain("events must be sorted by time"));
        }
        if !q.is_finite() {
            return Err(Error::domain("event charge must be finite"));
        }
        prev = t;
    }

    let windows = spec.window_count(duration);
    let epv = spec.electrons_per_volt();
    let noise = (spec.read_noise > 0.0).then(|| Normal::new(0.0, spec.read_noise).expect("sigma >= 0"));
    let walk_step = (spec.drift_walk > 0.0).then(|| {
        (
            Normal::new(0.0, spec.drift_walk * (0.5 * spec.window).sqrt()).expect("finite"),
            Normal::new(0.0, spec.drift_walk * spec.sample_interval.sqrt()).expect("finite"),
        )
    });

    let mut sample_times = Vec::with_capacity(windows);
    let mut voltages = Vec::with_capacity(windows);
    let mut settled = 0.0; // charge from events before the current window
    let mut next = 0usize;
    let mut walk = 0.0;
    for i in 0..windows {
        let start = i as f64 * spec.sample_interval;
        let end = start + spec.window;
        let mid = start + 0.5 * spec.window;
        while next < events.len() && events[next].0 < start {
            settled += events[next].1;
            next += 1;
        }
        // Events inside the window contribute for the fraction of it they cover.
        let mut mean_charge = settled;
        let mut j = next;
        while j < events.len() && events[j].0 < end {
            mean_charge += events[j].1 * (end - events[j].0) / spec.window;
            j += 1;
        }
        if let Some(n) = &noise {
            mean_charge += n.sample(rng);
        }
        if let Some((first, step)) = &walk_step {
            walk += if i == 0 { first.sample(rng) } else { step.sample(rng) };
        }
        sample_times.push(mid);
        voltages.push(mean_charge / epv + spec.drift_rate * mid + walk);
    }

    Ok(VoltageTrace {
        sample_times,
        voltages,
        electrons_per_volt: epv,
        window: spec.window,
        sample_interval: spec.sample_interval,
    })
}

/// `Q_i = (V_{i+1} - V_i) * C_f / e`. A linear drift adds the constant
/// `drift_rate * sample_interval * C_f / e` to every `Q_i`.
pub fn extract_pulse_charges(trace: &VoltageTrace) -> Result<ChargeSamples> {
    if trace.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "charge extraction needs at least 2 windows, trace has {}",
            trace.len()
        )));
    }
    let charges = trace
        .voltages
        .windows(2)
        .map(|w| (w[1] - w[0]) * trace.electrons_per_volt)
        .collect();
    Ok(ChargeSamples::from_charges(charges))
}

/// Noise of one correlated double sample of a continuum signal.
pub fn cds_noise(spec: &ReadoutSpec) -> f64 {
    std::f64::consts::SQRT_2 * spec.read_noise
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTrace {
    /// Volts.
    pub bias: f64,
    /// Mean gain at `bias`.
    pub gain: f64,
    pub trace: VoltageTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum DarkBoundMethod {
    /// `|slope| + 3 * stderr` of an OLS fit of charge against time.
    Slope,
    /// Largest output excursion within any `span`-second interval, per second.
    MaxVariation { span: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkSlope {
    pub bias: f64,
    pub gain: f64,
    /// Electrons per second.
    pub slope: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkCurrentBound {
    /// Electrons per second.
    pub bound: f64,
    pub bias_dependent: bool,
    pub per_bias_slopes: Vec<DarkSlope>,
    pub method: DarkBoundMethod,
}

/// Ordinary least-squares slope of `ys` against `xs` and its standard error.
/// The error is infinite with fewer than three points.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    if xs.len() < 3 {
        return (slope, f64::INFINITY);
    }
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

fn slope_of(bt: &BiasTrace) -> Result<DarkSlope> {
    let tr = &bt.trace;
    tr.validate()?;
    if tr.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "dark-current trace at {} V has {} windows, need at least 2",
            bt.bias,
            tr.len()
        )));
    }
    if tr.span() < MIN_DARK_TRACE_SPAN {
        return Err(Error::InsufficientData(format!(
            "dark-current trace at {} V spans {} s, need at least {MIN_DARK_TRACE_SPAN} s",
            bt.bias,
            tr.span()
        )));
    }
    let electrons: Vec<f64> = tr.voltages.iter().map(|&v| tr.to_electrons(v)).collect();
    let (slope, stderr) = ols_slope(&tr.sample_times, &electrons);
    Ok(DarkSlope {
        bias: bt.bias,
        gain: bt.gain,
        slope,
        stderr,
    })
}

/// True dark current from the multiplication region grows with gain; drift
/// in the electronics does not. The lowest- and highest-gain traces are
/// compared: their slopes must differ by more than three combined standard
/// errors, and the slope ratio must be closer (in log space) to the gain
/// ratio than to one.
fn gain_scaling(slopes: &[DarkSlope]) -> bool {
    let lo = slopes.iter().min_by(|a, b| a.gain.total_cmp(&b.gain));
    let hi = slopes.iter().max_by(|a, b| a.gain.total_cmp(&b.gain));
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return false;
    };
    if !(hi.gain > lo.gain) {
        return false;
    }
    let combined = (lo.stderr.powi(2) + hi.stderr.powi(2)).sqrt();
    if !((hi.slope - lo.slope).abs() > 3.0 * combined) {
        return false;
    }
    if !(lo.slope > 0.0 && hi.slope > 0.0) {
        return false;
    }
    let log_slope_ratio = (hi.slope / lo.slope).ln();
    let log_gain_ratio = (hi.gain / lo.gain).ln();
    (log_slope_ratio - log_gain_ratio).abs() < log_slope_ratio.abs()
}

/// Upper bound on the dark current from dark traces taken at one or more
/// bias voltages.
///
/// The slope error is the ordinary least-squares one, which treats window
/// values as independent around the fitted line. That holds when readout
/// noise dominates. Shot noise of a large dark current accumulates as a
/// random walk in the integrated charge, and the OLS error then understates
/// the true slope uncertainty.
pub fn estimate_dark_current_bound(traces: &[BiasTrace], method: DarkBoundMethod) -> Result<DarkCurrentBound> {
    if traces.is_empty() {
        return Err(Error::InsufficientData("no dark traces supplied".into()));
    }
    let per_bias_slopes = traces.iter().map(slope_of).collect::<Result<Vec<_>>>()?;
    let bound = match method {
        DarkBoundMethod::Slope => per_bias_slopes
            .iter()
            .map(|s| s.slope.abs() + 3.0 * s.stderr)
            .fold(f64::NEG_INFINITY, f64::max),
        DarkBoundMethod::MaxVariation { span } => {
            if !(span > 0.0) {
                return Err(Error::domain("max-variation span must be positive"));
            }
            traces
                .iter()
                .map(|bt| max_variation(&bt.trace, span))
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };
    Ok(DarkCurrentBound {
        bound,
        bias_dependent: gain_scaling(&per_bias_slopes),
        per_bias_slopes,
        method,
    })
}

/// Largest `max V - min V` (in electrons) over windows whose times fall in
/// any interval of length `span`, divided by `span`.
fn max_variation(trace: &VoltageTrace, span: f64) -> f64 {
    let t = &trace.sample_times;
    let v = &trace.voltages;
    let mut best = 0.0_f64;
    let mut end = 0;
    for start in 0..t.len() {
        end = end.max(start);
        while end + 1 < t.len() && t[end + 1] - t[start] <= span + 1e-12 {
            end += 1;
        }
        let (lo, hi) = v[start..=end]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        best = best.max(hi - lo);
    }
    trace.to_electrons(best) / span
}
