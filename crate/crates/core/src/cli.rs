//! Command implementations behind the `apdsim` binary.
//!
//! Exit codes: 0 success, 1 invalid configuration, flags, or input data,
//! 2 I/O failure.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::avalanche::{mcintyre_excess_noise, ApdSpec};
use crate::error::Error;
use crate::io::{read_charges_csv, write_charges_csv, write_histogram_csv, write_json, write_trace_csv};
use crate::readout::ReadoutSpec;
use crate::scenario::{run_scenario_binned, RunSummary, Scenario, SourceMode, SourceSpec};
use crate::seed::derive_trial_seed;
use crate::statistics::{
    estimate_excess_noise, ks_distance, noise_budget, ExcessNoiseEstimate, KsResult, LimitMode, ModelParams,
    NoiseBudget, DEFAULT_BIN_WIDTH,
};

pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

/// Seed fallback when neither `--seed` nor `scenario.seed` is given.
pub const SEED_ENV: &str = "APDSIM_SEED";

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
            _ => EXIT_INVALID,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Trace,
    Charges,
    Histogram,
    Summary,
}

fn default_emit() -> BTreeSet<Emit> {
    [Emit::Charges, Emit::Histogram, Emit::Summary].into_iter().collect()
}

fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}

/// A [`Scenario`] whose seed may be supplied later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub source: SourceSpec,
    pub apd: ApdSpec,
    #[serde(default)]
    pub readout: ReadoutSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario {
            source: self.source.clone(),
            apd: self.apd.clone(),
            readout: self.readout.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default = "default_emit")]
    pub emit: BTreeSet<Emit>,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
}

/// Parses a JSON run configuration. Errors name the dotted key path, e.g.
/// `scenario.apd.mean_gain`.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.inner().to_string();
        let prefix = if path == "." { String::new() } else { format!("{path}.") };
        let message = match inner.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            Some(name) => format!("invalid config: missing required key `{prefix}{name}`"),
            None => format!("invalid config at `{path}`: {inner}"),
        };
        CliError::invalid(message)
    })
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

/// `--seed`, then `scenario.seed`, then the `APDSIM_SEED` value.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>, env: Option<&str>) -> CliResult<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(format!("{SEED_ENV}=`{v}` is not an unsigned 64-bit integer"))),
        None => Err(CliError::invalid(format!(
            "no seed: pass --seed, set `scenario.seed`, or set {SEED_ENV}"
        ))),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn validated(cfg: &ScenarioConfig, seed: u64) -> CliResult<Scenario> {
    let s = cfg.with_seed(seed);
    s.validate()
        .map_err(|e| CliError::invalid(format!("invalid config: {e}")))?;
    Ok(s)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> crate::error::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).map_err(|e| match e {
        Error::Io(io) => CliError::io(path, io),
        other => CliError::from(other),
    })?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Files written by `simulate`, in emission order.
#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

pub fn cmd_simulate(config: &Path, seed: Option<u64>, out: Option<&Path>) -> CliResult<SimulateOutput> {
    let cfg = load_config(config)?;
    let seed = resolve_seed(seed, cfg.scenario.seed, env_seed().as_deref())?;
    let scenario = validated(&cfg.scenario, seed)?;
    if !(cfg.bin_width > 0.0) {
        return Err(CliError::invalid("invalid config: `bin_width` must be positive"));
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.outputs.clone())
        .ok_or_else(|| CliError::invalid("no output directory: pass --out or set `outputs`"))?;
    let result = run_scenario_binned(&scenario, cfg.bin_width)?;

    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut files = Vec::new();
    for emit in &cfg.emit {
        let path = dir.join(match emit {
            Emit::Trace => "trace.csv",
            Emit::Charges => "charges.csv",
            Emit::Histogram => "histogram.csv",
            Emit::Summary => "summary.json",
        });
        match emit {
            Emit::Trace => write_with(&path, |w| write_trace_csv(w, &result.trace))?,
            Emit::Charges => write_with(&path, |w| write_charges_csv(w, &result.charges))?,
            Emit::Histogram => write_with(&path, |w| write_histogram_csv(w, &result.histogram))?,
            Emit::Summary => write_with(&path, |w| write_json(w, &result.summary))?,
        }
        files.push(path);
    }
    Ok(SimulateOutput {
        summary: result.summary,
        files,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LimitsArgs {
    pub sigma: f64,
    pub gain: f64,
    pub qe: f64,
    pub mode: LimitMode,
    pub dark_e: f64,
    pub f_apd: f64,
    pub n: f64,
}

pub fn cmd_limits<W: Write>(args: &LimitsArgs, out: W) -> CliResult<NoiseBudget> {
    let budget = noise_budget(
        args.sigma,
        args.f_apd,
        args.n,
        args.gain,
        args.qe,
        args.dark_e,
        args.mode,
    )?;
    write_json(out, &budget)?;
    Ok(budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub samples: usize,
    pub excess_noise: ExcessNoiseEstimate,
    pub ks: KsResult,
    pub model: ModelParams,
}

pub fn cmd_analyze<W: Write>(charges: &Path, n: f64, gain: f64, sigma: f64, out: W) -> CliResult<AnalyzeReport> {
    let file = File::open(charges).map_err(|e| CliError::io(charges, e))?;
    let samples = read_charges_csv(BufReader::new(file)).map_err(|e| match e {
        Error::Io(io) => CliError::io(charges, io),
        other => CliError::invalid(format!("{}: {other}", charges.display())),
    })?;
    let model = ModelParams::new(n, gain, sigma);
    let report = AnalyzeReport {
        samples: samples.len(),
        excess_noise: estimate_excess_noise(&samples, n, gain, sigma)?,
        ks: ks_distance(&samples, &model)?,
        model,
    };
    write_json(out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gain,
    N,
    Sigma,
    K,
}

impl SweepParam {
    pub const NAMES: [&'static str; 4] = ["gain", "n", "sigma", "k"];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gain => "gain",
            SweepParam::N => "n",
            SweepParam::Sigma => "sigma",
            SweepParam::K => "k",
        }
    }

    /// Sets this parameter on a scenario. `n` is the mean photoelectron
    /// number; `sigma` is the per-window read noise.
    pub fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> CliResult<()> {
        match self {
            SweepParam::Gain => cfg.apd.mean_gain = value,
            SweepParam::K => cfg.apd.ionization_ratio = value,
            SweepParam::Sigma => cfg.readout.read_noise = value,
            SweepParam::N => {
                let photons = value / cfg.apd.quantum_efficiency;
                match cfg.source.mode {
                    SourceMode::Pulsed => cfg.source.mean_photons_per_pulse = photons,
                    SourceMode::Continuum => cfg.source.continuum_rate = Some(photons / cfg.source.pulse_interval),
                    SourceMode::Dark => return Err(CliError::invalid("cannot sweep `n` on a dark source")),
                }
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "gain" => Ok(SweepParam::Gain),
            "n" => Ok(SweepParam::N),
            "sigma" => Ok(SweepParam::Sigma),
            "k" => Ok(SweepParam::K),
            other => Err(CliError::invalid(format!(
                "unknown sweep parameter `{other}`; valid parameters: {}",
                SweepParam::NAMES.join(", ")
            ))),
        }
    }
}

/// Parses `start:stop:count` into an evenly spaced grid that ends exactly
/// at `stop`.
pub fn parse_range(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::invalid(format!("invalid range `{spec}`; expected start:stop:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(bad());
    };
    let start: f64 = start.trim().parse().map_err(|_| bad())?;
    let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    Ok((0..count)
        .map(|i| match i {
            0 => start,
            _ if i == count - 1 => stop,
            _ => start + (stop - start) * i as f64 / (count - 1) as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub f_mcintyre: f64,
    pub f_apd: Option<f64>,
    pub f_apd_stderr: Option<f64>,
    pub limit_photons: f64,
}

/// Runs the configured scenario at every grid point. Grid point `i` uses
/// seed `derive_trial_seed(seed, i)`; rows come back in grid order.
pub fn run_sweep(cfg: &ScenarioConfig, param: SweepParam, grid: &[f64], seed: u64) -> CliResult<Vec<SweepRow>> {
    let scenarios = grid
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = cfg.clone();
            param.apply(&mut c, v)?;
            let s = validated(&c, derive_trial_seed(seed, i as u64))
                .map_err(|e| CliError::invalid(format!("{}={v}: {}", param.name(), e.message)))?;
            Ok((v, s))
        })
        .collect::<CliResult<Vec<_>>>()?;
    scenarios
        .par_iter()
        .map(|(v, s)| {
            let r = run_scenario_binned(s, DEFAULT_BIN_WIDTH)?;
            Ok(SweepRow {
                value: *v,
                f_mcintyre: mcintyre_excess_noise(s.apd.mean_gain, s.apd.ionization_ratio)?,
                f_apd: r.summary.excess_noise.map(|e| e.f_apd),
                f_apd_stderr: r.summary.excess_noise.map(|e| e.stderr_f),
                limit_photons: r.summary.limit_pulse_photons,
            })
        })
        .collect::<crate::error::Result<Vec<_>>>()
        .map_err(CliError::from)
}

pub fn write_sweep_csv<W: Write>(out: W, param: SweepParam, rows: &[SweepRow]) -> crate::error::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([param.name(), "f_mcintyre", "f_apd", "f_apd_stderr", "limit_photons"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.f_mcintyre.to_string(),
            opt(r.f_apd),
            opt(r.f_apd_stderr),
            r.limit_photons.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep<W: Write>(
    param: &str,
    range: &str,
    config: &Path,
    seed: Option<u64>,
    out: W,
) -> CliResult<Vec<SweepRow>> {
    let param: SweepParam = param.parse()?;
    let grid = parse_range(range)?;
    let cfg = load_config(config)?;
    let seed = resolve_seed(seed, cfg.scenario.seed, env_seed().as_deref())?;
    let rows = run_sweep(&cfg.scenario, param, &grid, seed)?;
    write_sweep_csv(out, param, &rows)?;
    Ok(rows)
}
