//! Avalanche multiplication of primary electrons.
//!
//! Three single-electron gain models are available:
//!
//! * `Deterministic`: every primary yields exactly `M` anode electrons (F = 1).
//! * `GammaVariance`: the real-valued gain of one primary is
//!   Gamma(shape = 1/(F-1), scale = M(F-1)), which has mean `M` and variance
//!   `M^2 (F-1)`. `F` is the configured override or, if absent, the McIntyre
//!   value for `(M, k)`.
//! * `Branching`: an `S`-stage chain in which every electron duplicates with
//!   probability `p` at each stage, `S = ceil(log2 M)` and `(1+p)^S = M`. This
//!   is a qualitative model; its excess noise is an output, not an input.
//!
//! Per-electron gains are real numbers; the anode charge of a pulse is the sum
//! of its primaries' gains rounded once to the nearest nonnegative integer.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below `1 + GAMMA_DEGENERATE_TOL` the gamma model is treated as deterministic.
pub const GAMMA_DEGENERATE_TOL: f64 = 1e-9;

pub const SILICON_IONIZATION_RATIO: f64 = 0.006;

/// Excess noise factor for electron injection:
/// `F = k M + (2 - 1/M)(1 - k)`.
pub fn mcintyre_excess_noise(mean_gain: f64, ionization_ratio: f64) -> Result<f64> {
    if !(mean_gain >= 1.0) || !mean_gain.is_finite() {
        return Err(Error::domain(format!("mean gain must be >= 1, got {mean_gain}")));
    }
    if !(0.0..=1.0).contains(&ionization_ratio) {
        return Err(Error::domain(format!(
            "ionization ratio must lie in [0, 1], got {ionization_ratio}"
        )));
    }
    let k = ionization_ratio;
    Ok(k * mean_gain + (2.0 - 1.0 / mean_gain) * (1.0 - k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModel {
    Deterministic,
    #[default]
    GammaVariance,
    Branching,
}

fn default_ionization_ratio() -> f64 {
    SILICON_IONIZATION_RATIO
}

fn default_quantum_efficiency() -> f64 {
    0.61
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApdSpec {
    pub mean_gain: f64,
    #[serde(default = "default_ionization_ratio")]
    pub ionization_ratio: f64,
    #[serde(default = "default_quantum_efficiency")]
    pub quantum_efficiency: f64,
    /// Primary dark electrons per second.
    #[serde(default)]
    pub dark_rate: f64,
    /// Dark electrons are multiplied like photoelectrons (bulk dark current).
    /// When false they reach the anode unmultiplied (surface leakage).
    #[serde(default = "default_true")]
    pub dark_multiplied: bool,
    #[serde(default)]
    pub gain_model: GainModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess_noise_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_curve: Option<GainCurve>,
}

impl ApdSpec {
    pub fn new(mean_gain: f64, gain_model: GainModel) -> Self {
        ApdSpec {
            mean_gain,
            ionization_ratio: SILICON_IONIZATION_RATIO,
            quantum_efficiency: default_quantum_efficiency(),
            dark_rate: 0.0,
            dark_multiplied: true,
            gain_model,
            excess_noise_override: None,
            gain_curve: None,
        }
    }

    pub fn with_excess_noise(mut self, f: f64) -> Self {
        self.excess_noise_override = Some(f);
        self
    }

    /// Operate the diode at `bias` on a fitted gain curve.
    pub fn at_bias(curve: GainCurve, bias: f64, gain_model: GainModel) -> Result<Self> {
        let mean_gain = curve.gain_at(bias)?;
        let mut spec = ApdSpec::new(mean_gain, gain_model);
        spec.gain_curve = Some(curve);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_gain >= 1.0) || !self.mean_gain.is_finite() {
            return Err(Error::validation("apd.mean_gain", "must be a finite number >= 1"));
        }
        if !(0.0..=1.0).contains(&self.ionization_ratio) {
            return Err(Error::validation("apd.ionization_ratio", "must lie in [0, 1]"));
        }
        if !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0) {
            return Err(Error::validation("apd.quantum_efficiency", "must lie in (0, 1]"));
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(Error::validation("apd.dark_rate", "must be a finite number >= 0"));
        }
        if let Some(f) = self.excess_noise_override {
            if !(f >= 1.0) || !f.is_finite() {
                return Err(Error::validation(
                    "apd.excess_noise_override",
                    "must be a finite number >= 1",
                ));
            }
        }
        if let Some(curve) = &self.gain_curve {
            curve
                .validate()
                .map_err(|e| Error::validation("apd.gain_curve", e.to_string()))?;
        }
        Ok(())
    }

    /// The excess noise factor the sampler is configured with. `None` for the
    /// branching model, whose F is only known empirically.
    pub fn configured_excess_noise(&self) -> Option<f64> {
        match self.gain_model {
            GainModel::Deterministic => Some(1.0),
            GainModel::GammaVariance => Some(match self.excess_noise_override {
                Some(f) => f,
                None => k_m_excess(self.mean_gain, self.ionization_ratio),
            }),
            GainModel::Branching => None,
        }
    }
}

fn k_m_excess(m: f64, k: f64) -> f64 {
    k * m + (2.0 - 1.0 / m) * (1.0 - k)
}

/// Primary and anode electron counts for one multiplication event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GainSample {
    pub primary_electrons: u64,
    pub anode_electrons: u64,
}

/// A gain sampler prepared from an [`ApdSpec`], so per-pulse sampling does
/// not repeat validation or distribution setup.
#[derive(Debug, Clone)]
pub enum GainSampler {
    Deterministic { gain: f64 },
    Gamma { gain: f64, shape: f64, scale: f64 },
    Branching { stages: u32, duplication_probability: f64 },
}

impl GainSampler {
    pub fn new(spec: &ApdSpec) -> Result<Self> {
        spec.validate()?;
        let m = spec.mean_gain;
        Ok(match spec.gain_model {
            GainModel::Deterministic => GainSampler::Deterministic { gain: m },
            GainModel::GammaVariance => {
                let f = spec.configured_excess_noise().unwrap_or(1.0);
                if f < 1.0 + GAMMA_DEGENERATE_TOL {
                    GainSampler::Deterministic { gain: m }
                } else {
                    GainSampler::Gamma {
                        gain: m,
                        shape: 1.0 / (f - 1.0),
                        scale: m * (f - 1.0),
                    }
                }
            }
            GainModel::Branching => {
                let (stages, duplication_probability) = branching_parameters(m);
                GainSampler::Branching {
                    stages,
                    duplication_probability,
                }
            }
        })
    }

    pub fn mean_gain(&self) -> f64 {
        match *self {
            GainSampler::Deterministic { gain } | GainSampler::Gamma { gain, .. } => gain,
            GainSampler::Branching {
                stages,
                duplication_probability,
            } => (1.0 + duplication_probability).powi(stages as i32),
        }
    }

    /// Real-valued total gain of `primaries` electrons, before rounding.
    pub fn total_gain<R: Rng + ?Sized>(&self, primaries: u64, rng: &mut R) -> f64 {
        if primaries == 0 {
            return 0.0;
        }
        match *self {
            GainSampler::Deterministic { gain } => gain * primaries as f64,
            // A sum of l iid Gamma(a, s) variates is Gamma(l a, s).
            GainSampler::Gamma { shape, scale, .. } => Gamma::new(shape * primaries as f64, scale)
                .expect("gamma parameters validated at construction")
                .sample(rng),
            GainSampler::Branching {
                stages,
                duplication_probability,
            } => branch(primaries, stages, duplication_probability, rng) as f64,
        }
    }

    pub fn multiply<R: Rng + ?Sized>(&self, primaries: u64, rng: &mut R) -> GainSample {
        let total = self.total_gain(primaries, rng);
        GainSample {
            primary_electrons: primaries,
            anode_electrons: round_nonnegative(total),
        }
    }
}

fn round_nonnegative(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else {
        x.round() as u64
    }
}

/// Stage count and per-stage duplication probability for a branching chain
/// of mean gain `m`.
pub fn branching_parameters(m: f64) -> (u32, f64) {
    if m <= 1.0 {
        return (0, 0.0);
    }
    let stages = m.log2().ceil().max(1.0) as u32;
    // Solve (1 + p)^S = m for p in [0, 1]; the left side is increasing in p.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (1.0 + mid).powi(stages as i32) < m {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    // hi always satisfies (1 + hi)^S >= m, so forced duplication stays exact.
    (stages, hi)
}

fn branch<R: Rng + ?Sized>(primaries: u64, stages: u32, p: f64, rng: &mut R) -> u64 {
    let mut n = primaries;
    if p >= 1.0 {
        return n << stages;
    }
    for _ in 0..stages {
        if p > 0.0 && n > 0 {
            n += Binomial::new(n, p).expect("p in [0, 1)").sample(rng);
        }
    }
    n
}

/// Excess noise factor of the branching chain, computed from Galton-Watson
/// moments with offspring 1 + Bernoulli(p).
pub fn branching_excess_noise(stages: u32, p: f64) -> f64 {
    if stages == 0 {
        return 1.0;
    }
    let mean = 1.0 + p;
    let var = p * (1.0 - p);
    let total_mean = mean.powi(stages as i32);
    let total_var = if p == 0.0 {
        0.0
    } else {
        var * mean.powi(stages as i32 - 1) * (total_mean - 1.0) / (mean - 1.0)
    };
    1.0 + total_var / (total_mean * total_mean)
}

/// One primary electron's anode charge, rounded to an integer.
pub fn sample_single_electron_gain<R: Rng + ?Sized>(spec: &ApdSpec, rng: &mut R) -> Result<u64> {
    let sampler = GainSampler::new(spec)?;
    Ok(round_nonnegative(sampler.total_gain(1, rng)))
}

pub fn multiply_primaries<R: Rng + ?Sized>(primaries: u64, spec: &ApdSpec, rng: &mut R) -> Result<GainSample> {
    Ok(GainSampler::new(spec)?.multiply(primaries, rng))
}

/// Empirical mean-gain curve of the form `M(V) = 1 / (1 - (V / V_br)^m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainCurve {
    pub breakdown_voltage: f64,
    pub exponent: f64,
    #[serde(default)]
    pub calibration_points: Vec<(f64, f64)>,
}

impl GainCurve {
    pub fn new(breakdown_voltage: f64, exponent: f64) -> Result<Self> {
        let curve = GainCurve {
            breakdown_voltage,
            exponent,
            calibration_points: Vec::new(),
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.breakdown_voltage > 0.0) || !self.breakdown_voltage.is_finite() {
            return Err(Error::domain("breakdown voltage must be positive"));
        }
        if !(self.exponent > 0.0) || !self.exponent.is_finite() {
            return Err(Error::domain("gain-curve exponent must be positive"));
        }
        if let Some(&(bias, _)) = self
            .calibration_points
            .iter()
            .find(|(bias, _)| *bias >= self.breakdown_voltage)
        {
            return Err(Error::domain(format!(
                "calibration bias {bias} V is not below breakdown {} V",
                self.breakdown_voltage
            )));
        }
        Ok(())
    }

    pub fn gain_at(&self, bias: f64) -> Result<f64> {
        if !(bias >= 0.0) {
            return Err(Error::domain(format!("bias must be >= 0 V, got {bias}")));
        }
        if bias >= self.breakdown_voltage {
            return Err(Error::domain(format!(
                "bias {bias} V is at or beyond breakdown {} V",
                self.breakdown_voltage
            )));
        }
        let u = (bias / self.breakdown_voltage).powf(self.exponent);
        Ok(1.0 / (1.0 - u))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurveFit {
    pub curve: GainCurve,
    /// `ln M_measured - ln M_fitted` per calibration point, in input order.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Least-squares fit of the gain curve on `ln M`.
///
/// A linearized estimate (`ln(1 - 1/M)` is linear in `ln V`) seeds a
/// Levenberg-Marquardt refinement in `(ln V_br, ln m)`.
pub fn fit_gain_curve(points: &[(f64, f64)]) -> Result<GainCurveFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("gain-curve fit needs at least 2 points".into()));
    }
    for &(bias, gain) in points {
        if !(bias > 0.0) || !bias.is_finite() {
            return Err(Error::domain(format!("calibration bias must be positive, got {bias}")));
        }
        if !(gain >= 1.0) || !gain.is_finite() {
            return Err(Error::domain(format!("calibration gain must be >= 1, got {gain}")));
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::domain("calibration biases must be distinct"));
    }
    let mut warnings = Vec::new();
    if sorted.windows(2).any(|w| w[1].1 <= w[0].1) {
        warnings.push("calibration gains are not strictly increasing with bias".to_string());
    }

    // Linearized seed from points with gain > 1.
    let lin: Vec<(f64, f64)> = sorted
        .iter()
        .filter(|(_, g)| *g > 1.0)
        .map(|&(v, g)| (v.ln(), (1.0 - 1.0 / g).ln()))
        .collect();
    if lin.len() < 2 {
        return Err(Error::InsufficientData(
            "gain-curve fit needs at least 2 points with gain > 1".into(),
        ));
    }
    let (slope, intercept) = ols(&lin);
    if !(slope > 0.0) {
        return Err(Error::domain("gain does not increase with bias; cannot fit"));
    }
    let max_bias = sorted.last().map(|p| p.0).unwrap_or(0.0);
    let mut vbr = (-intercept / slope).exp();
    if vbr <= max_bias {
        vbr = max_bias * (1.0 + 1e-6);
    }

    let (ln_vbr, ln_m) = levenberg_marquardt(points, vbr.ln(), slope.ln(), max_bias);
    let curve = GainCurve {
        breakdown_voltage: ln_vbr.exp(),
        exponent: ln_m.exp(),
        calibration_points: points.to_vec(),
    };
    let residuals = points
        .iter()
        .map(|&(v, g)| g.ln() - curve.gain_at(v).map(f64::ln).unwrap_or(f64::INFINITY))
        .collect();
    Ok(GainCurveFit {
        curve,
        residuals,
        warnings,
    })
}

fn ols(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Residuals and Jacobian of `ln M_i - ln M(V_i; a = ln V_br, b = ln m)`.
/// Returns `None` if any bias is at or beyond breakdown.
fn residuals_and_jacobian(points: &[(f64, f64)], a: f64, b: f64) -> Option<(Vec<f64>, Vec<[f64; 2]>)> {
    let m = b.exp();
    let mut r = Vec::with_capacity(points.len());
    let mut jac = Vec::with_capacity(points.len());
    for &(v, g) in points {
        let t = v.ln() - a;
        let u = (m * t).exp();
        if !(u < 1.0) {
            return None;
        }
        r.push(g.ln() + (1.0 - u).ln());
        let w = m * u / (1.0 - u);
        jac.push([w, -w * t]);
    }
    Some((r, jac))
}

fn levenberg_marquardt(points: &[(f64, f64)], a0: f64, b0: f64, max_bias: f64) -> (f64, f64) {
    let sse = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let (mut a, mut b) = (a0, b0);
    let Some((mut r, mut jac)) = residuals_and_jacobian(points, a, b) else {
        return (a, b);
    };
    let mut cost = sse(&r);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let (mut h00, mut h01, mut h11, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (ri, ji) in r.iter().zip(&jac) {
            h00 += ji[0] * ji[0];
            h01 += ji[0] * ji[1];
            h11 += ji[1] * ji[1];
            g0 += ji[0] * ri;
            g1 += ji[1] * ri;
        }
        if g0.abs().max(g1.abs()) < 1e-15 {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let d00 = h00 * (1.0 + lambda);
            let d11 = h11 * (1.0 + lambda);
            let det = d00 * d11 - h01 * h01;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let da = -(d11 * g0 - h01 * g1) / det;
            let db = -(d00 * g1 - h01 * g0) / det;
            let (na, nb) = (a + da, b + db);
            if na.exp() > max_bias {
                if let Some((nr, nj)) = residuals_and_jacobian(points, na, nb) {
                    let ncost = sse(&nr);
                    if ncost < cost {
                        let step = da.abs().max(db.abs());
                        a = na;
                        b = nb;
                        r = nr;
                        jac = nj;
                        cost = ncost;
                        lambda = (lambda * 0.3).max(1e-12);
                        improved = step > 1e-14;
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}
