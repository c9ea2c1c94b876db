use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::ChargeSamples;

/// Electrons. Peaks 10.8 e apart under 7 e of noise are barely resolved at
/// this width; goodness of fit is judged on raw samples, not bins.
pub const DEFAULT_BIN_WIDTH: f64 = 5.0;

/// Uniform-width histogram of anode electron numbers. Bin `i` is
/// `[bin_edges[i], bin_edges[i + 1])`; zero is always an edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectronHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub bin_width: f64,
}

impl ElectronHistogram {
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.bin_edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &c)| (e[0], e[1], c))
    }

    /// Fraction of the total in bins lying entirely within `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let inside: u64 = self
            .bins()
            .filter(|&(l, r, _)| l >= lo && r <= hi)
            .map(|(_, _, c)| c)
            .sum();
        inside as f64 / self.total as f64
    }
}

pub fn build_histogram(samples: &ChargeSamples, bin_width: f64) -> Result<ElectronHistogram> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::domain(format!("bin width must be positive, got {bin_width}")));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("cannot histogram an empty sample".into()));
    }
    if let Some(bad) = samples.charges.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain(format!("non-finite charge {bad}")));
    }
    let (min, max) = samples
        .charges
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    // Edge indices: the first edge is at or below min - width, the last
    // strictly above max + width.
    let first = (min / bin_width).floor() as i64 - 1;
    let last = (max / bin_width).floor() as i64 + 2;
    let bin_edges: Vec<f64> = (first..=last).map(|k| k as f64 * bin_width).collect();
    let mut counts = vec![0u64; bin_edges.len() - 1];
    for &x in &samples.charges {
        let idx = ((x / bin_width).floor() as i64 - first) as usize;
        counts[idx] += 1;
    }
    Ok(ElectronHistogram {
        bin_edges,
        counts,
        total: samples.len() as u64,
        bin_width,
    })
}
