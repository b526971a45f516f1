//! Noise squeezing, Ramsey contrast and the Wineland parameter.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::shots::{ShotCounts, ShotSet};
use crate::dtwa::SpinConfiguration;
use crate::lattice::CloudLabel;
use crate::math::{cos, norm, sin, sqrt};
use crate::stats::{bootstrap_indices, mean, median_band, percentile_sorted, variance, weighted_least_squares};
use crate::{Error, Result};

pub const XI2_RESAMPLES: usize = 1000;
pub const CONTRAST_RESAMPLES: usize = 500;
/// Lower bound on a phase group's standard error, so noiseless groups (for
/// instance projection eigenstates) cannot make the fit singular.
const SEM_FLOOR: f64 = 1e-3;

/// A point value with a 16–84 percentile band and the bootstrap draws
/// behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub draws: Vec<f64>,
}

impl Estimate {
    pub fn from_draws(value: f64, mut draws: Vec<f64>) -> Self {
        draws.retain(|d| d.is_finite());
        if draws.is_empty() {
            return Self {
                value,
                lo: value,
                hi: value,
                draws,
            };
        }
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Self {
            value,
            lo: percentile_sorted(&sorted, 16.0),
            hi: percentile_sorted(&sorted, 84.0),
            draws,
        }
    }

    /// Half the 16–84 spread.
    pub fn sigma(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// `ξ²`, optionally with contrast `C` and `ξ²_R = ξ² / C²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezingEstimate {
    pub xi2: Estimate,
    pub contrast: Option<Estimate>,
    pub xi2_r: Option<Estimate>,
}

impl SqueezingEstimate {
    pub fn noise_only(xi2: Estimate) -> Self {
        Self {
            xi2,
            contrast: None,
            xi2_r: None,
        }
    }

    /// Adds the contrast and forms `ξ²_R`; the band pairs the `k`-th draws.
    pub fn with_contrast(mut self, contrast: Estimate) -> Result<Self> {
        if !(contrast.value > 0.0) {
            return Err(Error::Domain("zero contrast: Wineland parameter undefined".into()));
        }
        let value = self.xi2.value / (contrast.value * contrast.value);
        let draws = self
            .xi2
            .draws
            .iter()
            .zip(&contrast.draws)
            .filter(|(_, c)| **c > 0.0)
            .map(|(x, c)| x / (c * c))
            .collect();
        self.xi2_r = Some(Estimate::from_draws(value, draws));
        self.contrast = Some(contrast);
        Ok(self)
    }

    /// `10 log10 ξ²_R`.
    pub fn xi2_r_db(&self) -> Option<f64> {
        self.xi2_r.as_ref().map(|e| 10.0 * libm::log10(e.value))
    }
}

/// `(Var[M], mean(M/N), mean(N))` over shots `idx`.
fn moments(counts: &[ShotCounts], idx: &[usize]) -> (f64, f64, f64) {
    let m: Vec<f64> = idx.iter().map(|&i| counts[i].magnetization).collect();
    let r: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let c = counts[i];
            if c.atoms > 0.0 {
                c.magnetization / c.atoms
            } else {
                0.0
            }
        })
        .collect();
    let n: Vec<f64> = idx.iter().map(|&i| counts[i].atoms).collect();
    (variance(&m), mean(&r), mean(&n))
}

/// `σ²_SQL = 4 p (1 - p) <N>` with `p = (1 + <M/N>)/2`, i.e. `(1 - <M/N>²) <N>`.
fn sql(mean_ratio: f64, mean_atoms: f64) -> f64 {
    (1.0 - mean_ratio * mean_ratio) * mean_atoms
}

fn xi2_point(counts: &[ShotCounts], idx: &[usize]) -> Result<f64> {
    let (var, ratio, atoms) = moments(counts, idx);
    let s = sql(ratio, atoms);
    if !(s > 0.0) {
        return Err(Error::DegenerateSql(format!("<p> = {}, <N> = {atoms}", 0.5 * (1.0 + ratio))));
    }
    Ok(var / s)
}

fn require_shots(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "shots",
            needed: 2,
            got: n,
        });
    }
    Ok(())
}

/// Single-cloud noise squeezing over all unmasked sites.
pub fn xi2<R: Rng + ?Sized>(shots: &ShotSet, resamples: usize, rng: &mut R) -> Result<SqueezingEstimate> {
    require_shots(shots.len())?;
    let counts = shots.all_counts(None);
    let all: Vec<usize> = (0..counts.len()).collect();
    let value = xi2_point(&counts, &all)?;
    let mut idx = Vec::with_capacity(counts.len());
    let draws = (0..resamples)
        .map(|_| {
            bootstrap_indices(counts.len(), rng, &mut idx);
            xi2_point(&counts, &idx).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(SqueezingEstimate::noise_only(Estimate::from_draws(value, draws)))
}

fn differential_point(a: &[ShotCounts], b: &[ShotCounts], idx: &[usize]) -> Result<f64> {
    let diff: Vec<f64> = idx.iter().map(|&i| a[i].magnetization - b[i].magnetization).collect();
    let (_, ra, na) = moments(a, idx);
    let (_, rb, nb) = moments(b, idx);
    let (sa, sb) = (sql(ra, na), sql(rb, nb));
    if !(sa > 0.0 && sb > 0.0) {
        return Err(Error::DegenerateSql(format!(
            "cloud SQLs {sa} and {sb}; an empty or fully polarized cloud needs the single-cloud estimator"
        )));
    }
    Ok(variance(&diff) / (sa + sb))
}

/// `Var[M_A - M_B] / (σ²_SQL,A + σ²_SQL,B)`.
pub fn xi2_differential<R: Rng + ?Sized>(shots: &ShotSet, resamples: usize, rng: &mut R) -> Result<SqueezingEstimate> {
    require_shots(shots.len())?;
    for label in [CloudLabel::A, CloudLabel::B] {
        if !shots.has_label(label) {
            return Err(Error::MissingLabel(label.as_char()));
        }
    }
    let a = shots.all_counts(Some(CloudLabel::A));
    let b = shots.all_counts(Some(CloudLabel::B));
    let all: Vec<usize> = (0..a.len()).collect();
    let value = differential_point(&a, &b, &all)?;
    let mut idx = Vec::with_capacity(a.len());
    let draws = (0..resamples)
        .map(|_| {
            bootstrap_indices(a.len(), rng, &mut idx);
            differential_point(&a, &b, &idx).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(SqueezingEstimate::noise_only(Estimate::from_draws(value, draws)))
}

/// Trajectory mean of `|S| / (N/2)`, clipped to [0, 1].
pub fn contrast_direct<'a, I>(configs: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a SpinConfiguration>,
{
    let mut total = 0.0;
    let mut count = 0usize;
    for c in configs {
        if c.is_empty() {
            continue;
        }
        total += norm(c.total()) / (0.5 * c.len() as f64);
        count += 1;
    }
    if count == 0 {
        return Err(Error::InsufficientData {
            what: "trajectories",
            needed: 1,
            got: 0,
        });
    }
    Ok((total / count as f64).clamp(0.0, 1.0))
}

/// Per-shot `S_z / S` values measured at one readout phase.
#[derive(Debug, Clone, PartialEq)]
pub struct RamseyGroup {
    pub phase: f64,
    pub ratios: Vec<f64>,
}

fn group_point(ratios: &[f64], idx: Option<&[usize]>) -> (f64, f64) {
    let vals: Vec<f64> = match idx {
        Some(idx) => idx.iter().map(|&i| ratios[i]).collect(),
        None => ratios.to_vec(),
    };
    let m = mean(&vals);
    let sem = if vals.len() > 1 { sqrt(variance(&vals) / vals.len() as f64) } else { 0.0 };
    (m, sem.max(SEM_FLOOR))
}

/// Amplitude of `y = a sin φ + b cos φ + c`.
fn ramsey_amplitude(phases: &[f64], y: &[f64], sigma: &[f64]) -> Result<f64> {
    let design: Vec<Vec<f64>> = phases.iter().map(|&p| vec![sin(p), cos(p), 1.0]).collect();
    let fit = weighted_least_squares(&design, y, sigma)?;
    Ok(sqrt(fit.params[0] * fit.params[0] + fit.params[1] * fit.params[1]))
}

/// Weighted sinusoid fit of the mean ratio per phase, bootstrapped over
/// shots within each phase; reports the median clipped amplitude.
pub fn contrast_ramsey_fit<R: Rng + ?Sized>(groups: &[RamseyGroup], resamples: usize, rng: &mut R) -> Result<Estimate> {
    let mut distinct: Vec<f64> = groups.iter().map(|g| g.phase).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 4 {
        return Err(Error::InsufficientData {
            what: "readout phases",
            needed: 4,
            got: distinct.len(),
        });
    }
    if groups.iter().any(|g| g.ratios.is_empty()) {
        return Err(Error::InsufficientData {
            what: "shots at a readout phase",
            needed: 1,
            got: 0,
        });
    }
    let phases: Vec<f64> = groups.iter().map(|g| g.phase).collect();
    let fit_with = |points: Vec<(f64, f64)>| -> Result<f64> {
        let (y, s): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        ramsey_amplitude(&phases, &y, &s).map(|a| a.clamp(0.0, 1.0))
    };
    let full = fit_with(groups.iter().map(|g| group_point(&g.ratios, None)).collect())?;
    let mut draws = Vec::with_capacity(resamples);
    let mut idx = Vec::new();
    for _ in 0..resamples {
        let points = groups
            .iter()
            .map(|g| {
                bootstrap_indices(g.ratios.len(), rng, &mut idx);
                group_point(&g.ratios, Some(&idx))
            })
            .collect();
        draws.push(fit_with(points)?);
    }
    if draws.is_empty() {
        return Ok(Estimate::from_draws(full, draws));
    }
    let (median, lo, hi) = median_band(&draws);
    Ok(Estimate {
        value: median,
        lo,
        hi,
        draws,
    })
}
