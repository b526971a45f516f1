//! Shot records (single images of the lattice) and shot-level filtering.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::dtwa::SpinConfiguration;
use crate::lattice::{CloudLabel, LatticeGeometry};
use crate::stats::percentile;
use crate::{Error, Result};

/// Outcome at one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reading {
    Empty,
    Up,
    Down,
    /// Occupied, with the continuous `σ^z = 2 s^z` of a DTWA trajectory.
    Projected(f64),
}

impl Reading {
    pub fn is_occupied(self) -> bool {
        !matches!(self, Reading::Empty)
    }

    /// `σ^z ∈ [-1, 1]`, or `None` for an empty site.
    pub fn sigma(self) -> Option<f64> {
        match self {
            Reading::Empty => None,
            Reading::Up => Some(1.0),
            Reading::Down => Some(-1.0),
            Reading::Projected(v) => Some(v),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Reading::Up => Reading::Down,
            Reading::Down => Reading::Up,
            Reading::Projected(v) => Reading::Projected(-v),
            Reading::Empty => Reading::Empty,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub readings: Vec<Reading>,
}

/// Per-shot totals over unmasked sites: `N` atoms and `M = N↑ - N↓`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShotCounts {
    pub atoms: f64,
    pub magnetization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShotMeta {
    pub tau_s: Option<f64>,
    pub theta: Option<f64>,
    pub phase: Option<f64>,
    pub seed: Option<u64>,
}

/// Shots sharing one geometry, cloud labelling and site mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    pub geometry: LatticeGeometry,
    pub labels: Vec<Option<CloudLabel>>,
    /// `false` for sites excluded from every statistic.
    pub mask: Vec<bool>,
    pub shots: Vec<ShotRecord>,
    pub meta: ShotMeta,
}

impl ShotSet {
    pub fn new(geometry: LatticeGeometry, labels: Vec<Option<CloudLabel>>, shots: Vec<ShotRecord>, meta: ShotMeta) -> Result<Self> {
        let n = geometry.num_sites();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if let Some(bad) = shots.iter().find(|s| s.readings.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.readings.len(),
            });
        }
        Ok(Self {
            geometry,
            labels,
            mask: vec![true; n],
            shots,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    /// Totals over unmasked sites, optionally restricted to one cloud.
    pub fn counts(&self, shot: &ShotRecord, label: Option<CloudLabel>) -> ShotCounts {
        let mut c = ShotCounts::default();
        for (site, r) in shot.readings.iter().enumerate() {
            if !self.mask[site] || label.is_some_and(|l| self.labels[site] != Some(l)) {
                continue;
            }
            if let Some(s) = r.sigma() {
                c.atoms += 1.0;
                c.magnetization += s;
            }
        }
        c
    }

    pub fn all_counts(&self, label: Option<CloudLabel>) -> Vec<ShotCounts> {
        self.shots.iter().map(|s| self.counts(s, label)).collect()
    }

    pub fn has_label(&self, label: CloudLabel) -> bool {
        self.labels.iter().zip(&self.mask).any(|(l, &m)| m && *l == Some(label))
    }

    /// Every reading flipped up ↔ down.
    pub fn relabeled(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.shots {
            s.readings.iter_mut().for_each(|r| *r = r.flipped());
        }
        out
    }

    /// Per-shot `M / N` (the normalized `S_z / S`), skipping empty shots.
    pub fn ratios(&self, label: Option<CloudLabel>) -> Vec<f64> {
        self.all_counts(label)
            .into_iter()
            .filter(|c| c.atoms > 0.0)
            .map(|c| c.magnetization / c.atoms)
            .collect()
    }

    /// Mean occupation of every site over all shots.
    pub fn mean_occupation(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.geometry.num_sites()];
        for s in &self.shots {
            for (o, r) in occ.iter_mut().zip(&s.readings) {
                if r.is_occupied() {
                    *o += 1.0;
                }
            }
        }
        let m = self.shots.len().max(1) as f64;
        occ.iter_mut().for_each(|o| *o /= m);
        occ
    }
}

/// How trajectories become site readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotMode {
    /// Each atom reports its projected `σ^z = 2 s^z`.
    TrajectoryDirect,
    /// Each atom reads up with probability `1/2 + s^z` clipped to [0, 1].
    BinomialResample,
}

/// One shot per configuration.
pub fn synthetic_shots<'a, R, I>(
    configs: I,
    geometry: &LatticeGeometry,
    labels: &[Option<CloudLabel>],
    mode: ShotMode,
    meta: ShotMeta,
    rng: &mut R,
) -> Result<ShotSet>
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = &'a SpinConfiguration>,
{
    let n = geometry.num_sites();
    let mut shots = Vec::new();
    for c in configs {
        let mut readings = vec![Reading::Empty; n];
        for (s, &site) in c.spins().iter().zip(c.atom_sites()) {
            if site >= n {
                return Err(Error::DimensionMismatch { expected: n, got: site + 1 });
            }
            readings[site] = match mode {
                ShotMode::TrajectoryDirect => Reading::Projected(2.0 * s[2]),
                ShotMode::BinomialResample => {
                    let p = (0.5 + s[2]).clamp(0.0, 1.0);
                    // p = 1 must always read up, p = 0 never
                    if rng.random::<f64>() < p {
                        Reading::Up
                    } else {
                        Reading::Down
                    }
                }
            };
        }
        shots.push(ShotRecord { readings });
    }
    ShotSet::new(*geometry, labels.to_vec(), shots, meta)
}

/// Masks sites whose mean occupation is below 10% of the largest, then
/// keeps shots whose (masked) atom number lies within the 12.5–87.5
/// percentile band.
pub fn shot_filter(raw: &ShotSet) -> Result<ShotSet> {
    if raw.is_empty() {
        return Err(Error::AllShotsFiltered);
    }
    let mut out = raw.clone();
    let occ = raw.mean_occupation();
    let max = occ.iter().copied().fold(0.0, f64::max);
    for (m, &o) in out.mask.iter_mut().zip(&occ) {
        if o < 0.1 * max {
            *m = false;
        }
    }
    let atoms: Vec<f64> = out.all_counts(None).iter().map(|c| c.atoms).collect();
    let lo = percentile(&atoms, 12.5);
    let hi = percentile(&atoms, 87.5);
    let shots = core::mem::take(&mut out.shots);
    out.shots = shots
        .into_iter()
        .zip(&atoms)
        .filter(|(_, &n)| n >= lo && n <= hi)
        .map(|(s, _)| s)
        .collect();
    if out.shots.is_empty() {
        return Err(Error::AllShotsFiltered);
    }
    Ok(out)
}
