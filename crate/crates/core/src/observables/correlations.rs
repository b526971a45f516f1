//! Displacement-resolved connected correlations `⟨σ_i σ_j⟩ - ⟨σ_i⟩⟨σ_j⟩`.

use alloc::vec;
use alloc::vec::Vec;

use super::shots::ShotSet;
use crate::math::sqrt;
use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 9;

/// Symmetrized map over displacements `-h..=h` in each direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub half_width: i64,
    /// Row-major over `(dy, dx)`, `None` where no pair contributed.
    pub values: Vec<Option<f64>>,
    /// Site pairs contributing to each raw (unsymmetrized) bin.
    pub n_pairs: Vec<usize>,
}

impl CorrelationMap {
    fn width(&self) -> i64 {
        2 * self.half_width + 1
    }

    fn index(&self, dx: i64, dy: i64) -> usize {
        ((dy + self.half_width) * self.width() + dx + self.half_width) as usize
    }

    pub fn get(&self, dx: i64, dy: i64) -> Option<f64> {
        if dx.abs() > self.half_width || dy.abs() > self.half_width {
            return None;
        }
        self.values[self.index(dx, dy)]
    }

    pub fn pairs(&self, dx: i64, dy: i64) -> usize {
        self.n_pairs[self.index(dx, dy)]
    }

    /// `(dx, dy, g2, n_pairs)` in row-major order.
    pub fn rows(&self) -> Vec<(i64, i64, Option<f64>, usize)> {
        let h = self.half_width;
        let mut out = Vec::new();
        for dy in -h..=h {
            for dx in -h..=h {
                out.push((dx, dy, self.get(dx, dy), self.pairs(dx, dy)));
            }
        }
        out
    }

    /// Mean over bins at equal `|d|`, skipping missing bins and the origin.
    pub fn radial(&self) -> Vec<RadialBin> {
        let h = self.half_width;
        let mut bins: Vec<(i64, f64, usize)> = Vec::new();
        for dy in -h..=h {
            for dx in -h..=h {
                let Some(v) = self.get(dx, dy) else { continue };
                let r2 = dx * dx + dy * dy;
                match bins.iter_mut().find(|b| b.0 == r2) {
                    Some(b) => {
                        b.1 += v;
                        b.2 += 1;
                    }
                    None => bins.push((r2, v, 1)),
                }
            }
        }
        bins.sort_by_key(|b| b.0);
        bins.into_iter()
            .map(|(r2, sum, n)| RadialBin {
                r: sqrt(r2 as f64),
                g2: sum / n as f64,
                bins: n,
            })
            .collect()
    }

    /// Sum of every available bin.
    pub fn window_sum(&self) -> f64 {
        self.values.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBin {
    pub r: f64,
    pub g2: f64,
    pub bins: usize,
}

/// Averages `g²_ij` over all centres `i` (unmasked) and partners `j = i + d`
/// inside a `window × window` square, then symmetrizes over the four 90°
/// rotations and the diagonal transpose. Site means use the shots where the
/// site is occupied; pair means use the shots where both are.
pub fn g2_correlations(shots: &ShotSet, window: usize) -> Result<CorrelationMap> {
    if shots.len() < 2 {
        return Err(Error::InsufficientData {
            what: "shots",
            needed: 2,
            got: shots.len(),
        });
    }
    if window.is_multiple_of(2) || window == 0 {
        return Err(Error::InvalidParameter(alloc::format!("window {window} must be odd")));
    }
    let geom = shots.geometry;
    let sites = geom.num_sites();
    let h = (window / 2) as i64;
    let width = window as i64;
    // per-site sigma per shot (None when empty or masked)
    let sig: Vec<Vec<Option<f64>>> = shots
        .shots
        .iter()
        .map(|s| {
            s.readings
                .iter()
                .zip(&shots.mask)
                .map(|(r, &m)| if m { r.sigma() } else { None })
                .collect()
        })
        .collect();
    let site_mean: Vec<Option<f64>> = (0..sites)
        .map(|i| {
            let (sum, n) = sig.iter().filter_map(|s| s[i]).fold((0.0, 0usize), |(a, n), v| (a + v, n + 1));
            (n > 0).then(|| sum / n as f64)
        })
        .collect();
    let bins = (width * width) as usize;
    let mut sum = vec![0.0; bins];
    let mut n_pairs = vec![0usize; bins];
    for i in 0..sites {
        let Some(mi) = site_mean[i] else { continue };
        let (x, y) = geom.coords(i);
        for dy in -h..=h {
            for dx in -h..=h {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (xj, yj) = (x as i64 + dx, y as i64 + dy);
                if xj < 0 || yj < 0 || xj >= geom.nx as i64 || yj >= geom.ny as i64 {
                    continue;
                }
                let j = geom.site(xj as usize, yj as usize);
                let Some(mj) = site_mean[j] else { continue };
                let (mut acc, mut n) = (0.0, 0usize);
                for s in &sig {
                    if let (Some(a), Some(b)) = (s[i], s[j]) {
                        acc += a * b;
                        n += 1;
                    }
                }
                if n == 0 {
                    continue;
                }
                let b = ((dy + h) * width + dx + h) as usize;
                sum[b] += acc / n as f64 - mi * mj;
                n_pairs[b] += 1;
            }
        }
    }
    let raw: Vec<Option<f64>> = sum
        .iter()
        .zip(&n_pairs)
        .map(|(s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    let at = |v: &[Option<f64>], dx: i64, dy: i64| v[((dy + h) * width + dx + h) as usize];
    // rotation orbit average; values sorted so every orbit member sums identically
    let mut rotated = vec![None; bins];
    for dy in -h..=h {
        for dx in -h..=h {
            let mut orbit: Vec<f64> = [(dx, dy), (-dy, dx), (-dx, -dy), (dy, -dx)]
                .iter()
                .filter_map(|&(a, b)| at(&raw, a, b))
                .collect();
            if orbit.is_empty() {
                continue;
            }
            orbit.sort_by(|a, b| a.total_cmp(b));
            rotated[((dy + h) * width + dx + h) as usize] = Some(orbit.iter().sum::<f64>() / orbit.len() as f64);
        }
    }
    let mut values = vec![None; bins];
    for dy in -h..=h {
        for dx in -h..=h {
            let v = match (at(&rotated, dx, dy), at(&rotated, dy, dx)) {
                (Some(a), Some(b)) => Some(0.5 * (a + b)),
                (Some(a), None) | (None, Some(a)) => Some(a),
                (None, None) => None,
            };
            values[((dy + h) * width + dx + h) as usize] = v;
        }
    }
    Ok(CorrelationMap {
        half_width: h,
        values,
        n_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGeometry;
    use crate::observables::shots::{Reading, ShotMeta, ShotRecord};
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn set(g: LatticeGeometry, shots: Vec<ShotRecord>) -> ShotSet {
        ShotSet::new(g, vec![None; g.num_sites()], shots, ShotMeta::default()).unwrap()
    }

    #[test]
    fn perfectly_correlated_shots() {
        let g = LatticeGeometry::new(266e-9, 12, 12).unwrap();
        let shots = (0..40)
            .map(|k| ShotRecord {
                readings: vec![if k % 2 == 0 { Reading::Up } else { Reading::Down }; g.num_sites()],
            })
            .collect();
        let m = g2_correlations(&set(g, shots), DEFAULT_WINDOW).unwrap();
        assert_eq!(m.get(0, 0), None);
        for (dx, dy, v, _) in m.rows() {
            if (dx, dy) != (0, 0) {
                assert!((v.unwrap() - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(m.radial()[0].r, 1.0);
    }

    #[test]
    fn independent_spins_are_uncorrelated() {
        let g = LatticeGeometry::new(266e-9, 14, 14).unwrap();
        let mut rng = stream_rng(4, Stream::Shots(0));
        let shots = (0..400)
            .map(|_| ShotRecord {
                readings: (0..g.num_sites())
                    .map(|_| match rng.random_range(0..3) {
                        0 => Reading::Empty,
                        1 => Reading::Up,
                        _ => Reading::Down,
                    })
                    .collect(),
            })
            .collect();
        let m = g2_correlations(&set(g, shots), DEFAULT_WINDOW).unwrap();
        for (_, _, v, _) in m.rows() {
            if let Some(v) = v {
                assert!(v.abs() < 0.02, "{v}");
            }
        }
        // exact rotation and transpose symmetry
        for (dx, dy, v, _) in m.rows() {
            assert_eq!(v, m.get(dy, dx));
            assert_eq!(v, m.get(-dy, dx));
        }
    }

    #[test]
    fn unreachable_bins_are_missing() {
        // a 3x1 strip has no vertical separations at all; the rotation/transpose
        // step fills them from the horizontal ones, but |d| > 2 stays empty
        let g = LatticeGeometry::new(266e-9, 3, 1).unwrap();
        let shots = vec![
            ShotRecord { readings: vec![Reading::Up; 3] },
            ShotRecord { readings: vec![Reading::Down; 3] },
        ];
        let m = g2_correlations(&set(g, shots), DEFAULT_WINDOW).unwrap();
        assert!(m.get(1, 0).is_some() && m.get(0, 2).is_some());
        assert_eq!(m.get(3, 0), None);
        assert_eq!(m.get(1, 1), None);
        assert!(g2_correlations(&set(g, vec![]), 9).is_err());
    }
}
