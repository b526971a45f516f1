//! Atom motion: Metropolis hopping on the lattice and the all-to-all limit.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dtwa::{CouplingEnvironment, SpinConfiguration};
use crate::lattice::{CouplingMatrix, FillingProfile, LatticeGeometry};
use crate::math::exp;
use crate::{Error, Result};

/// Stochastic hopping parameters. `target_profile` is the (already
/// smoothed) stationary distribution `P` used in the acceptance ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingConfig {
    pub t_hop_hz: f64,
    pub dt_s: f64,
    pub target_profile: FillingProfile,
    pub smoothing_sigma: f64,
}

impl HoppingConfig {
    pub fn new(t_hop_hz: f64, dt_s: f64, target_profile: FillingProfile, smoothing_sigma: f64) -> Result<Self> {
        let cfg = Self {
            t_hop_hz,
            dt_s,
            target_profile,
            smoothing_sigma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Smooths `mean_filling` with a Gaussian of `smoothing_sigma` sites to get `P`.
    pub fn from_mean_filling(geom: &LatticeGeometry, t_hop_hz: f64, dt_s: f64, mean_filling: &[f64], smoothing_sigma: f64) -> Result<Self> {
        let target = smooth_profile(geom, mean_filling, smoothing_sigma)?;
        Self::new(t_hop_hz, dt_s, target, smoothing_sigma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_hop_hz >= 0.0 && self.t_hop_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_hop = {} Hz must be non-negative", self.t_hop_hz)));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} s must be positive", self.dt_s)));
        }
        if !(self.smoothing_sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("smoothing sigma {} must be non-negative", self.smoothing_sigma)));
        }
        let p = 8.0 * self.t_hop_hz * self.dt_s;
        if p > 1.0 {
            return Err(Error::HopProbability(p));
        }
        Ok(())
    }

    /// Proposal probability per empty neighbour per step.
    fn per_neighbour(&self) -> f64 {
        4.0 * self.t_hop_hz * self.dt_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionMode {
    Static,
    Stochastic(HoppingConfig),
    /// Couplings replaced by their cloud average; positions frozen.
    OatLimit,
}

/// Hard-core site occupancy: which atom (if any) sits on each site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occupancy {
    site_atom: Vec<Option<u32>>,
}

impl Occupancy {
    pub fn new(geom: &LatticeGeometry, atom_sites: &[usize]) -> Result<Self> {
        let mut site_atom = vec![None; geom.num_sites()];
        for (a, &s) in atom_sites.iter().enumerate() {
            match site_atom.get_mut(s) {
                None => return Err(Error::InvalidParameter(format!("atom {a} on site {s} outside the lattice"))),
                Some(Some(_)) => return Err(Error::InvalidParameter(format!("site {s} doubly occupied"))),
                Some(slot) => *slot = Some(a as u32),
            }
        }
        Ok(Self { site_atom })
    }

    pub fn atom_at(&self, site: usize) -> Option<usize> {
        self.site_atom[site].map(|a| a as usize)
    }

    pub fn is_empty_site(&self, site: usize) -> bool {
        self.site_atom[site].is_none()
    }

    pub fn num_atoms(&self) -> usize {
        self.site_atom.iter().filter(|s| s.is_some()).count()
    }
}

/// Gaussian filter of width `sigma` sites, truncated at 4σ, with a
/// normalized kernel and mirror boundaries; output clipped to [0, 1].
pub fn smooth_profile(geom: &LatticeGeometry, mean_filling: &[f64], sigma: f64) -> Result<FillingProfile> {
    if mean_filling.len() != geom.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: geom.num_sites(),
            got: mean_filling.len(),
        });
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("smoothing sigma {sigma} must be non-negative")));
    }
    if mean_filling.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("mean filling must lie in [0, 1]".into()));
    }
    if sigma == 0.0 {
        return FillingProfile::new(geom, mean_filling.to_vec());
    }
    let kernel = gaussian_kernel(sigma);
    let (nx, ny) = (geom.nx, geom.ny);
    let mut pass = vec![0.0; mean_filling.len()];
    for y in 0..ny {
        for x in 0..nx {
            pass[geom.site(x, y)] = convolve_at(&kernel, x, nx, |xx| mean_filling[geom.site(xx, y)]);
        }
    }
    let mut out = vec![0.0; mean_filling.len()];
    for y in 0..ny {
        for x in 0..nx {
            out[geom.site(x, y)] = convolve_at(&kernel, y, ny, |yy| pass[geom.site(x, yy)]).clamp(0.0, 1.0);
        }
    }
    FillingProfile::new(geom, out)
}

/// Normalized 1D Gaussian taps from `-radius..=radius`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma + 0.5) as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| exp(-0.5 * (k * k) as f64 / (sigma * sigma)))
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Mirror index onto `0..n` (edge sample repeated: `-1 -> 0`).
pub(crate) fn reflect(mut i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    i = i.rem_euclid(period);
    (if i < n { i } else { period - 1 - i }) as usize
}

fn convolve_at(kernel: &[f64], center: usize, n: usize, value: impl Fn(usize) -> f64) -> f64 {
    let radius = (kernel.len() / 2) as i64;
    kernel
        .iter()
        .enumerate()
        .map(|(k, w)| w * value(reflect(center as i64 + k as i64 - radius, n)))
        .sum()
}

fn try_hop<R: Rng + ?Sized>(
    atom: usize,
    axis: usize,
    config: &mut SpinConfiguration,
    occupancy: &mut Occupancy,
    geom: &LatticeGeometry,
    hop: &HoppingConfig,
    rng: &mut R,
) -> bool {
    let site = config.atom_sites()[atom];
    let (x, y) = geom.coords(site);
    let (pos, len) = if axis == 0 { (x, geom.nx) } else { (y, geom.ny) };
    let mut empty = [0usize; 2];
    let mut m = 0;
    for forward in [false, true] {
        let next = if forward { pos + 1 } else { pos.wrapping_sub(1) };
        if next >= len {
            continue;
        }
        let s = if axis == 0 { geom.site(next, y) } else { geom.site(x, next) };
        if occupancy.is_empty_site(s) {
            empty[m] = s;
            m += 1;
        }
    }
    if m == 0 || rng.random::<f64>() >= hop.per_neighbour() * m as f64 {
        return false;
    }
    let target = empty[if m == 1 { 0 } else { rng.random_range(0..m) }];
    let p = hop.target_profile.values();
    let (pi, pj) = (p[site], p[target]);
    let accept = if pj == 0.0 {
        false
    } else if pi == 0.0 || pj >= pi {
        true
    } else {
        rng.random::<f64>() < pj / pi
    };
    if accept {
        occupancy.site_atom[site] = None;
        occupancy.site_atom[target] = Some(atom as u32);
        config.atom_sites_mut()[atom] = target;
    }
    accept
}

/// One motion step: an x-axis pass over all atoms in random order, then a
/// y-axis pass. Returns the atoms that moved (sorted, deduplicated).
pub fn hop_step<R: Rng + ?Sized>(
    config: &mut SpinConfiguration,
    occupancy: &mut Occupancy,
    geom: &LatticeGeometry,
    hop: &HoppingConfig,
    rng: &mut R,
) -> Result<Vec<usize>> {
    hop.validate()?;
    if hop.target_profile.values().len() != geom.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: geom.num_sites(),
            got: hop.target_profile.values().len(),
        });
    }
    let mut moved = Vec::new();
    if hop.t_hop_hz == 0.0 {
        return Ok(moved);
    }
    let mut order: Vec<usize> = (0..config.len()).collect();
    for axis in 0..2 {
        order.shuffle(rng);
        for &a in &order {
            if try_hop(a, axis, config, occupancy, geom, hop, rng) {
                moved.push(a);
            }
        }
    }
    moved.sort_unstable();
    moved.dedup();
    Ok(moved)
}

/// Updates the rows/columns (and fields) of `moved` atoms in place.
pub fn refresh_couplings(couplings: &mut CouplingMatrix, env: &CouplingEnvironment<'_>, atom_sites: &[usize], moved: &[usize]) {
    for &a in moved {
        for b in 0..atom_sites.len() {
            if b != a {
                couplings.set_pair(a, b, env.dipolar.pair(env.geometry, atom_sites[a], atom_sites[b]));
            }
        }
        if let Some(field) = env.site_field {
            couplings.set_atom_field(a, field[atom_sites[a]]);
        }
    }
}

/// Every off-diagonal coupling replaced by the mean off-diagonal coupling;
/// fields untouched.
pub fn oat_replacement(couplings: &CouplingMatrix) -> Result<CouplingMatrix> {
    let n = couplings.len();
    if n < 2 {
        return Err(Error::TooFewAtoms { needed: 2, got: n });
    }
    let mean = couplings.total_pair_coupling() / (n * (n - 1) / 2) as f64;
    let mut out = CouplingMatrix::uniform(n, mean)?;
    out.set_field(couplings.field().to_vec())?;
    Ok(out)
}
