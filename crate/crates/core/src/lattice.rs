//! Square-lattice geometry, atomic clouds and pairwise XY couplings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::math::{exp, sqrt};
use crate::{Error, Result};

/// A rectangular `nx x ny` patch of a square lattice with spacing `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGeometry {
    pub spacing_m: f64,
    pub nx: usize,
    pub ny: usize,
}

impl LatticeGeometry {
    pub fn new(spacing_m: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::InvalidParameter(format!("lattice spacing {spacing_m} m")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter(format!("lattice extent {nx}x{ny}")));
        }
        Ok(Self { spacing_m, nx, ny })
    }

    pub fn num_sites(&self) -> usize {
        self.nx * self.ny
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        y * self.nx + x
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.nx, site / self.nx)
    }

    /// Geometric centre in site units.
    pub fn center(&self) -> (f64, f64) {
        ((self.nx as f64 - 1.0) / 2.0, (self.ny as f64 - 1.0) / 2.0)
    }

    /// In-plane distance between two sites, in lattice units.
    pub fn distance_sites(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        let dx = ax as f64 - bx as f64;
        let dy = ay as f64 - by as f64;
        sqrt(dx * dx + dy * dy)
    }
}

/// Sub-cloud identifier, displayed as `A`, `B`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CloudLabel(pub u8);

impl CloudLabel {
    pub const A: CloudLabel = CloudLabel(0);
    pub const B: CloudLabel = CloudLabel(1);

    pub fn as_char(self) -> char {
        (b'A' + self.0) as char
    }
}

impl fmt::Display for CloudLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Hard-core occupation of every lattice site, with optional sub-cloud labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cloud {
    occupied: Vec<bool>,
    labels: Vec<Option<CloudLabel>>,
}

impl Cloud {
    pub fn empty(geom: &LatticeGeometry) -> Self {
        Self {
            occupied: vec![false; geom.num_sites()],
            labels: vec![None; geom.num_sites()],
        }
    }

    pub fn from_occupation(geom: &LatticeGeometry, occupied: Vec<bool>) -> Result<Self> {
        if occupied.len() != geom.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: geom.num_sites(),
                got: occupied.len(),
            });
        }
        let labels = vec![None; occupied.len()];
        Ok(Self { occupied, labels })
    }

    pub fn from_sites(geom: &LatticeGeometry, sites: &[usize]) -> Result<Self> {
        let mut cloud = Self::empty(geom);
        for &s in sites {
            if s >= geom.num_sites() || cloud.occupied[s] {
                return Err(Error::InvalidParameter(format!("site {s} out of range or doubly occupied")));
            }
            cloud.occupied[s] = true;
        }
        Ok(cloud)
    }

    /// Labels occupied sites left of `split_column` as `A`, the rest as `B`.
    pub fn with_split_column(mut self, geom: &LatticeGeometry, split_column: usize) -> Self {
        for s in 0..self.occupied.len() {
            let (x, _) = geom.coords(s);
            self.labels[s] = Some(if x < split_column {
                CloudLabel::A
            } else {
                CloudLabel::B
            });
        }
        self
    }

    pub fn with_labels(mut self, labels: Vec<Option<CloudLabel>>) -> Result<Self> {
        if labels.len() != self.occupied.len() {
            return Err(Error::DimensionMismatch {
                expected: self.occupied.len(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        self.occupied[site]
    }

    pub fn occupation(&self) -> &[bool] {
        &self.occupied
    }

    pub fn site_labels(&self) -> &[Option<CloudLabel>] {
        &self.labels
    }

    pub fn label(&self, site: usize) -> Option<CloudLabel> {
        self.labels[site]
    }

    /// Occupied sites in increasing site order; atom `k` sits at `atoms()[k]`.
    pub fn atoms(&self) -> Vec<usize> {
        self.occupied
            .iter()
            .enumerate()
            .filter_map(|(s, &o)| o.then_some(s))
            .collect()
    }

    pub fn num_atoms(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }
}

/// Mean site occupation in `[0, 1]`, optionally carrying sub-cloud labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FillingProfile {
    values: Vec<f64>,
    labels: Vec<Option<CloudLabel>>,
}

impl FillingProfile {
    pub fn new(geom: &LatticeGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.num_sites() {
            return Err(Error::DimensionMismatch {
                expected: geom.num_sites(),
                got: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("filling {bad} outside [0, 1]")));
        }
        let labels = vec![None; values.len()];
        Ok(Self { values, labels })
    }

    pub fn uniform(geom: &LatticeGeometry, p: f64) -> Result<Self> {
        Self::new(geom, vec![p; geom.num_sites()])
    }

    /// Constant filling `fill` inside `region`, zero outside.
    pub fn region(geom: &LatticeGeometry, region: Region, fill: f64) -> Result<Self> {
        let values = (0..geom.num_sites())
            .map(|s| if region.contains(geom, s) { fill } else { 0.0 })
            .collect();
        Self::new(geom, values)
    }

    /// Gaussian density `peak * exp(-r^2 / (2 sigma^2))` about `center`.
    pub fn gaussian(geom: &LatticeGeometry, center: (f64, f64), sigma: f64, peak: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("gaussian width {sigma}")));
        }
        let values = (0..geom.num_sites())
            .map(|s| {
                let (x, y) = geom.coords(s);
                let dx = x as f64 - center.0;
                let dy = y as f64 - center.1;
                peak * exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
            })
            .collect();
        Self::new(geom, values)
    }

    /// Labels sites left of `split_column` as `A`, the rest as `B`.
    pub fn with_split_column(mut self, geom: &LatticeGeometry, split_column: usize) -> Self {
        for (s, l) in self.labels.iter_mut().enumerate() {
            *l = Some(if geom.coords(s).0 < split_column {
                CloudLabel::A
            } else {
                CloudLabel::B
            });
        }
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[Option<CloudLabel>] {
        &self.labels
    }

    /// Expected atom number.
    pub fn expected_atoms(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn expected_atoms_with(&self, label: CloudLabel) -> f64 {
        self.values
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| **l == Some(label))
            .map(|(p, _)| p)
            .sum()
    }
}

/// A lattice region in site coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Sites `x0 <= x < x0 + width`, `y0 <= y < y0 + height`.
    Rect {
        x0: usize,
        y0: usize,
        width: usize,
        height: usize,
    },
    /// Sites with `(x - cx)^2 + (y - cy)^2 <= radius^2`.
    Disk { cx: f64, cy: f64, radius: f64 },
}

impl Region {
    pub fn contains(&self, geom: &LatticeGeometry, site: usize) -> bool {
        let (x, y) = geom.coords(site);
        match *self {
            Region::Rect {
                x0,
                y0,
                width,
                height,
            } => x >= x0 && x < x0 + width && y >= y0 && y < y0 + height,
            Region::Disk { cx, cy, radius } => {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                dx * dx + dy * dy <= radius * radius + 1e-9
            }
        }
    }

    fn centroid_x(&self) -> f64 {
        match *self {
            Region::Rect { x0, width, .. } => x0 as f64 + (width as f64 - 1.0) / 2.0,
            Region::Disk { cx, .. } => cx,
        }
    }
}

/// Shape used for both clouds of a two-cloud layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CloudShape {
    Square { side: usize },
    Disk { radius: f64 },
}

impl CloudShape {
    /// Width in sites along x.
    fn width(&self) -> usize {
        match *self {
            CloudShape::Square { side } => side,
            CloudShape::Disk { radius } => 2 * (libm::floor(radius + 1e-9) as usize) + 1,
        }
    }
}

/// Two equally filled, labelled regions. Labels follow x order: the region
/// with the smaller centroid x is `A`.
pub fn two_cloud_layout(geom: &LatticeGeometry, first: Region, second: Region, fill: f64) -> Result<FillingProfile> {
    let mut values = vec![0.0; geom.num_sites()];
    let mut labels = vec![None; geom.num_sites()];
    let (left, right) = if first.centroid_x() <= second.centroid_x() {
        (first, second)
    } else {
        (second, first)
    };
    for s in 0..geom.num_sites() {
        let in_a = left.contains(geom, s);
        let in_b = right.contains(geom, s);
        if in_a && in_b {
            return Err(Error::OverlappingRegions);
        }
        if in_a {
            values[s] = fill;
            labels[s] = Some(CloudLabel::A);
        } else if in_b {
            values[s] = fill;
            labels[s] = Some(CloudLabel::B);
        }
    }
    let mut profile = FillingProfile::new(geom, values)?;
    profile.labels = labels;
    Ok(profile)
}

/// Places two copies of `shape` side by side, `gap` empty columns apart,
/// centred in the lattice. Sites outside both clouds are labelled by the
/// nearer cloud so snapshots split cleanly at the midline.
pub fn side_by_side(geom: &LatticeGeometry, shape: CloudShape, gap: usize, fill: f64) -> Result<FillingProfile> {
    let w = shape.width();
    let total = 2 * w + gap;
    if total > geom.nx {
        return Err(Error::InvalidParameter(format!(
            "two clouds of width {w} with gap {gap} need {total} columns, lattice has {}",
            geom.nx
        )));
    }
    let x_a = (geom.nx - total) / 2;
    let x_b = x_a + w + gap;
    let (left, right) = match shape {
        CloudShape::Square { side } => {
            if side > geom.ny {
                return Err(Error::InvalidParameter(format!("square side {side} exceeds ny")));
            }
            let y0 = (geom.ny - side) / 2;
            (
                Region::Rect {
                    x0: x_a,
                    y0,
                    width: side,
                    height: side,
                },
                Region::Rect {
                    x0: x_b,
                    y0,
                    width: side,
                    height: side,
                },
            )
        }
        CloudShape::Disk { radius } => {
            let half = (w / 2) as f64;
            let cy = (geom.ny as f64 - 1.0) / 2.0;
            (
                Region::Disk {
                    cx: x_a as f64 + half,
                    cy,
                    radius,
                },
                Region::Disk {
                    cx: x_b as f64 + half,
                    cy,
                    radius,
                },
            )
        }
    };
    let mut profile = two_cloud_layout(geom, left, right, fill)?;
    let split = x_a + w + gap / 2;
    for s in 0..geom.num_sites() {
        if profile.labels[s].is_none() {
            let (x, _) = geom.coords(s);
            profile.labels[s] = Some(if x < split { CloudLabel::A } else { CloudLabel::B });
        }
    }
    Ok(profile)
}

/// Independent Bernoulli occupation of each site with probability `p_i`.
pub fn sample_cloud<R: Rng + ?Sized>(geom: &LatticeGeometry, profile: &FillingProfile, rng: &mut R) -> Cloud {
    debug_assert_eq!(profile.values.len(), geom.num_sites());
    let occupied = profile
        .values
        .iter()
        .map(|&p| rng.random::<f64>() < p)
        .collect();
    Cloud {
        occupied,
        labels: profile.labels.clone(),
    }
}

/// `h_i = coeff * r_i^2` with `r_i` the distance from `center` in sites.
pub fn harmonic_disorder(geom: &LatticeGeometry, center: (f64, f64), coeff_hz: f64) -> Vec<f64> {
    (0..geom.num_sites())
        .map(|s| {
            let (x, y) = geom.coords(s);
            let dx = x as f64 - center.0;
            let dy = y as f64 - center.1;
            coeff_hz * (dx * dx + dy * dy)
        })
        .collect()
}

/// Symmetric exchange matrix `J` (Hz, zero diagonal, row-major) and
/// longitudinal field `h` (Hz), both indexed by atom.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    n: usize,
    j: Vec<f64>,
    h: Vec<f64>,
    /// Set while every off-diagonal entry equals this value.
    uniform: Option<f64>,
}

impl PartialEq for CouplingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.j == other.j && self.h == other.h
    }
}

impl CouplingMatrix {
    /// Validates symmetry, zero diagonal and non-negative finite entries.
    pub fn from_parts(n: usize, j: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if j.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: j.len(),
            });
        }
        if h.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h.len(),
            });
        }
        for a in 0..n {
            if j[a * n + a] != 0.0 {
                return Err(Error::InvalidParameter("coupling diagonal must vanish".into()));
            }
            for b in 0..a {
                let v = j[a * n + b];
                if v != j[b * n + a] || !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidParameter(format!("coupling ({a}, {b}) not symmetric/non-negative")));
                }
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite field".into()));
        }
        Ok(Self { n, j, h, uniform: None })
    }

    /// Every pair coupled with the same strength.
    pub fn uniform(n: usize, value_hz: f64) -> Result<Self> {
        let mut j = vec![value_hz; n * n];
        for a in 0..n {
            j[a * n + a] = 0.0;
        }
        let mut m = Self::from_parts(n, j, vec![0.0; n])?;
        m.uniform = Some(value_hz);
        Ok(m)
    }

    /// The common pair coupling, if the matrix was built uniform.
    pub fn uniform_value(&self) -> Option<f64> {
        self.uniform
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.j[a * self.n + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.j[a * self.n..(a + 1) * self.n]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.j
    }

    pub fn field(&self) -> &[f64] {
        &self.h
    }

    pub fn set_field(&mut self, h: Vec<f64>) -> Result<()> {
        if h.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: h.len(),
            });
        }
        self.h = h;
        Ok(())
    }

    /// Looks up a per-site field for each atom.
    pub fn apply_site_field(&mut self, site_field: &[f64], atom_sites: &[usize]) -> Result<()> {
        let h = atom_sites.iter().map(|&s| site_field[s]).collect();
        self.set_field(h)
    }

    pub(crate) fn set_pair(&mut self, a: usize, b: usize, value: f64) {
        self.j[a * self.n + b] = value;
        self.j[b * self.n + a] = value;
        self.uniform = None;
    }

    pub(crate) fn set_atom_field(&mut self, a: usize, value: f64) {
        self.h[a] = value;
    }

    /// `sum_{i<j} J_ij`.
    pub fn total_pair_coupling(&self) -> f64 {
        let mut total = 0.0;
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                total += self.get(a, b);
            }
        }
        total
    }
}

/// Physical parameters of the dipolar couplings: `J_ij = rescale * J_perp * (a / r_ij)^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolarCouplings {
    pub j_perp_hz: f64,
    pub rescale: f64,
}

impl DipolarCouplings {
    /// Default 86% Wannier-width rescale.
    pub const DEFAULT_RESCALE: f64 = 0.86;

    pub fn new(j_perp_hz: f64, rescale: f64) -> Result<Self> {
        if !(j_perp_hz.is_finite() && j_perp_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("J_perp = {j_perp_hz} Hz must be positive")));
        }
        if !(rescale > 0.0 && rescale <= 1.0) {
            return Err(Error::InvalidParameter(format!("rescale {rescale} outside (0, 1]")));
        }
        Ok(Self { j_perp_hz, rescale })
    }

    pub fn pair(&self, geom: &LatticeGeometry, a: usize, b: usize) -> f64 {
        let r = geom.distance_sites(a, b);
        self.rescale * self.j_perp_hz / (r * r * r)
    }

    /// Full matrix for atoms at `sites` (distinct), zero field.
    pub fn matrix_for_sites(&self, geom: &LatticeGeometry, sites: &[usize]) -> CouplingMatrix {
        let n = sites.len();
        let mut j = vec![0.0; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let v = self.pair(geom, sites[a], sites[b]);
                j[a * n + b] = v;
                j[b * n + a] = v;
            }
        }
        CouplingMatrix { n, j, h: vec![0.0; n], uniform: None }
    }
}

/// Couplings of every occupied site of `cloud`, atoms in site order.
pub fn build_couplings(geom: &LatticeGeometry, cloud: &Cloud, j_perp_hz: f64, rescale: f64) -> Result<CouplingMatrix> {
    let params = DipolarCouplings::new(j_perp_hz, rescale)?;
    let sites = cloud.atoms();
    if sites.len() < 2 {
        return Err(Error::TooFewAtoms {
            needed: 2,
            got: sites.len(),
        });
    }
    Ok(params.matrix_for_sites(geom, &sites))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;

    fn geom(nx: usize, ny: usize) -> LatticeGeometry {
        LatticeGeometry::new(266e-9, nx, ny).unwrap()
    }

    #[test]
    fn nearest_neighbour_and_diagonal() {
        let g = geom(3, 3);
        let nn = Cloud::from_sites(&g, &[0, 1]).unwrap();
        let m = build_couplings(&g, &nn, 1.09, 0.86).unwrap();
        assert!((m.get(0, 1) - 0.9374).abs() < 1e-12);
        assert_eq!(m.get(0, 0), 0.0);
        let diag = Cloud::from_sites(&g, &[0, 4]).unwrap();
        let m = build_couplings(&g, &diag, 1.09, 0.86).unwrap();
        assert!((m.get(0, 1) - 0.86 * 1.09 * 2f64.powf(-1.5)).abs() < 1e-12);
        assert!(m.field().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn too_few_atoms() {
        let g = geom(3, 3);
        let one = Cloud::from_sites(&g, &[4]).unwrap();
        assert_eq!(
            build_couplings(&g, &one, 1.0, 0.86),
            Err(Error::TooFewAtoms { needed: 2, got: 1 })
        );
    }

    #[test]
    fn harmonic_field_values() {
        let g = geom(21, 21);
        let h = harmonic_disorder(&g, (10.0, 10.0), 1e-3);
        assert_eq!(h[g.site(10, 10)], 0.0);
        assert!((h[g.site(20, 10)] - 0.1).abs() < 1e-15);
        assert!(harmonic_disorder(&g, (10.0, 10.0), 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampling_limits_and_concentration() {
        let g = geom(40, 40);
        let mut rng = stream_rng(3, Stream::CloudSample(0));
        let full = sample_cloud(&g, &FillingProfile::uniform(&g, 1.0).unwrap(), &mut rng);
        assert_eq!(full.num_atoms(), 1600);
        let none = sample_cloud(&g, &FillingProfile::uniform(&g, 0.0).unwrap(), &mut rng);
        assert_eq!(none.num_atoms(), 0);
        let p = 0.8;
        let cloud = sample_cloud(&g, &FillingProfile::uniform(&g, p).unwrap(), &mut rng);
        let sigma = (1600.0 * p * (1.0 - p)).sqrt();
        assert!((cloud.num_atoms() as f64 - 1280.0).abs() < 3.0 * sigma);
        // reproducible
        let a = sample_cloud(&g, &FillingProfile::uniform(&g, p).unwrap(), &mut stream_rng(9, Stream::CloudSample(2)));
        let b = sample_cloud(&g, &FillingProfile::uniform(&g, p).unwrap(), &mut stream_rng(9, Stream::CloudSample(2)));
        assert_eq!(a, b);
    }

    #[test]
    fn two_cloud_layouts() {
        let g = geom(60, 24);
        let profile = side_by_side(&g, CloudShape::Square { side: 18 }, 8, 0.8).unwrap();
        assert!((profile.expected_atoms() - 2.0 * 259.2).abs() < 1e-9);
        assert!((profile.expected_atoms_with(CloudLabel::A) - 259.2).abs() < 1e-9);
        let a_site = profile.labels().iter().position(|l| *l == Some(CloudLabel::A)).unwrap();
        let b_site = profile.labels().iter().position(|l| *l == Some(CloudLabel::B)).unwrap();
        assert!(g.coords(a_site).0 < g.coords(b_site).0);

        let touching = side_by_side(&g, CloudShape::Square { side: 18 }, 0, 0.8).unwrap();
        assert!((touching.expected_atoms() - 2.0 * 259.2).abs() < 1e-9);

        let r1 = Region::Rect { x0: 0, y0: 0, width: 10, height: 10 };
        let r2 = Region::Rect { x0: 5, y0: 5, width: 10, height: 10 };
        assert_eq!(two_cloud_layout(&g, r1, r2, 0.8), Err(Error::OverlappingRegions));
        // argument order does not change labels
        let r3 = Region::Rect { x0: 30, y0: 0, width: 10, height: 10 };
        let p1 = two_cloud_layout(&g, r1, r3, 0.5).unwrap();
        let p2 = two_cloud_layout(&g, r3, r1, 0.5).unwrap();
        assert_eq!(p1, p2);
    }

    fn random_cloud(g: &LatticeGeometry, seed: u64) -> Cloud {
        let mut rng = stream_rng(seed, Stream::CloudSample(1));
        sample_cloud(g, &FillingProfile::uniform(g, 0.5).unwrap(), &mut rng)
    }

    proptest! {
        #[test]
        fn coupling_invariants(seed in 0u64..10_000, j_perp in 0.1f64..5.0, rescale in 0.1f64..1.0) {
            let g = geom(7, 5);
            let cloud = random_cloud(&g, seed);
            prop_assume!(cloud.num_atoms() >= 2);
            let m = build_couplings(&g, &cloud, j_perp, rescale).unwrap();
            let sites = cloud.atoms();
            let unit = build_couplings(&g, &cloud, 1.0, 1.0).unwrap();
            for a in 0..m.len() {
                prop_assert_eq!(m.get(a, a), 0.0);
                for b in 0..m.len() {
                    if a == b { continue; }
                    prop_assert_eq!(m.get(a, b), m.get(b, a));
                    prop_assert!(m.get(a, b) > 0.0);
                    let r = g.distance_sites(sites[a], sites[b]);
                    let law = m.get(a, b) * r * r * r / (rescale * j_perp);
                    prop_assert!((law - 1.0).abs() < 1e-12);
                }
            }
            let ratio = m.total_pair_coupling() / unit.total_pair_coupling();
            prop_assert!((ratio / (rescale * j_perp) - 1.0).abs() < 1e-12);
        }
    }
}
