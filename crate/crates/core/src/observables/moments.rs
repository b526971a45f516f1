//! First and second moments of the collective spin `S = sum_i s_i`.

use crate::dtwa::{frame, SpinConfiguration};
use crate::math::{atan2, cos, dot, norm, sin, Vec3};
use crate::{Error, Result};

/// `mean[a] = <S_a>` and `second[a][b] = <{S_a, S_b}>/2` for an ensemble
/// or quantum state of (on average) `n_atoms` spins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveMoments {
    pub n_atoms: f64,
    pub mean: Vec3,
    pub second: [[f64; 3]; 3],
}

impl CollectiveMoments {
    /// Trajectory averages of `S` and `S_a S_b`.
    pub fn from_configurations<'a, I>(configs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a SpinConfiguration>,
    {
        let mut count = 0usize;
        let mut atoms = 0.0;
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for c in configs {
            let s = c.total();
            count += 1;
            atoms += c.len() as f64;
            for a in 0..3 {
                mean[a] += s[a];
                for b in 0..3 {
                    second[a][b] += s[a] * s[b];
                }
            }
        }
        if count == 0 {
            return Err(Error::InsufficientData {
                what: "trajectories",
                needed: 1,
                got: 0,
            });
        }
        let w = 1.0 / count as f64;
        for a in 0..3 {
            mean[a] *= w;
            for b in 0..3 {
                second[a][b] *= w;
            }
        }
        Ok(Self {
            n_atoms: atoms * w,
            mean,
            second,
        })
    }

    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = self.second;
        for a in 0..3 {
            for b in 0..3 {
                c[a][b] -= self.mean[a] * self.mean[b];
            }
        }
        c
    }

    /// `|<S>| / (N/2)`.
    pub fn contrast(&self) -> f64 {
        norm(self.mean) / (0.5 * self.n_atoms)
    }

    pub fn variance_along(&self, n: Vec3) -> f64 {
        let c = self.covariance();
        let mut v = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                v += n[a] * c[a][b] * n[b];
            }
        }
        v
    }

    /// `4 Var(n·S) / N`.
    pub fn xi2_along(&self, n: Vec3) -> f64 {
        4.0 * self.variance_along(n) / self.n_atoms
    }

    /// Minimum variance over directions `cos θ u + sin θ v`, with the
    /// minimizing `θ ∈ (-π/2, π/2]`.
    pub fn plane_minimum(&self, u: Vec3, v: Vec3) -> (f64, f64) {
        let c = self.covariance();
        let q = |x: Vec3, y: Vec3| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += x[a] * c[a][b] * y[b];
                }
            }
            s
        };
        let (a, b, d) = (q(u, u), q(u, v), q(v, v));
        let (lambda, dir) = crate::math::min_eig_2x2(a, b, d);
        let mut theta = atan2(dir[1], dir[0]);
        let half = core::f64::consts::FRAC_PI_2;
        if theta > half {
            theta -= core::f64::consts::PI;
        } else if theta <= -half {
            theta += core::f64::consts::PI;
        }
        (lambda, theta)
    }

    /// Minimum `4 Var / N` in the plane perpendicular to `<S>`.
    pub fn min_xi2(&self) -> Result<f64> {
        let len = norm(self.mean);
        if !(len > 0.0) {
            return Err(Error::Domain("mean spin vanishes; transverse plane undefined".into()));
        }
        let (e1, e2, _) = frame([self.mean[0] / len, self.mean[1] / len, self.mean[2] / len])?;
        Ok(4.0 * self.plane_minimum(e1, e2).0 / self.n_atoms)
    }

    /// Readout direction `cos θ ẑ + sin θ ŷ` used when the mean spin lies
    /// along x.
    pub fn zy_readout(theta: f64) -> Vec3 {
        [0.0, sin(theta), cos(theta)]
    }

    pub fn correlation(&self, u: Vec3, v: Vec3) -> f64 {
        let c = self.covariance();
        let cu = [dot(c[0], v), dot(c[1], v), dot(c[2], v)];
        dot(u, cu)
    }
}
