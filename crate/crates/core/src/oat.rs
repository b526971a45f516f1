//! Exact one-axis twisting `H = χ S_z²` (Hz) in the symmetric Dicke basis.
//!
//! With uniform all-to-all exchange `J`, the XY Hamiltonian is
//! `J (S² - S_z²) - N J / 2`, so inside the symmetric manifold it acts as
//! OAT with `χ = -J`.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::math::{cos, exp, lgamma, sin, sqrt, TAU};
use crate::observables::CollectiveMoments;
use crate::{Error, Result};

pub const MAX_ATOMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OatModel {
    pub n: usize,
    pub chi_hz: f64,
}

impl OatModel {
    pub fn new(n: usize, chi_hz: f64) -> Result<Self> {
        if n == 0 || n > MAX_ATOMS {
            return Err(Error::InvalidParameter(format!("OAT atom number {n} outside 1..={MAX_ATOMS}")));
        }
        if !chi_hz.is_finite() {
            return Err(Error::InvalidParameter("non-finite twisting strength".into()));
        }
        Ok(Self { n, chi_hz })
    }

    /// Twisting strength equivalent to uniform XY exchange `j_hz`.
    pub fn from_uniform_exchange(n: usize, j_hz: f64) -> Result<Self> {
        Self::new(n, -j_hz)
    }
}

/// Exact moments of the x-polarized coherent state after time `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OatMoments {
    pub moments: CollectiveMoments,
    pub readout_angle: f64,
}

impl OatMoments {
    pub fn mean_sz(&self) -> f64 {
        self.moments.mean[2]
    }

    pub fn mean_sy(&self) -> f64 {
        self.moments.mean[1]
    }

    /// Variance of `cos θ S_z + sin θ S_y`.
    pub fn rotated_variance(&self) -> f64 {
        self.moments.variance_along(CollectiveMoments::zy_readout(self.readout_angle))
    }

    pub fn xi2(&self) -> f64 {
        4.0 * self.rotated_variance() / self.moments.n_atoms
    }

    pub fn contrast(&self) -> f64 {
        self.moments.contrast()
    }

    /// Minimum over readout angles in the z-y plane and its angle.
    pub fn optimum(&self) -> (f64, f64) {
        let (v, theta) = self.moments.plane_minimum([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]);
        (4.0 * v / self.moments.n_atoms, theta)
    }
}

/// Amplitudes `c_k`, `k = m + N/2`, of the +x coherent state twisted for `tau`.
pub fn dicke_amplitudes(model: &OatModel, tau: f64) -> Vec<Complex64> {
    let n = model.n;
    let half = 0.5 * n as f64;
    let ln_norm = lgamma(n as f64 + 1.0) - n as f64 * core::f64::consts::LN_2;
    (0..=n)
        .map(|k| {
            let w = exp(0.5 * (ln_norm - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0)));
            let m = k as f64 - half;
            let phase = -TAU * model.chi_hz * tau * m * m;
            Complex64::new(w * cos(phase), w * sin(phase))
        })
        .collect()
}

/// Exact collective moments after evolving for `tau` seconds.
pub fn oat_dicke_oracle(model: &OatModel, tau: f64, readout_angle: f64) -> Result<OatMoments> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau = {tau}")));
    }
    let c = dicke_amplitudes(model, tau);
    let n = model.n;
    let s = 0.5 * n as f64;
    let ladder = |m: f64| sqrt(s * (s + 1.0) - m * (m + 1.0));
    let mut sz = 0.0;
    let mut sz2 = 0.0;
    let mut s_plus = Complex64::new(0.0, 0.0);
    let mut s_plus_z = Complex64::new(0.0, 0.0);
    let mut s_plus2 = Complex64::new(0.0, 0.0);
    for k in 0..=n {
        let m = k as f64 - s;
        let p = c[k].norm_sqr();
        sz += m * p;
        sz2 += m * m * p;
        if k < n {
            let t = c[k + 1].conj() * c[k] * ladder(m);
            s_plus += t;
            s_plus_z += t * (2.0 * m + 1.0);
        }
        if k + 1 < n {
            s_plus2 += c[k + 2].conj() * c[k] * (ladder(m) * ladder(m + 1.0));
        }
    }
    let casimir = s * (s + 1.0);
    let sx2 = 0.5 * (casimir - sz2 + s_plus2.re);
    let sy2 = 0.5 * (casimir - sz2 - s_plus2.re);
    let sxy = 0.5 * s_plus2.im;
    let sxz = 0.5 * s_plus_z.re;
    let syz = 0.5 * s_plus_z.im;
    let moments = CollectiveMoments {
        n_atoms: n as f64,
        mean: [s_plus.re, s_plus.im, sz],
        second: [[sx2, sxy, sxz], [sxy, sy2, syz], [sxz, syz, sz2]],
    };
    Ok(OatMoments {
        moments,
        readout_angle,
    })
}
