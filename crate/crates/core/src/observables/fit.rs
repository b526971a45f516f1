//! Minimum of a squeezing curve versus readout angle.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::squeezing::Estimate;
use crate::math::{atan2, cos, log10, sin, sqrt};
use crate::stats::{cholesky, gaussian_draw, percentile, weighted_least_squares};
use crate::{Error, Result};

pub const CURVE_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveModel {
    /// `c + a cos 2θ + b sin 2θ`
    Sinusoid,
    /// `c0 + c1 θ + c2 θ²`
    Quadratic,
}

impl CurveModel {
    fn min_points(self) -> usize {
        match self {
            CurveModel::Sinusoid => 5,
            CurveModel::Quadratic => 4,
        }
    }

    fn row(self, theta: f64) -> Vec<f64> {
        match self {
            CurveModel::Sinusoid => vec![1.0, cos(2.0 * theta), sin(2.0 * theta)],
            CurveModel::Quadratic => vec![1.0, theta, theta * theta],
        }
    }

    /// `(θ_min, y_min)` of the curve with parameters `p`.
    fn minimum(self, p: &[f64]) -> Option<(f64, f64)> {
        match self {
            CurveModel::Sinusoid => {
                let amp = sqrt(p[1] * p[1] + p[2] * p[2]);
                let theta = 0.5 * atan2(-p[2], -p[1]);
                Some((theta, p[0] - amp))
            }
            CurveModel::Quadratic => {
                if !(p[2] > 0.0) {
                    return None;
                }
                let theta = -p[1] / (2.0 * p[2]);
                Some((theta, p[0] - p[1] * p[1] / (4.0 * p[2])))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimumFit {
    pub model: CurveModel,
    pub params: Vec<f64>,
    pub theta_min: f64,
    pub minimum: f64,
    /// 16/84 percentiles of the minimum over covariance draws.
    pub lo: f64,
    pub hi: f64,
    pub minimum_db: f64,
    pub error_db: f64,
}

impl MinimumFit {
    pub fn error(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Weighted fit of estimates versus readout angle (radians). Point
/// uncertainties are half the 16–84 spread; zero spreads fall back to the
/// smallest positive spread (or 1).
pub fn min_squeezing_fit<R: Rng + ?Sized>(points: &[(f64, Estimate)], model: CurveModel, draws: usize, rng: &mut R) -> Result<MinimumFit> {
    if points.len() < model.min_points() {
        return Err(Error::InsufficientData {
            what: "readout angles",
            needed: model.min_points(),
            got: points.len(),
        });
    }
    let raw: Vec<f64> = points.iter().map(|(_, e)| e.sigma()).collect();
    let floor = raw.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    let sigma: Vec<f64> = raw.iter().map(|&s| if s > 0.0 { s } else { floor }).collect();
    let design: Vec<Vec<f64>> = points.iter().map(|(t, _)| model.row(*t)).collect();
    let y: Vec<f64> = points.iter().map(|(_, e)| e.value).collect();
    let fit = weighted_least_squares(&design, &y, &sigma)?;
    let (theta_min, minimum) = model
        .minimum(&fit.params)
        .ok_or_else(|| Error::FitFailed("quadratic opens downward; no minimum".into()))?;
    let chol = cholesky(&fit.covariance)?;
    let samples: Vec<f64> = (0..draws)
        .filter_map(|_| model.minimum(&gaussian_draw(&fit.params, &chol, rng)).map(|m| m.1))
        .collect();
    let (lo, hi) = if samples.is_empty() {
        (minimum, minimum)
    } else {
        (percentile(&samples, 16.0), percentile(&samples, 84.0))
    };
    if !(minimum > 0.0) {
        return Err(Error::FitFailed(alloc::format!("fitted minimum {minimum} is not positive")));
    }
    let minimum_db = 10.0 * log10(minimum);
    let error_db = 10.0 / core::f64::consts::LN_10 * 0.5 * (hi - lo) / minimum;
    Ok(MinimumFit {
        model,
        params: fit.params,
        theta_min,
        minimum,
        lo,
        hi,
        minimum_db,
        error_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn exact(v: f64) -> Estimate {
        Estimate {
            value: v,
            lo: v,
            hi: v,
            draws: vec![],
        }
    }

    #[test]
    fn exact_sinusoid_minimum() {
        // 0.6 - 0.4 cos(2(θ - 0.2)) has minimum 0.2 at θ = 0.2
        let pts: Vec<_> = (0..9)
            .map(|k| {
                let t = -0.6 + 0.15 * k as f64;
                (t, exact(0.6 - 0.4 * cos(2.0 * (t - 0.2))))
            })
            .collect();
        let mut rng = stream_rng(0, Stream::Fit(0));
        let f = min_squeezing_fit(&pts, CurveModel::Sinusoid, 100, &mut rng).unwrap();
        assert!((f.minimum - 0.2).abs() < 1e-9);
        assert!((f.theta_min - 0.2).abs() < 1e-9);
        assert!((f.minimum_db - 10.0 * libm::log10(0.2)).abs() < 1e-8);
    }

    #[test]
    fn exact_parabola_vertex() {
        let pts: Vec<_> = (0..5)
            .map(|k| {
                let t = k as f64 * 0.1;
                (t, exact(0.3 + 2.0 * (t - 0.17) * (t - 0.17)))
            })
            .collect();
        let mut rng = stream_rng(0, Stream::Fit(0));
        let f = min_squeezing_fit(&pts, CurveModel::Quadratic, 10, &mut rng).unwrap();
        assert!((f.minimum - 0.3).abs() < 1e-12 && (f.theta_min - 0.17).abs() < 1e-12);
        let down: Vec<_> = pts.iter().map(|(t, e)| (*t, exact(1.0 - e.value))).collect();
        assert!(matches!(min_squeezing_fit(&down, CurveModel::Quadratic, 10, &mut rng), Err(Error::FitFailed(_))));
        assert!(min_squeezing_fit(&pts[..4], CurveModel::Sinusoid, 10, &mut rng).is_err());
    }

    #[test]
    fn noisy_sinusoid_calibration() {
        use rand_distr::{Distribution, Normal};
        let mut rng = stream_rng(3, Stream::Fit(1));
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut hits = 0;
        let trials = 40;
        for _ in 0..trials {
            let pts: Vec<_> = (0..21)
                .map(|k| {
                    let t = -0.5 + 0.05 * k as f64;
                    let v = 0.7 - 0.5 * cos(2.0 * (t - 0.1)) + noise.sample(&mut rng);
                    (t, Estimate { value: v, lo: v - 0.02, hi: v + 0.02, draws: vec![] })
                })
                .collect();
            let f = min_squeezing_fit(&pts, CurveModel::Sinusoid, 300, &mut rng).unwrap();
            if (f.minimum - 0.2).abs() <= 2.0 * f.error() {
                hits += 1;
            }
        }
        // a 2σ band covers ~95%
        assert!(hits >= 33, "{hits}/{trials}");
    }
}
