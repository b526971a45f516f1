//! Small-sample statistics: moments, percentiles, bootstrap, weighted least squares.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::sqrt;
use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` divisor.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Percentile `q ∈ [0, 100]` with linear interpolation between order statistics.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    percentile_sorted(&v, q)
}

pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Median and 16/84 percentiles.
pub fn median_band(xs: &[f64]) -> (f64, f64, f64) {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    (percentile_sorted(&v, 50.0), percentile_sorted(&v, 16.0), percentile_sorted(&v, 84.0))
}

/// `n` indices drawn uniformly with replacement.
pub fn bootstrap_indices<R: Rng + ?Sized>(n: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    out.extend((0..n).map(|_| rng.random_range(0..n)));
}

/// Result of a weighted linear fit. `covariance` uses the supplied sigmas
/// as absolute uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

/// Minimizes `sum ((y - A p) / sigma)^2` for design rows `A`.
pub fn weighted_least_squares(design: &[Vec<f64>], y: &[f64], sigma: &[f64]) -> Result<LinearFit> {
    let k = design.first().map_or(0, Vec::len);
    if design.len() != y.len() || y.len() != sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: design.len(),
            got: y.len().min(sigma.len()),
        });
    }
    if design.len() < k || k == 0 {
        return Err(Error::InsufficientData {
            what: "fit points",
            needed: k.max(1),
            got: design.len(),
        });
    }
    let mut normal = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for ((row, &yi), &si) in design.iter().zip(y).zip(sigma) {
        if !(si > 0.0) {
            return Err(Error::FitFailed(format!("non-positive sigma {si}")));
        }
        let w = 1.0 / (si * si);
        for a in 0..k {
            rhs[a] += w * row[a] * yi;
            for b in 0..k {
                normal[a][b] += w * row[a] * row[b];
            }
        }
    }
    let covariance = invert_spd(&normal)?;
    let params = (0..k).map(|a| (0..k).map(|b| covariance[a][b] * rhs[b]).sum()).collect();
    Ok(LinearFit { params, covariance })
}

/// Lower-triangular `L` with `L Lᵀ = m`.
pub fn cholesky(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = m.len();
    let mut l = vec![vec![0.0; k]; k];
    let scale = (0..k).map(|i| m[i][i].abs()).fold(0.0, f64::max);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                let d = m[i][i] - s;
                if !(d > 1e-14 * scale) {
                    return Err(Error::FitFailed("matrix is not positive definite".into()));
                }
                l[i][i] = sqrt(d);
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn invert_spd(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = m.len();
    let l = cholesky(m)?;
    // solve L Lᵀ x = e_c column by column
    let mut inv = vec![vec![0.0; k]; k];
    for c in 0..k {
        let mut z = vec![0.0; k];
        for i in 0..k {
            let s: f64 = (0..i).map(|p| l[i][p] * z[p]).sum();
            z[i] = ((i == c) as u8 as f64 - s) / l[i][i];
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = ((i + 1)..k).map(|p| l[p][i] * x[p]).sum();
            x[i] = (z[i] - s) / l[i][i];
        }
        for r in 0..k {
            inv[r][c] = x[r];
        }
    }
    Ok(inv)
}

/// Draw from `N(mean, cov)` given the Cholesky factor of `cov`.
pub fn gaussian_draw<R: Rng + ?Sized>(mean: &[f64], chol: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
    mean.iter()
        .enumerate()
        .map(|(i, m)| m + (0..=i).map(|p| chol[i][p] * z[p]).sum::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn moments_and_percentiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(percentile(&xs, 0.0), 1.0);
        assert_eq!(percentile(&xs, 100.0), 4.0);
        assert!((percentile(&xs, 50.0) - 2.5).abs() < 1e-15);
        assert!((percentile(&xs, 12.5) - 1.375).abs() < 1e-15);
        assert_eq!(percentile(&[7.0], 37.0), 7.0);
    }

    #[test]
    fn exact_line_fit_and_covariance() {
        let design: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..5).map(|i| 2.0 - 0.5 * i as f64).collect();
        let fit = weighted_least_squares(&design, &y, &[0.1; 5]).unwrap();
        assert!((fit.params[0] - 2.0).abs() < 1e-12 && (fit.params[1] + 0.5).abs() < 1e-12);
        // slope variance σ² / Σ (x - x̄)² = 0.01 / 10
        assert!((fit.covariance[1][1] - 1e-3).abs() < 1e-15);
        assert!(weighted_least_squares(&design[..1], &y[..1], &[0.1]).is_err());
        let degenerate = vec![vec![1.0, 1.0]; 3];
        assert!(matches!(weighted_least_squares(&degenerate, &[1.0; 3], &[1.0; 3]), Err(Error::FitFailed(_))));
    }

    #[test]
    fn gaussian_draws_follow_covariance() {
        let cov = vec![vec![2.0, 0.6], vec![0.6, 0.5]];
        let l = cholesky(&cov).unwrap();
        let mut rng = stream_rng(5, Stream::Fit(0));
        let n = 40000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| gaussian_draw(&[1.0, -1.0], &l, &mut rng)).collect();
        let c01 = draws.iter().map(|d| (d[0] - 1.0) * (d[1] + 1.0)).sum::<f64>() / n as f64;
        let c00 = draws.iter().map(|d| (d[0] - 1.0).powi(2)).sum::<f64>() / n as f64;
        assert!((c01 - 0.6).abs() < 0.03 && (c00 - 2.0).abs() < 0.06, "{c01} {c00}");
    }
}
