//! Float helpers for `no_std` builds.

pub(crate) use libm::{atan2, cos, exp, fabs, lgamma, log10, sin, sqrt};

pub(crate) const TAU: f64 = core::f64::consts::TAU;

pub(crate) type Vec3 = [f64; 3];

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    sqrt(dot(a, a))
}

#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Smallest eigenvalue and its unit eigenvector of a symmetric 2x2 matrix.
pub(crate) fn min_eig_2x2(a: f64, b: f64, d: f64) -> (f64, [f64; 2]) {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = sqrt(half * half + b * b);
    let lambda = mean - r;
    // eigenvector angle: minimizes a cos^2 + 2b sin cos + d sin^2
    let phi = 0.5 * atan2(2.0 * b, a - d) + core::f64::consts::FRAC_PI_2;
    (lambda, [cos(phi), sin(phi)])
}
