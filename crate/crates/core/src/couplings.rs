//! Dipolar spin-exchange strengths for magnetically insensitive hyperfine
//! qubits.
//!
//! For a qubit `|F, m_F> <-> |F+1, m_F>` only the `J_z J_z` part of the
//! dipole-dipole operator couples the two states, so the exchange strength is
//! the dipolar prefactor `mu0 gJ^2 muB^2 / (4 pi a^3 h)` times
//! `C_G = |<F+1, m_F| J_z |F, m_F>|^2`. Both Clebsch-Gordan coefficients in
//! `C_G` share their `j`-dependent normalisation, which makes `C_G` an exact
//! rational number; [`jz_coupling_factor_exact`] evaluates it that way.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::math::{fabs, sqrt};
use crate::{Error, Result};

/// Vacuum permeability, CODATA 2018 (N A^-2).
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Bohr magneton, CODATA 2018 (J T^-1).
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Planck constant, exact SI (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// A non-negative or negative multiple of 1/2, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn integer(n: i32) -> Self {
        HalfInt(2 * n)
    }

    /// Accepts any float within 1e-9 of a multiple of 1/2.
    pub fn from_f64(value: f64) -> Result<Self> {
        let twice = value * 2.0;
        let rounded = libm::round(twice);
        if !value.is_finite() || fabs(twice - rounded) > 1e-9 || fabs(rounded) > 1e6 {
            return Err(Error::Domain(format!("{value} is not a multiple of 1/2")));
        }
        Ok(HalfInt(rounded as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    fn rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.0), BigInt::from(2))
    }
}

impl core::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: Self) -> Self {
        HalfInt(self.0 + rhs.0)
    }
}

impl core::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: Self) -> Self {
        HalfInt(self.0 - rhs.0)
    }
}

impl core::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> Self {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Nuclear spin, electronic angular momentum and Lande factor of a species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularMomentumSpec {
    pub nuclear_spin: HalfInt,
    pub electronic_j: HalfInt,
    pub lande_gj: f64,
}

impl AngularMomentumSpec {
    pub fn new(nuclear_spin: HalfInt, electronic_j: HalfInt, lande_gj: f64) -> Result<Self> {
        if nuclear_spin.twice() < 0 || electronic_j.twice() < 0 {
            return Err(Error::Domain("I and J must be non-negative".into()));
        }
        if !(lande_gj.is_finite() && lande_gj > 0.0) {
            return Err(Error::Domain(format!("g_J = {lande_gj} must be finite and positive")));
        }
        Ok(Self {
            nuclear_spin,
            electronic_j,
            lande_gj,
        })
    }

    /// Erbium-167 ground state: I = 7/2, J = 6, g_J = 1.1638.
    pub fn erbium_167() -> Self {
        Self {
            nuclear_spin: HalfInt::from_twice(7),
            electronic_j: HalfInt::integer(6),
            lande_gj: 1.1638,
        }
    }

    /// Range of the lower hyperfine level of a ΔF = 1 pair, inclusive.
    /// Empty (`lo > hi`) when the species has fewer than two F levels.
    pub fn lower_f_range(&self) -> (HalfInt, HalfInt) {
        let lo = (self.nuclear_spin - self.electronic_j).abs();
        let hi = self.nuclear_spin + self.electronic_j - HalfInt::integer(1);
        (lo, hi)
    }
}

/// Qubit `|F_lower, m_F> <-> |F_lower + 1, m_F>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperfineQubit {
    pub f_lower: HalfInt,
    pub m_f: HalfInt,
}

impl HyperfineQubit {
    pub fn new(f_lower: HalfInt, m_f: HalfInt) -> Result<Self> {
        if f_lower.twice() < 0 || m_f.abs() > f_lower || (f_lower - m_f).twice() % 2 != 0 {
            return Err(Error::Domain(format!("invalid qubit F = {f_lower}, m_F = {m_f}")));
        }
        Ok(Self { f_lower, m_f })
    }

    pub fn f_upper(&self) -> HalfInt {
        self.f_lower + HalfInt::integer(1)
    }

    fn validate_for(&self, spec: &AngularMomentumSpec) -> Result<()> {
        let (lo, hi) = spec.lower_f_range();
        if self.f_lower < lo || self.f_lower > hi {
            return Err(Error::Domain(format!(
                "F_lower = {} outside [{lo}, {hi}] for I = {}, J = {}",
                self.f_lower, spec.nuclear_spin, spec.electronic_j
            )));
        }
        // F and I + J must differ by an integer
        if (self.f_lower - spec.nuclear_spin - spec.electronic_j).twice() % 2 != 0 {
            return Err(Error::Domain(format!(
                "F_lower = {} incompatible with I + J parity",
                self.f_lower
            )));
        }
        Ok(())
    }
}

/// `mu0 gJ^2 muB^2 / (4 pi a^3 h)` in Hz for a given lattice spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolarPrefactor {
    pub value_hz: f64,
    pub spacing_m: f64,
}

impl DipolarPrefactor {
    pub fn new(lande_gj: f64, spacing_m: f64) -> Result<Self> {
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::InvalidParameter(format!("spacing {spacing_m} m must be positive")));
        }
        let value_hz = MU_0 * lande_gj * lande_gj * MU_B * MU_B
            / (4.0 * core::f64::consts::PI * spacing_m * spacing_m * spacing_m * PLANCK);
        Ok(Self {
            value_hz,
            spacing_m,
        })
    }
}

/// A Clebsch-Gordan coefficient held exactly as `sign * sqrt(square)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedSqrt {
    pub sign: i8,
    pub square: BigRational,
}

impl SignedSqrt {
    pub fn zero() -> Self {
        Self {
            sign: 0,
            square: BigRational::zero(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        f64::from(self.sign) * sqrt(rational_to_f64(&self.square))
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    // both parts stay far inside the f64 exponent range for I + J <= 20
    let n = r.numer().to_f64().unwrap_or(f64::NAN);
    let d = r.denom().to_f64().unwrap_or(f64::NAN);
    n / d
}

fn factorial(n: i32) -> BigInt {
    debug_assert!(n >= 0);
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `(twice / 2)!` for a HalfInt that must be a non-negative integer.
fn fact_half(h: HalfInt) -> BigInt {
    debug_assert!(h.is_integer() && h.twice() >= 0);
    factorial(h.twice() / 2)
}

/// Racah's closed form split into its `j`-dependent normalisation `K`,
/// its `m1, m2`-dependent normalisation `M` and the alternating sum `S`,
/// so that `<j1 m1; j2 m2 | j m> = sqrt(K * M) * S`.
struct RacahParts {
    k: BigRational,
    m: BigRational,
    s: BigRational,
}

fn couple_valid(j1: HalfInt, j2: HalfInt, j: HalfInt) -> bool {
    j >= (j1 - j2).abs() && j <= j1 + j2 && (j1 + j2 + j).is_integer()
}

fn projection_valid(j: HalfInt, m: HalfInt) -> bool {
    m.abs() <= j && (j + m).is_integer()
}

fn racah_parts(
    j1: HalfInt,
    j2: HalfInt,
    j: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
) -> Option<RacahParts> {
    let m = m1 + m2;
    if !couple_valid(j1, j2, j)
        || !projection_valid(j1, m1)
        || !projection_valid(j2, m2)
        || !projection_valid(j, m)
    {
        return None;
    }
    let k_num = BigInt::from(j.twice() + 1)
        * fact_half(j + j1 - j2)
        * fact_half(j - j1 + j2)
        * fact_half(j1 + j2 - j)
        * fact_half(j + m)
        * fact_half(j - m);
    let k_den = fact_half(j1 + j2 + j + HalfInt::integer(1));
    let m_num =
        fact_half(j1 - m1) * fact_half(j1 + m1) * fact_half(j2 - m2) * fact_half(j2 + m2);

    // sum over k where every factorial argument is non-negative
    let a = (j1 + j2 - j).twice() / 2;
    let b = (j1 - m1).twice() / 2;
    let c = (j2 + m2).twice() / 2;
    let d = (j - j2 + m1).twice() / 2;
    let e = (j - j1 - m2).twice() / 2;
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(a - k)
            * factorial(b - k)
            * factorial(c - k)
            * factorial(d + k)
            * factorial(e + k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Some(RacahParts {
        k: BigRational::new(k_num, k_den),
        m: BigRational::from_integer(m_num),
        s: sum,
    })
}

fn check_inputs(
    j1: HalfInt,
    j2: HalfInt,
    j: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m: HalfInt,
) -> Result<()> {
    if j1.twice() < 0 || j2.twice() < 0 || j.twice() < 0 {
        return Err(Error::Domain("angular momenta must be non-negative".into()));
    }
    if !couple_valid(j1, j2, j) {
        return Err(Error::Domain(format!("triangle rule violated for ({j1}, {j2}, {j})")));
    }
    for (jj, mm) in [(j1, m1), (j2, m2), (j, m)] {
        if !projection_valid(jj, mm) {
            return Err(Error::Domain(format!("projection {mm} invalid for j = {jj}")));
        }
    }
    Ok(())
}

/// `<j1 m1; j2 m2 | j m>` exactly, Condon-Shortley phase convention.
pub fn clebsch_gordan_exact(
    j1: HalfInt,
    j2: HalfInt,
    j: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m: HalfInt,
) -> Result<SignedSqrt> {
    check_inputs(j1, j2, j, m1, m2, m)?;
    if m1 + m2 != m {
        return Ok(SignedSqrt::zero());
    }
    let parts = racah_parts(j1, j2, j, m1, m2).expect("inputs validated");
    let sign = if parts.s.is_zero() {
        0
    } else if parts.s.is_positive() {
        1
    } else {
        -1
    };
    Ok(SignedSqrt {
        sign,
        square: parts.k * parts.m * &parts.s * &parts.s,
    })
}

/// `<j1 m1; j2 m2 | j m>` as a float. Returns 0 when `m1 + m2 != m`.
pub fn clebsch_gordan(
    j1: HalfInt,
    j2: HalfInt,
    j: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    clebsch_gordan_exact(j1, j2, j, m1, m2, m).map(|c| c.to_f64())
}

/// `C_G = |<F+1, m_F| J_z |F, m_F>|^2` as an exact rational.
pub fn jz_coupling_factor_exact(
    spec: &AngularMomentumSpec,
    qubit: &HyperfineQubit,
) -> Result<BigRational> {
    let jj = spec.electronic_j;
    let ii = spec.nuclear_spin;
    if jj == HalfInt::ZERO {
        // J_z vanishes identically
        return Ok(BigRational::zero());
    }
    qubit.validate_for(spec)?;
    let f_lo = qubit.f_lower;
    let f_hi = qubit.f_upper();
    let m_f = qubit.m_f;

    let mut k_common: Option<BigRational> = None;
    let mut sum = BigRational::zero();
    let mut m_j = -jj;
    while m_j <= jj {
        let m_i = m_f - m_j;
        if m_i.abs() <= ii {
            let lo = racah_parts(jj, ii, f_lo, m_j, m_i);
            let hi = racah_parts(jj, ii, f_hi, m_j, m_i);
            if let (Some(lo), Some(hi)) = (lo, hi) {
                // both coefficients carry the same M(m_J, m_I)
                if k_common.is_none() {
                    k_common = Some(&lo.k * &hi.k);
                }
                sum += m_j.rational() * lo.m * lo.s * hi.s;
            }
        }
        m_j = m_j + HalfInt::integer(1);
    }
    Ok(match k_common {
        Some(k) => k * &sum * &sum,
        None => BigRational::zero(),
    })
}

pub fn jz_coupling_factor(spec: &AngularMomentumSpec, qubit: &HyperfineQubit) -> Result<f64> {
    jz_coupling_factor_exact(spec, qubit).map(|r| rational_to_f64(&r))
}

/// Nearest-neighbour exchange `J_perp` in Hz.
pub fn exchange_coupling(
    spec: &AngularMomentumSpec,
    qubit: &HyperfineQubit,
    spacing_m: f64,
) -> Result<f64> {
    let prefactor = DipolarPrefactor::new(spec.lande_gj, spacing_m)?;
    Ok(prefactor.value_hz * jz_coupling_factor(spec, qubit)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRow {
    pub qubit: HyperfineQubit,
    pub c_g: f64,
    pub j_perp_hz: f64,
}

/// Every ΔF = 1, Δm_F = 0 qubit of a species, sorted by `(F_lower, m_F)`.
pub fn coupling_scan(spec: &AngularMomentumSpec, spacing_m: f64) -> Result<Vec<CouplingRow>> {
    let prefactor = DipolarPrefactor::new(spec.lande_gj, spacing_m)?;
    let (lo, hi) = spec.lower_f_range();
    let mut rows = Vec::new();
    let mut f = lo;
    while f <= hi {
        let mut m = -f;
        while m <= f {
            let qubit = HyperfineQubit::new(f, m)?;
            let c_g = jz_coupling_factor(spec, &qubit)?;
            rows.push(CouplingRow {
                qubit,
                c_g,
                j_perp_hz: prefactor.value_hz * c_g,
            });
            m = m + HalfInt::integer(1);
        }
        f = f + HalfInt::integer(1);
    }
    Ok(rows)
}

/// Largest coupling of each `F_lower` family.
pub fn family_maxima(rows: &[CouplingRow]) -> Vec<CouplingRow> {
    let mut out: Vec<CouplingRow> = Vec::new();
    for row in rows {
        match out.last_mut() {
            Some(best) if best.qubit.f_lower == row.qubit.f_lower => {
                if row.j_perp_hz > best.j_perp_hz {
                    *best = row.clone();
                }
            }
            _ => out.push(row.clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(twice: i32) -> HalfInt {
        HalfInt::from_twice(twice)
    }

    /// Clebsch-Gordan coefficients from the lowering-operator recursion,
    /// independent of the Racah sum: start from the stretched state
    /// |j1 j1>|j2 j2> = |J=j1+j2, M=J> and apply J- repeatedly, then build
    /// lower J by orthogonalisation (Gram-Schmidt with the Condon-Shortley
    /// sign fixed by <j1 j1; j2 (J-j1) | J J> > 0).
    fn cg_recursion_table(two_j1: i32, two_j2: i32) -> std::collections::BTreeMap<(i32, i32, i32), f64> {
        use std::collections::BTreeMap;
        let j1 = two_j1 as f64 / 2.0;
        let j2 = two_j2 as f64 / 2.0;
        // basis index over (m1, m2) as twice values
        let basis: std::vec::Vec<(i32, i32)> = (0..=two_j1)
            .flat_map(|a| (0..=two_j2).map(move |b| (two_j1 - 2 * a, two_j2 - 2 * b)))
            .collect();
        let idx = |m1: i32, m2: i32| basis.iter().position(|&p| p == (m1, m2)).unwrap();
        let lower = |v: &[f64]| -> std::vec::Vec<f64> {
            let mut out = std::vec![0.0; v.len()];
            for (k, &(m1, m2)) in basis.iter().enumerate() {
                if v[k] == 0.0 {
                    continue;
                }
                let fm1 = m1 as f64 / 2.0;
                let fm2 = m2 as f64 / 2.0;
                if m1 > -two_j1 {
                    let c = (j1 * (j1 + 1.0) - fm1 * (fm1 - 1.0)).sqrt();
                    out[idx(m1 - 2, m2)] += c * v[k];
                }
                if m2 > -two_j2 {
                    let c = (j2 * (j2 + 1.0) - fm2 * (fm2 - 1.0)).sqrt();
                    out[idx(m1, m2 - 2)] += c * v[k];
                }
            }
            out
        };
        let normalize = |v: &mut [f64]| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
        };
        // states[(2J, 2M)] = vector
        let mut states: BTreeMap<(i32, i32), std::vec::Vec<f64>> = BTreeMap::new();
        let two_jmax = two_j1 + two_j2;
        let two_jmin = (two_j1 - two_j2).abs();
        let mut two_big_j = two_jmax;
        while two_big_j >= two_jmin {
            // top state |J, J>: orthogonal to all |J', J> with J' > J
            let mut top = std::vec![0.0; basis.len()];
            for (k, &(m1, m2)) in basis.iter().enumerate() {
                if m1 + m2 == two_big_j {
                    top[k] = 1.0 + k as f64 * 0.37;
                }
            }
            let mut higher = two_big_j + 2;
            while higher <= two_jmax {
                let other = &states[&(higher, two_big_j)];
                let ov: f64 = top.iter().zip(other).map(|(a, b)| a * b).sum();
                for (t, o) in top.iter_mut().zip(other) {
                    *t -= ov * o;
                }
                higher += 2;
            }
            normalize(&mut top);
            let m2_for_top = two_big_j - two_j1;
            if m2_for_top.abs() <= two_j2 && top[idx(two_j1, m2_for_top)] < 0.0 {
                top.iter_mut().for_each(|x| *x = -*x);
            }
            let mut current = top;
            let mut two_m = two_big_j;
            loop {
                states.insert((two_big_j, two_m), current.clone());
                if two_m == -two_big_j {
                    break;
                }
                current = lower(&current);
                normalize(&mut current);
                two_m -= 2;
            }
            two_big_j -= 2;
        }
        let mut table = BTreeMap::new();
        for (&(tj, tm), v) in &states {
            for (k, &(m1, _m2)) in basis.iter().enumerate() {
                if basis[k].0 + basis[k].1 == tm {
                    table.insert((tj, tm, m1), v[k]);
                }
            }
        }
        table
    }

    #[test]
    fn trivial_couplings() {
        // j2 = 0 is the identity coupling
        for two_j in 0..6 {
            for a in 0..=two_j {
                let m = two_j - 2 * a;
                let c = clebsch_gordan(h(two_j), h(0), h(two_j), h(m), h(0), h(m)).unwrap();
                assert!((c - 1.0).abs() < 1e-15);
            }
        }
        let stretched = clebsch_gordan(h(1), h(1), h(2), h(1), h(1), h(2)).unwrap();
        assert_eq!(stretched, 1.0);
        let singlet = clebsch_gordan(h(1), h(1), h(0), h(1), h(-1), h(0)).unwrap();
        assert!((singlet - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let singlet_other = clebsch_gordan(h(1), h(1), h(0), h(-1), h(1), h(0)).unwrap();
        assert!((singlet_other + core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        // m1 + m2 != m
        assert_eq!(clebsch_gordan(h(1), h(1), h(2), h(1), h(1), h(0)).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(clebsch_gordan(h(1), h(1), h(4), h(1), h(1), h(2)).is_err());
        assert!(clebsch_gordan(h(1), h(1), h(2), h(3), h(1), h(2)).is_err());
        assert!(clebsch_gordan(h(2), h(1), h(2), h(1), h(1), h(2)).is_err());
        assert!(HalfInt::from_f64(0.3).is_err());
        assert_eq!(HalfInt::from_f64(3.5).unwrap(), h(7));
    }

    #[test]
    fn racah_matches_recursion() {
        for two_j1 in 0..=6 {
            for two_j2 in 0..=5 {
                let table = cg_recursion_table(two_j1, two_j2);
                for (&(tj, tm, m1), &expected) in &table {
                    let m2 = tm - m1;
                    let got = clebsch_gordan(h(two_j1), h(two_j2), h(tj), h(m1), h(m2), h(tm)).unwrap();
                    assert!(
                        (got - expected).abs() < 1e-10,
                        "j1={two_j1}/2 j2={two_j2}/2 J={tj}/2 M={tm}/2 m1={m1}/2: {got} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn orthogonality_small_j() {
        for two_j1 in 0..=8 {
            for two_j2 in 0..=8 {
                let lo = (two_j1 - two_j2).abs();
                let hi = two_j1 + two_j2;
                for tj in (lo..=hi).step_by(2) {
                    for tjp in (lo..=hi).step_by(2) {
                        for tm in (-tj..=tj).step_by(2) {
                            if tm.abs() > tjp {
                                continue;
                            }
                            let mut s = 0.0;
                            for m1 in (-two_j1..=two_j1).step_by(2) {
                                let m2 = tm - m1;
                                if m2.abs() > two_j2 {
                                    continue;
                                }
                                s += clebsch_gordan(h(two_j1), h(two_j2), h(tj), h(m1), h(m2), h(tm)).unwrap()
                                    * clebsch_gordan(h(two_j1), h(two_j2), h(tjp), h(m1), h(m2), h(tm)).unwrap();
                            }
                            let expect = if tj == tjp { 1.0 } else { 0.0 };
                            assert!((s - expect).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    /// Brute-force `<F+1 m|J_z|F m>` from float Clebsch-Gordan values of the
    /// recursion oracle.
    fn cg_oracle_jz(two_i: i32, two_j: i32, two_f: i32, two_m: i32) -> f64 {
        let table = cg_recursion_table(two_j, two_i);
        let mut s = 0.0;
        for mj in (-two_j..=two_j).step_by(2) {
            let a = table.get(&(two_f, two_m, mj)).copied().unwrap_or(0.0);
            let b = table.get(&(two_f + 2, two_m, mj)).copied().unwrap_or(0.0);
            s += mj as f64 / 2.0 * a * b;
        }
        s * s
    }

    #[test]
    fn erbium_qubit_factor_is_420_over_361() {
        let spec = AngularMomentumSpec::erbium_167();
        let qubit = HyperfineQubit::new(h(17), h(1)).unwrap();
        let exact = jz_coupling_factor_exact(&spec, &qubit).unwrap();
        assert_eq!(exact, BigRational::new(BigInt::from(420), BigInt::from(361)));
        let oracle = cg_oracle_jz(7, 12, 17, 1);
        assert!((oracle - 420.0 / 361.0).abs() < 1e-10);
    }

    #[test]
    fn erbium_stretched_qubit_matches_oracle() {
        let spec = AngularMomentumSpec::erbium_167();
        let qubit = HyperfineQubit::new(h(17), h(17)).unwrap();
        let got = jz_coupling_factor(&spec, &qubit).unwrap();
        let oracle = cg_oracle_jz(7, 12, 17, 17);
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        // frozen from the recursion oracle
        let exact = jz_coupling_factor_exact(&spec, &qubit).unwrap();
        assert_eq!(exact, BigRational::new(BigInt::from(84), BigInt::from(361)));
    }

    #[test]
    fn jz_factor_symmetric_in_m_f() {
        let spec = AngularMomentumSpec::erbium_167();
        for row in coupling_scan(&spec, 266e-9).unwrap() {
            let flipped = HyperfineQubit::new(row.qubit.f_lower, -row.qubit.m_f).unwrap();
            let a = jz_coupling_factor_exact(&spec, &row.qubit).unwrap();
            let b = jz_coupling_factor_exact(&spec, &flipped).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_j_has_no_coupling() {
        let spec = AngularMomentumSpec::new(h(3), h(0), 2.0).unwrap();
        let qubit = HyperfineQubit::new(h(3), h(1)).unwrap();
        assert_eq!(jz_coupling_factor(&spec, &qubit).unwrap(), 0.0);
    }

    #[test]
    fn f_range_enforced() {
        let spec = AngularMomentumSpec::erbium_167();
        assert!(jz_coupling_factor(&spec, &HyperfineQubit::new(h(19), h(1)).unwrap()).is_err());
        assert!(jz_coupling_factor(&spec, &HyperfineQubit::new(h(3), h(1)).unwrap()).is_err());
    }

    #[test]
    fn exchange_scaling() {
        let spec = AngularMomentumSpec::erbium_167();
        let qubit = HyperfineQubit::new(h(17), h(1)).unwrap();
        let base = exchange_coupling(&spec, &qubit, 266e-9).unwrap();
        assert!((base - 1.087).abs() < 1e-3, "{base}");
        let doubled = exchange_coupling(&spec, &qubit, 532e-9).unwrap();
        assert!((doubled * 8.0 / base - 1.0).abs() < 1e-12);
        let gj2 = AngularMomentumSpec::new(spec.nuclear_spin, spec.electronic_j, 2.0 * spec.lande_gj).unwrap();
        let quad = exchange_coupling(&gj2, &qubit, 266e-9).unwrap();
        assert!((quad / base - 4.0).abs() < 1e-12);
        for a in [100e-9, 266e-9, 1e-6] {
            let c = exchange_coupling(&spec, &qubit, a).unwrap() * a * a * a;
            assert!((c / (base * 266e-9 * 266e-9 * 266e-9) - 1.0).abs() < 1e-12);
        }
        assert!(exchange_coupling(&spec, &qubit, 0.0).is_err());
    }

    #[test]
    fn scan_is_exhaustive_and_sorted() {
        let spec = AngularMomentumSpec::erbium_167();
        let rows = coupling_scan(&spec, 266e-9).unwrap();
        // F_lower = 5/2 .. 17/2, 2F+1 sublevels each
        let expected: i32 = (5..=17).step_by(2).map(|tf| tf + 1).sum();
        assert_eq!(rows.len() as i32, expected);
        for pair in rows.windows(2) {
            let a = (pair[0].qubit.f_lower, pair[0].qubit.m_f);
            let b = (pair[1].qubit.f_lower, pair[1].qubit.m_f);
            assert!(a < b);
        }
        let no_hyperfine = AngularMomentumSpec::new(h(0), h(12), 1.16).unwrap();
        assert!(coupling_scan(&no_hyperfine, 266e-9).unwrap().is_empty());
    }
}
