//! Dense state-vector reference for up to [`MAX_ATOMS`] spins.
//!
//! Basis state `b` has spin `i` up when bit `i` is set. The XY coupling
//! `2 J (S^x S^x + S^y S^y) = J (S^+ S^- + S^- S^+)` swaps antiparallel pairs
//! with amplitude `J`; the field contributes `± h_i / 2` on the diagonal.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::lattice::CouplingMatrix;
use crate::math::{cos, fabs, sin, sqrt, Vec3, TAU};
use crate::observables::CollectiveMoments;
use crate::pulses::PulseSchedule;
use crate::{Error, Result};

pub const MAX_ATOMS: usize = 12;

/// Largest `2π ‖H‖ δ` per Taylor step.
const STEP_NORM: f64 = 2.0;

/// Product of single-spin coherent states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    directions: Vec<Vec3>,
}

impl ProductState {
    /// Every spin along `axis`; the atom count comes from the couplings.
    pub fn along(axis: Vec3) -> Self {
        Self {
            directions: vec![axis],
        }
    }

    pub fn per_spin(directions: Vec<Vec3>) -> Self {
        Self { directions }
    }

    fn direction(&self, i: usize) -> Vec3 {
        if self.directions.len() == 1 {
            self.directions[0]
        } else {
            self.directions[i]
        }
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EdState {
    n: usize,
    psi: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

impl EdState {
    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.psi
    }

    /// `S_a^i |ψ>`.
    fn apply_spin(&self, psi: &[Complex64], i: usize, axis: Axis) -> Vec<Complex64> {
        let mask = 1usize << i;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for (b, &amp) in psi.iter().enumerate() {
            let up = b & mask != 0;
            match axis {
                Axis::Z => out[b] += amp * if up { 0.5 } else { -0.5 },
                Axis::X => out[b ^ mask] += amp * 0.5,
                // S^y|↑> = (i/2)|↓>,  S^y|↓> = (-i/2)|↑>
                Axis::Y => out[b ^ mask] += amp * Complex64::new(0.0, if up { 0.5 } else { -0.5 }),
            }
        }
        out
    }

    fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    /// `<S_a^i>`.
    pub fn expect_single(&self, i: usize, axis: Axis) -> f64 {
        Self::inner(&self.psi, &self.apply_spin(&self.psi, i, axis)).re
    }

    /// `<S_a^i S_b^j>` (real part; exact for `i != j`).
    pub fn expect_pair(&self, i: usize, a: Axis, j: usize, b: Axis) -> f64 {
        let right = self.apply_spin(&self.psi, j, b);
        let left = self.apply_spin(&self.psi, i, a);
        Self::inner(&left, &right).re
    }

    fn collective(&self, axis: Axis) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.psi.len()];
        for i in 0..self.n {
            for (o, v) in out.iter_mut().zip(self.apply_spin(&self.psi, i, axis)) {
                *o += v;
            }
        }
        out
    }

    pub fn collective_moments(&self) -> CollectiveMoments {
        let s: Vec<Vec<Complex64>> = AXES.iter().map(|&a| self.collective(a)).collect();
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for a in 0..3 {
            mean[a] = Self::inner(&self.psi, &s[a]).re;
            for b in 0..3 {
                second[a][b] = Self::inner(&s[a], &s[b]).re;
            }
        }
        CollectiveMoments {
            n_atoms: self.n as f64,
            mean,
            second,
        }
    }

    pub fn total_sz(&self) -> f64 {
        (0..self.n).map(|i| self.expect_single(i, Axis::Z)).sum()
    }

    fn rotate_all(&mut self, phase: f64, angle: f64) {
        // cos(θ/2) I - i sin(θ/2)(cos φ σx + sin φ σy)
        let c = Complex64::new(cos(0.5 * angle), 0.0);
        let s = sin(0.5 * angle);
        // <↑|U|↓> = -i s e^{-iφ},  <↓|U|↑> = -i s e^{iφ}
        let up_from_down = Complex64::new(0.0, -s) * Complex64::new(cos(phase), -sin(phase));
        let down_from_up = Complex64::new(0.0, -s) * Complex64::new(cos(phase), sin(phase));
        for i in 0..self.n {
            let mask = 1usize << i;
            for b in 0..self.psi.len() {
                if b & mask == 0 {
                    let down = self.psi[b];
                    let up = self.psi[b | mask];
                    self.psi[b | mask] = c * up + up_from_down * down;
                    self.psi[b] = down_from_up * up + c * down;
                }
            }
        }
    }
}

struct Hamiltonian {
    diag: Vec<f64>,
    pairs: Vec<(usize, f64)>,
    norm_bound: f64,
}

impl Hamiltonian {
    fn new(couplings: &CouplingMatrix) -> Self {
        let n = couplings.len();
        let dim = 1usize << n;
        let h = couplings.field();
        let diag: Vec<f64> = (0..dim)
            .map(|b| (0..n).map(|i| if b >> i & 1 == 1 { 0.5 * h[i] } else { -0.5 * h[i] }).sum())
            .collect();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = couplings.get(i, j);
                if v != 0.0 {
                    pairs.push(((1usize << i) | (1usize << j), v));
                }
            }
        }
        // Gershgorin bound
        let mut norm_bound = 0.0f64;
        for b in 0..dim {
            let off: f64 = pairs
                .iter()
                .filter(|(m, _)| (b & m).count_ones() == 1)
                .map(|(_, v)| fabs(*v))
                .sum();
            norm_bound = norm_bound.max(fabs(diag[b]) + off);
        }
        Self {
            diag,
            pairs,
            norm_bound,
        }
    }

    fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        for ((o, &p), &d) in out.iter_mut().zip(psi).zip(&self.diag) {
            *o = p * d;
        }
        for &(mask, v) in &self.pairs {
            for (b, &p) in psi.iter().enumerate() {
                if (b & mask).count_ones() == 1 {
                    out[b ^ mask] += p * v;
                }
            }
        }
    }

    /// `ψ ← exp(-2πi H t) ψ` by Taylor series on sub-steps.
    fn evolve(&self, psi: &mut [Complex64], t: f64) {
        if t <= 0.0 || self.norm_bound == 0.0 {
            return;
        }
        let steps = libm::ceil(TAU * self.norm_bound * t / STEP_NORM).max(1.0) as usize;
        let delta = t / steps as f64;
        let mut term = vec![Complex64::new(0.0, 0.0); psi.len()];
        let mut next = term.clone();
        for _ in 0..steps {
            term.copy_from_slice(psi);
            for k in 1..200 {
                self.apply(&term, &mut next);
                let f = Complex64::new(0.0, -TAU * delta / k as f64);
                let mut size = 0.0;
                for (t, nx) in term.iter_mut().zip(&next) {
                    *t = nx * f;
                    size += t.norm_sqr();
                }
                for (p, t) in psi.iter_mut().zip(&term) {
                    *p += t;
                }
                if size < 1e-34 {
                    break;
                }
            }
            let norm = sqrt(psi.iter().map(|p| p.norm_sqr()).sum::<f64>());
            psi.iter_mut().for_each(|p| *p /= norm);
        }
    }
}

/// States recorded at sample times (before coincident pulses) and at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct EdOutput {
    pub samples: Vec<EdState>,
    pub final_state: EdState,
}

/// Exact evolution of `initial` under `couplings` and the pulses of `schedule`.
pub fn exact_ed_oracle(couplings: &CouplingMatrix, initial: &ProductState, schedule: &PulseSchedule, sample_times: &[f64]) -> Result<EdOutput> {
    let n = couplings.len();
    if n > MAX_ATOMS {
        return Err(Error::SizeGuard { n, max: MAX_ATOMS });
    }
    if n == 0 {
        return Err(Error::TooFewAtoms { needed: 1, got: 0 });
    }
    if initial.directions.len() != 1 && initial.directions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: initial.directions.len(),
        });
    }
    let duration = schedule.duration();
    if let Some(t) = sample_times.iter().find(|&&t| t < 0.0 || t > duration + 1e-9) {
        return Err(Error::InvalidParameter(format!("sample time {t} s outside schedule of {duration} s")));
    }
    let mut state = EdState {
        n,
        psi: product_amplitudes(initial, n)?,
    };
    let ham = Hamiltonian::new(couplings);
    // (time, is_event, index); samples precede events at equal times
    let mut stops: Vec<(f64, bool, usize)> = sample_times.iter().enumerate().map(|(k, &t)| (t, false, k)).collect();
    stops.extend(schedule.events().iter().enumerate().map(|(k, e)| (e.time_s, true, k)));
    stops.sort_by(|a, b| {
        if fabs(a.0 - b.0) < 1e-9 {
            (a.1, a.2).cmp(&(b.1, b.2))
        } else {
            a.0.total_cmp(&b.0)
        }
    });
    let mut samples = vec![None; sample_times.len()];
    let mut t = 0.0;
    for (time, is_event, k) in stops {
        if time > t + 1e-12 {
            ham.evolve(&mut state.psi, time - t);
            t = time;
        }
        if is_event {
            let e = schedule.events()[k];
            state.rotate_all(e.phase, e.angle);
        } else {
            samples[k] = Some(state.clone());
        }
    }
    if duration > t + 1e-12 {
        ham.evolve(&mut state.psi, duration - t);
    }
    Ok(EdOutput {
        samples: samples.into_iter().map(|s| s.expect("every sample time visited")).collect(),
        final_state: state,
    })
}

fn product_amplitudes(initial: &ProductState, n: usize) -> Result<Vec<Complex64>> {
    // |n> = cos(θ/2)|↑> + e^{iφ} sin(θ/2)|↓>
    let mut single = Vec::with_capacity(n);
    for i in 0..n {
        let d = initial.direction(i);
        let len = sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if fabs(len - 1.0) > 1e-9 {
            return Err(Error::InvalidParameter(format!("direction {d:?} is not a unit vector")));
        }
        let theta = libm::acos((d[2] / len).clamp(-1.0, 1.0));
        let phi = libm::atan2(d[1], d[0]);
        single.push((
            Complex64::new(cos(0.5 * theta), 0.0),
            Complex64::new(cos(phi), sin(phi)) * sin(0.5 * theta),
        ));
    }
    Ok((0..1usize << n)
        .map(|b| {
            (0..n).fold(Complex64::new(1.0, 0.0), |acc, i| {
                acc * if b >> i & 1 == 1 { single[i].0 } else { single[i].1 }
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::PulseEvent;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn larmor_quarter_period() {
        let m = CouplingMatrix::from_parts(1, vec![0.0], vec![1.0]).unwrap();
        let sched = PulseSchedule::free(0.25).unwrap();
        let out = exact_ed_oracle(&m, &ProductState::along([1.0, 0.0, 0.0]), &sched, &[0.0]).unwrap();
        assert!((out.samples[0].expect_single(0, Axis::X) - 0.5).abs() < 1e-12);
        let s = &out.final_state;
        assert!((s.expect_single(0, Axis::Y) - 0.5).abs() < 1e-12);
        assert!(s.expect_single(0, Axis::X).abs() < 1e-12);
    }

    #[test]
    fn pulse_conventions_match_classical_rotations() {
        let m = CouplingMatrix::from_parts(1, vec![0.0], vec![0.0]).unwrap();
        let up = ProductState::along([0.0, 0.0, 1.0]);
        let x = PulseSchedule::new(vec![PulseEvent::new(0.0, 0.0, FRAC_PI_2)], 0.0).unwrap();
        let s = exact_ed_oracle(&m, &up, &x, &[]).unwrap().final_state;
        assert!((s.expect_single(0, Axis::Y) + 0.5).abs() < 1e-14);
        let y = PulseSchedule::new(vec![PulseEvent::new(0.0, FRAC_PI_2, FRAC_PI_2)], 0.0).unwrap();
        let s = exact_ed_oracle(&m, &up, &y, &[]).unwrap().final_state;
        assert!((s.expect_single(0, Axis::X) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn pair_swaps_excitation() {
        // |↑↓> under J(S+S- + h.c.): <S^z_0> = cos(2π·2J t)/2... with splitting 2J
        let j = 1.0;
        let m = CouplingMatrix::uniform(2, j).unwrap();
        let init = ProductState::per_spin(vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]);
        let t = 0.1;
        let out = exact_ed_oracle(&m, &init, &PulseSchedule::free(t).unwrap(), &[]).unwrap();
        let sz0 = out.final_state.expect_single(0, Axis::Z);
        assert!((sz0 - 0.5 * cos(2.0 * TAU * j * t)).abs() < 1e-12, "{sz0}");
        assert!(out.final_state.total_sz().abs() < 1e-12);
    }

    #[test]
    fn size_guard() {
        let m = CouplingMatrix::uniform(13, 1.0).unwrap();
        assert!(matches!(
            exact_ed_oracle(&m, &ProductState::along([1.0, 0.0, 0.0]), &PulseSchedule::free(0.1).unwrap(), &[]),
            Err(Error::SizeGuard { n: 13, max: 12 })
        ));
    }

    #[test]
    fn collective_moments_of_coherent_state() {
        let m = CouplingMatrix::uniform(4, 0.0).unwrap();
        let out = exact_ed_oracle(&m, &ProductState::along([1.0, 0.0, 0.0]), &PulseSchedule::free(0.0).unwrap(), &[]).unwrap();
        let mo = out.final_state.collective_moments();
        assert!((mo.mean[0] - 2.0).abs() < 1e-14);
        assert!((mo.variance_along([0.0, 0.0, 1.0]) - 1.0).abs() < 1e-14);
        assert!((mo.variance_along([0.0, 1.0, 0.0]) - 1.0).abs() < 1e-14);
        assert!(mo.variance_along([1.0, 0.0, 0.0]).abs() < 1e-14);
    }
}
