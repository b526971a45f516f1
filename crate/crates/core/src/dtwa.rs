//! Discrete truncated Wigner sampling and classical spin precession.
//!
//! Spins are classical 3-vectors in units of ħ. The Hamiltonian (in Hz) is
//!
//! ```text
//! H = 2 sum_{i<j} J_ij (S^x_i S^x_j + S^y_i S^y_j) + sum_i h_i S^z_i
//! ```
//!
//! so each spin precesses as `ds_i/dt = 2π B_i × s_i` in the effective field
//! `B_i = (2 sum_j J_ij s^x_j, 2 sum_j J_ij s^y_j, h_i)`.
//!
//! Trajectories that share one coupling matrix are integrated together as
//! "lanes": for every lane the field sums run over `j` in the same order, so
//! a trajectory's result does not depend on which batch it was placed in.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::itinerancy::{hop_step, oat_replacement, refresh_couplings, MotionMode, Occupancy};
use crate::lattice::{CouplingMatrix, DipolarCouplings, LatticeGeometry};
use crate::math::{cross, fabs, norm, scale, sqrt, Vec3, TAU};
use crate::pulses::{PulseEvent, PulseSchedule, Rotation};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

const TIME_EPS: f64 = 1e-9;

/// Classical spins with the lattice site each atom occupies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfiguration {
    spins: Vec<Vec3>,
    atom_site: Vec<usize>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<Vec3>, atom_site: Vec<usize>) -> Result<Self> {
        if spins.len() != atom_site.len() {
            return Err(Error::DimensionMismatch {
                expected: atom_site.len(),
                got: spins.len(),
            });
        }
        Ok(Self { spins, atom_site })
    }

    /// Every spin pointing along `axis` with length 1/2.
    pub fn polarized(atom_site: Vec<usize>, axis: Vec3) -> Self {
        let s = scale(axis, 0.5 / norm(axis));
        Self {
            spins: vec![s; atom_site.len()],
            atom_site,
        }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[Vec3] {
        &self.spins
    }

    pub fn spins_mut(&mut self) -> &mut [Vec3] {
        &mut self.spins
    }

    pub fn atom_sites(&self) -> &[usize] {
        &self.atom_site
    }

    pub(crate) fn atom_sites_mut(&mut self) -> &mut [usize] {
        &mut self.atom_site
    }

    /// Collective spin `S = sum_i s_i`.
    pub fn total(&self) -> Vec3 {
        self.spins.iter().fold([0.0; 3], |acc, s| [acc[0] + s[0], acc[1] + s[1], acc[2] + s[2]])
    }

    pub fn rotate(&mut self, rotation: &Rotation) {
        for s in &mut self.spins {
            *s = rotation.apply(*s);
        }
    }
}

/// Orthonormal frame `(e1, e2, n)` with `n` along `axis`.
pub(crate) fn frame(axis: Vec3) -> Result<(Vec3, Vec3, Vec3)> {
    let len = norm(axis);
    if !(len > 0.0) || fabs(len - 1.0) > 1e-9 {
        return Err(Error::InvalidParameter(format!("polarization axis {axis:?} is not a unit vector")));
    }
    let n = scale(axis, 1.0 / len);
    // the z frame is the identity; otherwise e1 lies in the plane of n and z
    if fabs(n[2] - 1.0) < 1e-15 {
        return Ok(([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], n));
    }
    if fabs(n[2] + 1.0) < 1e-15 {
        return Ok(([1.0, 0.0, 0.0], [0.0, -1.0, 0.0], n));
    }
    let z = [0.0, 0.0, 1.0];
    let e2 = cross(n, z);
    let e2 = scale(e2, 1.0 / norm(e2));
    let e1 = cross(e2, n);
    Ok((e1, e2, n))
}

/// Discrete Wigner sample of a spin-1/2 coherent state along `axis`: every
/// spin has component +1/2 along the axis and independent ±1/2 along the
/// two transverse frame axes.
pub fn sample_initial<R: Rng + ?Sized>(atom_sites: &[usize], axis: Vec3, rng: &mut R) -> Result<SpinConfiguration> {
    let (e1, e2, n) = frame(axis)?;
    let spins = atom_sites
        .iter()
        .map(|_| {
            let a = if rng.random::<bool>() { 0.5 } else { -0.5 };
            let b = if rng.random::<bool>() { 0.5 } else { -0.5 };
            [
                0.5 * n[0] + a * e1[0] + b * e2[0],
                0.5 * n[1] + a * e1[1] + b * e2[1],
                0.5 * n[2] + a * e1[2] + b * e2[2],
            ]
        })
        .collect();
    SpinConfiguration::new(spins, atom_sites.to_vec())
}

/// Time derivative of every spin.
pub fn eom_derivative(config: &SpinConfiguration, couplings: &CouplingMatrix) -> Result<Vec<Vec3>> {
    let n = config.len();
    if couplings.len() != n {
        return Err(Error::DimensionMismatch {
            expected: couplings.len(),
            got: n,
        });
    }
    let h = couplings.field();
    Ok((0..n)
        .map(|i| {
            let row = couplings.row(i);
            let (mut bx, mut by) = (0.0, 0.0);
            for (k, &c) in row.iter().enumerate() {
                bx += c * config.spins[k][0];
                by += c * config.spins[k][1];
            }
            scale(cross([2.0 * bx, 2.0 * by, h[i]], config.spins[i]), TAU)
        })
        .collect())
}

/// Classical energy in Hz.
pub fn classical_energy(config: &SpinConfiguration, couplings: &CouplingMatrix) -> f64 {
    let mut e = 0.0;
    for i in 0..config.len() {
        let row = couplings.row(i);
        let (mut bx, mut by) = (0.0, 0.0);
        for (k, &c) in row.iter().enumerate() {
            bx += c * config.spins[k][0];
            by += c * config.spins[k][1];
        }
        e += config.spins[i][0] * bx + config.spins[i][1] * by + couplings.field()[i] * config.spins[i][2];
    }
    e
}

/// Fixed-step RK4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt_s: f64,
}

impl IntegratorConfig {
    pub const DEFAULT_DT: f64 = 1e-3;

    pub fn new(dt_s: f64) -> Result<Self> {
        if !(dt_s > 0.0 && dt_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {dt_s} s must be positive")));
        }
        Ok(Self { dt_s })
    }

    fn steps_for(&self, interval: f64) -> Result<usize> {
        if interval <= TIME_EPS {
            return Ok(0);
        }
        let steps = libm::round(interval / self.dt_s);
        if fabs(steps * self.dt_s - interval) > TIME_EPS * interval.max(1.0) {
            return Err(Error::NonCommensurateStep {
                interval,
                dt: self.dt_s,
            });
        }
        Ok(steps as usize)
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt_s: Self::DEFAULT_DT,
        }
    }
}

/// Structure-of-arrays spins for `lanes` trajectories: component of atom
/// `j` in lane `l` sits at `j * lanes + l`.
#[derive(Debug, Clone)]
struct Lanes {
    n: usize,
    lanes: usize,
    s: [Vec<f64>; 3],
}

impl Lanes {
    fn from_configs(configs: &[SpinConfiguration]) -> Self {
        let n = configs[0].len();
        let lanes = configs.len();
        let mut s = [vec![0.0; n * lanes], vec![0.0; n * lanes], vec![0.0; n * lanes]];
        for (l, c) in configs.iter().enumerate() {
            for (j, v) in c.spins.iter().enumerate() {
                for a in 0..3 {
                    s[a][j * lanes + l] = v[a];
                }
            }
        }
        Self { n, lanes, s }
    }

    fn write_lane(&self, l: usize, out: &mut SpinConfiguration) {
        for j in 0..self.n {
            out.spins[j] = [
                self.s[0][j * self.lanes + l],
                self.s[1][j * self.lanes + l],
                self.s[2][j * self.lanes + l],
            ];
        }
    }

    fn rotate(&mut self, rot: &Rotation) {
        let [sx, sy, sz] = &mut self.s;
        for ((x, y), z) in sx.iter_mut().zip(sy.iter_mut()).zip(sz.iter_mut()) {
            let v = rot.apply([*x, *y, *z]);
            *x = v[0];
            *y = v[1];
            *z = v[2];
        }
    }
}

/// Scratch buffers for one RK4 step.
struct Rk4Scratch {
    bx: Vec<f64>,
    by: Vec<f64>,
    k: [[Vec<f64>; 3]; 4],
    tmp: [Vec<f64>; 3],
}

impl Rk4Scratch {
    fn new(len: usize) -> Self {
        let z = || vec![0.0; len];
        Self {
            bx: z(),
            by: z(),
            k: [[z(), z(), z()], [z(), z(), z()], [z(), z(), z()], [z(), z(), z()]],
            tmp: [z(), z(), z()],
        }
    }
}

/// `out = 2π B × s` for all lanes.
fn derivative(couplings: &CouplingMatrix, lanes: usize, s: &[Vec<f64>; 3], bx: &mut [f64], by: &mut [f64], out: &mut [Vec<f64>; 3]) {
    let (j, h, n) = (couplings.matrix(), couplings.field(), couplings.len());
    let (sx, sy, sz) = (&s[0], &s[1], &s[2]);
    if let Some(c) = couplings.uniform_value() {
        // all-to-all: B_i = c (S - s_i)
        for l in 0..lanes {
            let (mut tx, mut ty) = (0.0, 0.0);
            for i in 0..n {
                tx += sx[i * lanes + l];
                ty += sy[i * lanes + l];
            }
            for i in 0..n {
                let q = i * lanes + l;
                bx[q] = c * (tx - sx[q]);
                by[q] = c * (ty - sy[q]);
            }
        }
    } else {
        dense_fields(j, n, lanes, sx, sy, bx, by);
    }
    let [ox, oy, oz] = out;
    for i in 0..n {
        let hz = h[i];
        for l in 0..lanes {
            let q = i * lanes + l;
            let fx = 2.0 * bx[q];
            let fy = 2.0 * by[q];
            ox[q] = TAU * (fy * sz[q] - hz * sy[q]);
            oy[q] = TAU * (hz * sx[q] - fx * sz[q]);
            oz[q] = TAU * (fx * sy[q] - fy * sx[q]);
        }
    }
}

fn dense_fields(j: &[f64], n: usize, lanes: usize, sx: &[f64], sy: &[f64], bx: &mut [f64], by: &mut [f64]) {
    for i in 0..n {
        let row = &j[i * n..(i + 1) * n];
        let bxi = &mut bx[i * lanes..(i + 1) * lanes];
        let byi = &mut by[i * lanes..(i + 1) * lanes];
        bxi.fill(0.0);
        byi.fill(0.0);
        if lanes == 1 {
            let (mut ax, mut ay) = (0.0, 0.0);
            for ((&c, &x), &y) in row.iter().zip(sx.iter()).zip(sy.iter()) {
                ax += c * x;
                ay += c * y;
            }
            bxi[0] = ax;
            byi[0] = ay;
        } else {
            for (k, &c) in row.iter().enumerate() {
                let xs = &sx[k * lanes..(k + 1) * lanes];
                let ys = &sy[k * lanes..(k + 1) * lanes];
                for ((ax, ay), (&x, &y)) in bxi.iter_mut().zip(byi.iter_mut()).zip(xs.iter().zip(ys)) {
                    *ax += c * x;
                    *ay += c * y;
                }
            }
        }
    }
}

fn rk4_step(couplings: &CouplingMatrix, state: &mut Lanes, dt: f64, scratch: &mut Rk4Scratch) {
    let lanes = state.lanes;
    let Rk4Scratch { bx, by, k, tmp } = scratch;
    let [k1, k2, k3, k4] = k;
    derivative(couplings, lanes, &state.s, bx, by, k1);
    for a in 0..3 {
        for ((t, &s), &d) in tmp[a].iter_mut().zip(&state.s[a]).zip(&k1[a]) {
            *t = s + 0.5 * dt * d;
        }
    }
    derivative(couplings, lanes, tmp, bx, by, k2);
    for a in 0..3 {
        for ((t, &s), &d) in tmp[a].iter_mut().zip(&state.s[a]).zip(&k2[a]) {
            *t = s + 0.5 * dt * d;
        }
    }
    derivative(couplings, lanes, tmp, bx, by, k3);
    for a in 0..3 {
        for ((t, &s), &d) in tmp[a].iter_mut().zip(&state.s[a]).zip(&k3[a]) {
            *t = s + dt * d;
        }
    }
    derivative(couplings, lanes, tmp, bx, by, k4);
    // squared lengths before the step, held in the free field buffer
    for (q, r) in bx.iter_mut().enumerate() {
        *r = state.s[0][q] * state.s[0][q] + state.s[1][q] * state.s[1][q] + state.s[2][q] * state.s[2][q];
    }
    let w = dt / 6.0;
    for a in 0..3 {
        for (q, s) in state.s[a].iter_mut().enumerate() {
            *s += w * (k1[a][q] + 2.0 * k2[a][q] + 2.0 * k3[a][q] + k4[a][q]);
        }
    }
    // the flow conserves every |s_i|; project out the O(dt^5) drift
    for (q, &r0) in bx.iter().enumerate() {
        let r1 = state.s[0][q] * state.s[0][q] + state.s[1][q] * state.s[1][q] + state.s[2][q] * state.s[2][q];
        if r1 > 0.0 {
            let f = sqrt(r0 / r1);
            for a in 0..3 {
                state.s[a][q] *= f;
            }
        }
    }
}

/// States recorded during one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutput {
    /// One configuration per sample time, recorded before any pulse that
    /// coincides with that time.
    pub samples: Vec<SpinConfiguration>,
    /// State at the end of the schedule, after every pulse including those
    /// at the final time.
    pub final_state: SpinConfiguration,
}

/// Shared, read-only inputs of an evolution.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionPlan<'a> {
    pub schedule: &'a PulseSchedule,
    pub integrator: IntegratorConfig,
    pub sample_times: &'a [f64],
}

enum Stop {
    Sample,
    Event(usize),
}

/// Ordered evaluation points: samples before events at equal times.
fn timeline(plan: &EvolutionPlan<'_>) -> Result<Vec<(f64, Stop)>> {
    let duration = plan.schedule.duration();
    let mut stops: Vec<(f64, u8, usize, Stop)> = Vec::new();
    for (k, &t) in plan.sample_times.iter().enumerate() {
        if t < 0.0 || t > duration + TIME_EPS {
            return Err(Error::InvalidParameter(format!(
                "sample time {t} s outside schedule of {duration} s"
            )));
        }
        stops.push((t, 0, k, Stop::Sample));
    }
    for (k, e) in plan.schedule.events().iter().enumerate() {
        stops.push((e.time_s, 1, k, Stop::Event(k)));
    }
    stops.sort_by(|a, b| {
        // snap near-equal times together so samples lead events
        let ta = a.0;
        let tb = b.0;
        if fabs(ta - tb) < TIME_EPS {
            (a.1, a.2).cmp(&(b.1, b.2))
        } else {
            ta.total_cmp(&tb)
        }
    });
    let mut out: Vec<(f64, Stop)> = stops.into_iter().map(|(t, _, _, s)| (t, s)).collect();
    out.push((duration, Stop::Event(usize::MAX)));
    Ok(out)
}

/// Integrates trajectories that share `couplings` (static or all-to-all
/// motion). Every initial configuration must have the same atom count.
pub fn evolve_batch(initial: &[SpinConfiguration], couplings: &CouplingMatrix, plan: &EvolutionPlan<'_>) -> Result<Vec<TrajectoryOutput>> {
    if initial.is_empty() {
        return Ok(Vec::new());
    }
    let n = couplings.len();
    if let Some(bad) = initial.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    let stops = timeline(plan)?;
    let events = plan.schedule.events();
    let mut state = Lanes::from_configs(initial);
    let mut scratch = Rk4Scratch::new(n * initial.len());
    let mut samples: Vec<Vec<SpinConfiguration>> = vec![Vec::with_capacity(plan.sample_times.len()); initial.len()];
    let mut t = 0.0;
    for (time, stop) in stops {
        let steps = plan.integrator.steps_for(time - t)?;
        for _ in 0..steps {
            rk4_step(couplings, &mut state, plan.integrator.dt_s, &mut scratch);
        }
        t = if steps > 0 { time } else { t.max(time) };
        match stop {
            Stop::Sample => {
                for (l, c) in initial.iter().enumerate() {
                    let mut out = c.clone();
                    state.write_lane(l, &mut out);
                    samples[l].push(out);
                }
            }
            Stop::Event(k) if k != usize::MAX => state.rotate(&events[k].rotation()),
            Stop::Event(_) => {}
        }
    }
    Ok(initial
        .iter()
        .enumerate()
        .map(|(l, c)| {
            let mut final_state = c.clone();
            state.write_lane(l, &mut final_state);
            TrajectoryOutput {
                samples: core::mem::take(&mut samples[l]),
                final_state,
            }
        })
        .collect())
}

/// Everything needed to rebuild couplings as atoms move.
#[derive(Debug, Clone, Copy)]
pub struct CouplingEnvironment<'a> {
    pub geometry: &'a LatticeGeometry,
    pub dipolar: DipolarCouplings,
    /// Per-site longitudinal field in Hz, if any.
    pub site_field: Option<&'a [f64]>,
}

impl CouplingEnvironment<'_> {
    pub fn matrix_for(&self, atom_sites: &[usize]) -> Result<CouplingMatrix> {
        if atom_sites.len() < 2 {
            return Err(Error::TooFewAtoms {
                needed: 2,
                got: atom_sites.len(),
            });
        }
        let mut m = self.dipolar.matrix_for_sites(self.geometry, atom_sites);
        if let Some(field) = self.site_field {
            m.apply_site_field(field, atom_sites)?;
        }
        Ok(m)
    }
}

/// One trajectory with stochastic hopping after every RK4 step.
pub fn evolve_itinerant<R: Rng + ?Sized>(
    initial: &SpinConfiguration,
    env: &CouplingEnvironment<'_>,
    hopping: &crate::itinerancy::HoppingConfig,
    plan: &EvolutionPlan<'_>,
    rng: &mut R,
) -> Result<TrajectoryOutput> {
    hopping.validate()?;
    if fabs(hopping.dt_s - plan.integrator.dt_s) > TIME_EPS * plan.integrator.dt_s {
        return Err(Error::InvalidParameter(format!(
            "hopping dt {} s differs from integrator dt {} s",
            hopping.dt_s, plan.integrator.dt_s
        )));
    }
    let mut config = initial.clone();
    let mut couplings = env.matrix_for(config.atom_sites())?;
    let mut occupancy = Occupancy::new(env.geometry, config.atom_sites())?;
    let stops = timeline(plan)?;
    let events = plan.schedule.events();
    let mut state = Lanes::from_configs(core::slice::from_ref(initial));
    let mut scratch = Rk4Scratch::new(config.len());
    let mut samples = Vec::with_capacity(plan.sample_times.len());
    let mut t = 0.0;
    for (time, stop) in stops {
        let steps = plan.integrator.steps_for(time - t)?;
        for _ in 0..steps {
            rk4_step(&couplings, &mut state, plan.integrator.dt_s, &mut scratch);
            let moved = hop_step(&mut config, &mut occupancy, env.geometry, hopping, rng)?;
            if !moved.is_empty() {
                refresh_couplings(&mut couplings, env, config.atom_sites(), &moved);
            }
        }
        t = if steps > 0 { time } else { t.max(time) };
        match stop {
            Stop::Sample => {
                let mut out = config.clone();
                state.write_lane(0, &mut out);
                samples.push(out);
            }
            Stop::Event(k) if k != usize::MAX => state.rotate(&events[k].rotation()),
            Stop::Event(_) => {}
        }
    }
    state.write_lane(0, &mut config);
    Ok(TrajectoryOutput {
        samples,
        final_state: config,
    })
}

/// Trajectories of one cloud, each tagged with its RNG stream index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub sample_times: Vec<f64>,
    pub cloud_index: u32,
    pub seeds: Vec<u32>,
    pub trajectories: Vec<TrajectoryOutput>,
}

/// Inputs for running a set of trajectories on one cloud.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec<'a> {
    pub env: CouplingEnvironment<'a>,
    pub atom_sites: &'a [usize],
    pub motion: &'a MotionMode,
    pub plan: EvolutionPlan<'a>,
    /// Discrete Wigner sampling axis before the schedule's first pulse.
    pub initial_axis: Vec3,
    pub seed: u64,
    pub cloud_index: u32,
}

impl EnsembleSpec<'_> {
    /// Couplings used for static and all-to-all motion.
    pub fn shared_couplings(&self) -> Result<CouplingMatrix> {
        let m = self.env.matrix_for(self.atom_sites)?;
        Ok(match self.motion {
            MotionMode::OatLimit => oat_replacement(&m)?,
            _ => m,
        })
    }

    fn initial(&self, index: u32) -> Result<(SpinConfiguration, crate::rng::ChaCha8Rng)> {
        let mut rng = stream_rng(
            self.seed,
            Stream::Trajectory {
                cloud: self.cloud_index,
                index,
            },
        );
        let config = sample_initial(self.atom_sites, self.initial_axis, &mut rng)?;
        Ok((config, rng))
    }

    /// Runs trajectories `indices`; the result of each index depends only
    /// on `(seed, cloud_index, index)`.
    pub fn run(&self, indices: &[u32], shared: Option<&CouplingMatrix>) -> Result<TrajectoryEnsemble> {
        let trajectories = match self.motion {
            MotionMode::Stochastic(hop) => indices
                .iter()
                .map(|&i| {
                    let (config, mut rng) = self.initial(i)?;
                    evolve_itinerant(&config, &self.env, hop, &self.plan, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?,
            MotionMode::Static | MotionMode::OatLimit => {
                let owned;
                let couplings = match shared {
                    Some(m) => m,
                    None => {
                        owned = self.shared_couplings()?;
                        &owned
                    }
                };
                let initial = indices
                    .iter()
                    .map(|&i| self.initial(i).map(|(c, _)| c))
                    .collect::<Result<Vec<_>>>()?;
                evolve_batch(&initial, couplings, &self.plan)?
            }
        };
        Ok(TrajectoryEnsemble {
            sample_times: self.plan.sample_times.to_vec(),
            cloud_index: self.cloud_index,
            seeds: indices.to_vec(),
            trajectories,
        })
    }
}

/// Applies a pulse to a copy of `config`.
pub fn rotated(config: &SpinConfiguration, event: &PulseEvent) -> SpinConfiguration {
    let mut out = config.clone();
    out.rotate(&event.rotation());
    out
}

/// `sum_i s^z_i`.
pub fn total_sz(config: &SpinConfiguration) -> f64 {
    config.spins.iter().map(|s| s[2]).sum()
}

/// Largest deviation of any `|s_i|` from `reference`.
pub fn max_length_drift(config: &SpinConfiguration, reference: &SpinConfiguration) -> f64 {
    config
        .spins
        .iter()
        .zip(&reference.spins)
        .map(|(a, b)| fabs(norm(*a) - norm(*b)))
        .fold(0.0, f64::max)
}
