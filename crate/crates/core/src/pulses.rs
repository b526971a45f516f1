//! Instantaneous global rotations and the pulse schedules built from them.
//!
//! A pulse with phase `phi` and angle `theta` rotates every spin by `theta`
//! (right-hand rule) about the equatorial axis `(cos phi, sin phi, 0)`.
//! Phase 0 is `+X`, `pi/2` is `+Y`, `pi` is `-X`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::dtwa::SpinConfiguration;
use crate::math::{cos, fabs, sin, Vec3};
use crate::{Error, Result};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEvent {
    pub time_s: f64,
    pub phase: f64,
    pub angle: f64,
}

impl PulseEvent {
    pub fn new(time_s: f64, phase: f64, angle: f64) -> Self {
        Self {
            time_s,
            phase,
            angle,
        }
    }

    pub fn rotation(&self) -> Rotation {
        Rotation::about_equator(self.phase, self.angle)
    }
}

/// Rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    /// Rodrigues rotation by `angle` about `(cos phase, sin phase, 0)`.
    pub fn about_equator(phase: f64, angle: f64) -> Self {
        let (nx, ny) = (cos(phase), sin(phase));
        let c = cos(angle);
        let s = sin(angle);
        let t = 1.0 - c;
        Rotation([
            [c + t * nx * nx, t * nx * ny, s * ny],
            [t * nx * ny, c + t * ny * ny, -s * nx],
            [-s * ny, s * nx, c],
        ])
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

/// Rotates every spin in place.
pub fn apply_rotation(spins: &mut SpinConfiguration, phase: f64, angle: f64) {
    let rot = Rotation::about_equator(phase, angle);
    for s in spins.spins_mut() {
        *s = rot.apply(*s);
    }
}

/// Time-ordered pulse events over `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    events: Vec<PulseEvent>,
    duration_s: f64,
}

impl PulseSchedule {
    /// Events must be non-decreasing in time and fall inside `[0, duration]`.
    /// Coincident events are applied in the order given.
    pub fn new(events: Vec<PulseEvent>, duration_s: f64) -> Result<Self> {
        if !(duration_s >= 0.0 && duration_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("schedule duration {duration_s}")));
        }
        for (k, e) in events.iter().enumerate() {
            if e.time_s < 0.0 || e.time_s > duration_s + TIME_EPS {
                return Err(Error::InvalidParameter(format!("pulse at {} s outside schedule", e.time_s)));
            }
            if k > 0 && e.time_s < events[k - 1].time_s {
                return Err(Error::InvalidParameter("pulse events out of order".into()));
            }
        }
        Ok(Self { events, duration_s })
    }

    /// Free evolution with no pulses.
    pub fn free(duration_s: f64) -> Result<Self> {
        Self::new(Vec::new(), duration_s)
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration_s
    }

    /// Copy with every event at or after `time_s` removed and the duration
    /// cut to `time_s`.
    pub fn truncated(&self, time_s: f64) -> Self {
        Self {
            events: self
                .events
                .iter()
                .filter(|e| e.time_s < time_s - TIME_EPS)
                .copied()
                .collect(),
            duration_s: time_s,
        }
    }
}

/// Echo pulse times `k * period` strictly inside `(0, tau)`.
fn echo_times(tau: f64, period: f64) -> impl Iterator<Item = (usize, f64)> {
    (1..)
        .map(move |k| (k, k as f64 * period))
        .take_while(move |(_, t)| *t < tau - TIME_EPS)
}

/// Odd echoes about `+X`, even echoes about `-X`.
fn echo_phase(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        PI
    }
}

/// Prep pulse `pi/2` about `+X` at t = 0, alternating `+X/-X` spin-echo `pi`
/// pulses every `echo_period` strictly inside `(0, tau)`, readout rotation
/// at `tau`.
pub fn ramsey_schedule(tau: f64, echo_period: f64, readout_angle: f64, readout_phase: f64) -> Result<PulseSchedule> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} s")));
    }
    if !(echo_period > 0.0) {
        return Err(Error::InvalidParameter(format!("echo period {echo_period} s")));
    }
    let mut events = Vec::new();
    events.push(PulseEvent::new(0.0, 0.0, FRAC_PI_2));
    for (k, t) in echo_times(tau, echo_period) {
        events.push(PulseEvent::new(t, echo_phase(k), PI));
    }
    events.push(PulseEvent::new(tau, readout_phase, readout_angle));
    PulseSchedule::new(events, tau)
}

/// Same prep and echo train as [`ramsey_schedule`] without a readout pulse;
/// used when many readout rotations are applied to one evolved state.
pub fn echo_train(tau: f64, echo_period: f64) -> Result<PulseSchedule> {
    let mut s = ramsey_schedule(tau, echo_period, 0.0, 0.0)?;
    s.events.pop();
    Ok(s)
}

/// Only the alternating echo pulses strictly inside `(0, tau)`, for states
/// sampled directly along the prepared axis.
pub fn echo_pulses(tau: f64, echo_period: f64) -> Result<PulseSchedule> {
    let mut s = echo_train(tau, echo_period)?;
    s.events.remove(0);
    Ok(s)
}

/// WAHUHA frames with a pair of echo pulses per block.
///
/// A block of length `T = block_period` holds two WAHUHA frames of length
/// `6 tau' = T/2`, each with `pi/2` pulses about `X, -Y, Y, -X` at
/// `tau', 2 tau', 4 tau', 5 tau'` into the frame. A `pi` pulse about `+X`
/// sits at the block centre and one about `-X` closes the block. Only whole
/// blocks that end at or before `tau` are emitted. Prep (`pi/2` about `+X`)
/// at t = 0, readout at `tau`.
pub fn wahuha_echo_schedule(tau: f64, block_period: f64, readout_angle: f64, readout_phase: f64) -> Result<PulseSchedule> {
    if !(block_period > 0.0 && block_period.is_finite()) {
        return Err(Error::InvalidParameter(format!("block period {block_period} s must be positive")));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidParameter(format!("tau = {tau} s")));
    }
    let frame = block_period / 2.0;
    let tick = frame / 6.0;
    let wahuha = [(1.0, 0.0), (2.0, -FRAC_PI_2), (4.0, FRAC_PI_2), (5.0, PI)];
    let mut events = Vec::new();
    events.push(PulseEvent::new(0.0, 0.0, FRAC_PI_2));
    let mut start = 0.0;
    while start + block_period <= tau + TIME_EPS {
        for half in 0..2 {
            let frame_start = start + half as f64 * frame;
            for &(ticks, phase) in &wahuha {
                events.push(PulseEvent::new(frame_start + ticks * tick, phase, FRAC_PI_2));
            }
            let echo_at = frame_start + frame;
            events.push(PulseEvent::new(echo_at, if half == 0 { 0.0 } else { PI }, PI));
        }
        start += block_period;
    }
    events.push(PulseEvent::new(tau, readout_phase, readout_angle));
    // last echo of a block ending exactly at tau precedes the readout
    if let Some(last) = events.iter_mut().rev().nth(1) {
        if fabs(last.time_s - tau) < TIME_EPS {
            last.time_s = tau;
        }
    }
    PulseSchedule::new(events, tau)
}
