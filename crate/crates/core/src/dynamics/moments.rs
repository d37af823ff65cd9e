//! Closed first- and second-moment equations of the rotating-wave dynamics.
//!
//! With `H = sum h_kl x_k' x_l` over `x = (a, m, b)`, the moments
//! `C_kl = <x_k' x_l>` and `v_k = <x_k>` obey
//!
//! ```text
//! dC/dt = i [h^T, C] - {K, C} + diag(kappa n)
//! dv/dt = -i h v - K v,      K = diag(kappa) / 2
//! ```
//!
//! so occupations relax at `kappa` towards `n`. The cavity stays a displaced
//! thermal state when it starts coherent, which gives the fidelity against a
//! coherent reference in closed form.
//!
//! Alongside the moments themselves the solver carries the response of `<a>`
//! to a unit input amplitude and the moments grown from zero by the baths.
//! These fix the cavity's Gaussian channel, which yields the reduced cavity
//! state for any input (see [`super::channel`]).

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::channel::phase_insensitive_channel;
use super::recorder::{Readout, Recorder, Sample};
use super::{coherent_reference, elapsed, frame_couplings, options, stops, Diagnostics, FinalState, Trajectory};
use crate::error::{Error, Result};
use crate::ode::{integrate_steps, OdeSystem, Projection};
use crate::pulses::PulseSchedule;
use crate::scenario::{Scenario, SolverKind};
use crate::states::{fidelity, projector};
use crate::C64;

/// Moments over `(a, m, b)`: `second[k][l] = <x_k' x_l>`, `first[k] = <x_k>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub second: [[C64; 3]; 3],
    pub first: [C64; 3],
}

const LEN: usize = 12;
/// Integrated layout: moments, then the gain vector, then the bath-driven second moments.
const GAIN: usize = 12;
const NOISE: usize = 15;
const EXT: usize = 24;

impl MomentState {
    pub fn vacuum() -> Self {
        let z = C64::new(0.0, 0.0);
        MomentState { second: [[z; 3]; 3], first: [z; 3] }
    }

    pub fn occupations(&self) -> [f64; 3] {
        [self.second[0][0].re, self.second[1][1].re, self.second[2][2].re]
    }

    /// `<a'm>`, `<a'b>`, `<m'b>`.
    pub fn coherences(&self) -> [C64; 3] {
        [self.second[0][1], self.second[0][2], self.second[1][2]]
    }

    /// Largest `|<x'y>|^2 - <x'x><y'y>` over pairs; non-positive for physical moments.
    pub fn cauchy_schwarz_excess(&self) -> f64 {
        let n = self.occupations();
        let mut worst = f64::NEG_INFINITY;
        for k in 0..3 {
            for l in (k + 1)..3 {
                worst = worst.max(self.second[k][l].norm_sqr() - n[k] * n[l]);
            }
        }
        worst
    }

    fn to_vec(self) -> Vec<C64> {
        let mut v = Vec::with_capacity(LEN);
        for row in &self.second {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.first);
        v
    }

    fn from_slice(y: &[C64]) -> Self {
        let mut m = MomentState::vacuum();
        for k in 0..3 {
            for l in 0..3 {
                m.second[k][l] = y[3 * k + l];
            }
            m.first[k] = y[9 + k];
        }
        m
    }

    /// Rotate out of the detuning frame given `(theta_a, theta_m, 0)`.
    fn rotated(&self, theta: [f64; 3]) -> Self {
        let mut m = *self;
        for k in 0..3 {
            for l in 0..3 {
                m.second[k][l] *= C64::from_polar(1.0, theta[k] - theta[l]);
            }
            m.first[k] *= C64::from_polar(1.0, -theta[k]);
        }
        m
    }
}

/// Single-particle Hamiltonian in the detuning frame.
fn frame_matrix(s: &PulseSchedule, t0: f64, t: f64) -> [[C64; 3]; 3] {
    let c = frame_couplings(s, t0, t, true);
    let z = C64::new(0.0, 0.0);
    [[z, c.ma.conj(), z], [c.ma, z, c.mb], [z, c.mb.conj(), z]]
}

struct Moments {
    schedule: PulseSchedule,
    t0: f64,
    kappa: [f64; 3],
    source: [f64; 3],
}

impl OdeSystem for Moments {
    fn dim(&self) -> usize {
        EXT
    }

    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let h = frame_matrix(&self.schedule, self.t0, t);
        let i = C64::new(0.0, 1.0);
        for c0 in [0, NOISE] {
            for k in 0..3 {
                for l in 0..3 {
                    let mut acc = C64::new(0.0, 0.0);
                    for p in 0..3 {
                        // (h^T C - C h^T)_kl
                        acc += h[p][k] * y[c0 + 3 * p + l] - y[c0 + 3 * k + p] * h[l][p];
                    }
                    let mut d = i * acc - y[c0 + 3 * k + l] * (0.5 * (self.kappa[k] + self.kappa[l]));
                    if k == l {
                        d += self.source[k];
                    }
                    dy[c0 + 3 * k + l] = d;
                }
            }
        }
        for v0 in [9, GAIN] {
            for k in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..3 {
                    acc += h[k][p] * y[v0 + p];
                }
                dy[v0 + k] = -i * acc - y[v0 + k] * (0.5 * self.kappa[k]);
            }
        }
    }
}

struct MomentReadout {
    schedule: PulseSchedule,
    t0: f64,
    alpha: Option<f64>,
    /// Cavity input state, when magnon and phonon start in vacuum.
    input: Option<DMatrix<C64>>,
}

impl Projection for MomentReadout {
    fn len(&self) -> usize {
        EXT
    }
    fn project(&self, y: &[C64], out: &mut [C64]) {
        out.copy_from_slice(y);
    }
}

impl Readout for MomentReadout {
    fn sample(&self, p: &[C64]) -> Sample {
        Sample { n: [p[0].re, p[4].re, p[8].re], trace: 1.0, odd: f64::NAN, top: [0.0; 3] }
    }

    fn cavity(&self, t: f64, p: &[C64]) -> Option<DMatrix<C64>> {
        let input = self.input.as_ref()?;
        let theta_a = self.schedule.detuning_phases(self.t0, t).0;
        let u = p[GAIN] * C64::from_polar(1.0, -theta_a);
        Some(phase_insensitive_channel(input, u, p[NOISE].re))
    }

    fn fidelity(&self, t: f64, p: &[C64], reference: &[C64]) -> Option<f64> {
        match self.alpha {
            Some(alpha) => {
                let theta_a = self.schedule.detuning_phases(self.t0, t).0;
                let mu = p[9] * C64::from_polar(1.0, -theta_a);
                Some(gaussian_fidelity(C64::new(alpha, 0.0), mu, p[0].re - mu.norm_sqr()))
            }
            None => self.cavity(t, p).map(|rho| fidelity(&rho, reference)),
        }
    }
}

/// Fidelity of a displaced thermal state (mean `mu`, `n` thermal quanta)
/// against the coherent state `|alpha>`.
pub fn gaussian_fidelity(alpha: C64, mu: C64, n: f64) -> f64 {
    let n = n.max(0.0);
    let overlap = (-(alpha - mu).norm_sqr() / (1.0 + n)).exp() / (1.0 + n);
    overlap.clamp(0.0, 1.0).sqrt()
}

/// Integrate the moment equations from `m0` (lab frame at `t_start`).
pub fn evolve_moments(m0: &MomentState, sc: &Scenario) -> Result<Trajectory> {
    let start = Instant::now();
    if !sc.rwa {
        return Err(Error::invalid("rwa", "the moment equations need the rotating-wave approximation"));
    }
    let n0 = m0.occupations();
    if n0.iter().any(|&n| !(n >= 0.0)) {
        return Err(Error::invalid("m0", "occupations must be non-negative"));
    }
    let t0 = sc.grid.t_start;
    let kappa = sc.kappas();
    let nbar = sc.bath()?.as_array();
    let mut sys = Moments { schedule: sc.schedule, t0, kappa, source: [0, 1, 2].map(|k| kappa[k] * nbar[k]) };
    let alpha = coherent_reference(sc);
    let reference = sc.reference()?;
    let input = reference.as_deref().map(projector);
    let readout = MomentReadout { schedule: sc.schedule, t0, alpha, input };
    let mut rec = Recorder::new(&readout, sc, reference);
    let mut y0 = m0.to_vec();
    y0.extend_from_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    y0.resize(EXT, C64::new(0.0, 0.0));
    rec.start(t0, &y0);
    let (y, stats) = integrate_steps(&mut sys, &readout, t0, &y0, &stops(sc), options(sc), &mut rec)?;
    let t_end = sc.grid.t_end;
    rec.finish(t_end, &y);
    let (theta_a, theta_m) = sc.schedule.detuning_phases(t0, t_end);
    let fin = MomentState::from_slice(&y[..LEN]).rotated([theta_a, theta_m, 0.0]);
    let min_cavity = if rec.min_eigenvalue_cavity.is_finite() { rec.min_eigenvalue_cavity } else { f64::NAN };
    let diagnostics = Diagnostics {
        solver: SolverKind::Moments,
        stats,
        wall_seconds: elapsed(start),
        max_trace_error: 0.0,
        max_top_level: [0.0; 3],
        truncation_flagged: false,
        min_eigenvalue_cavity: min_cavity,
        min_eigenvalue_final: None,
        positivity_flagged: min_cavity < super::POSITIVITY_THRESHOLD,
    };
    let [n_a, n_m, n_b] = rec.n;
    Ok(Trajectory {
        times: rec.out_times,
        n_a,
        n_m,
        n_b,
        fidelity: rec.fidelity,
        trace: rec.trace,
        odd_population: rec.odd,
        top_levels: rec.top,
        retrieval: rec.best,
        snapshots: rec.snapshots,
        final_state: FinalState::Moments(fin),
        diagnostics,
    })
}
