//! Time evolution: unitary, Lindblad and second-moment solvers.
//!
//! All three integrate in the frame that removes the detuning terms,
//! `R(t) = exp(i theta_a a'a + i theta_m m'm)` with `theta_x` the exact
//! integral of `delta_x`. Only the couplings remain, carrying the phases
//!
//! ```text
//! g e^{i(theta_m - theta_a)} m'a,  G e^{i theta_m} m'b,  G e^{2it + i theta_m} m'b'
//! ```
//!
//! plus Hermitian conjugates. Reported cavity states and fidelities are
//! rotated back, so results refer to the frame in which the Hamiltonian is
//! written with explicit detunings.

mod channel;
mod lindblad;
mod moments;
mod recorder;
mod schrodinger;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::ode::{Options, Stats};
use crate::pulses::PulseSchedule;
use crate::scenario::{InitialState, Scenario, SolverKind};
use crate::states::StateSpec;
use crate::C64;

pub use channel::phase_insensitive_channel;
pub use lindblad::evolve_lindblad;
pub use moments::{evolve_moments, MomentState};
pub use schrodinger::evolve_schrodinger;

/// Coupling coefficients in the detuning frame at one time.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FrameCouplings {
    /// Coefficient of `m'a`.
    pub ma: C64,
    /// Coefficient of `m'b`.
    pub mb: C64,
    /// Coefficient of `m'b'` (zero under the rotating-wave approximation).
    pub cr: C64,
}

pub(crate) fn frame_couplings(s: &PulseSchedule, t0: f64, t: f64, rwa: bool) -> FrameCouplings {
    let (theta_a, theta_m) = s.detuning_phases(t0, t);
    let g = s.g_mb(t);
    let ma = C64::from_polar(s.g_ma, theta_m - theta_a);
    let mb = C64::from_polar(g, theta_m);
    let cr = if rwa { C64::new(0.0, 0.0) } else { C64::from_polar(g, 2.0 * t + theta_m) };
    FrameCouplings { ma, mb, cr }
}

/// Cavity density matrix marked at a notable time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub t: f64,
    pub rho_a: DMatrix<C64>,
}

/// Best fidelity after the retrieval pulse center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Retrieval {
    pub t: f64,
    pub fidelity: f64,
}

/// Final state, rotated back out of the detuning frame.
#[derive(Clone, Debug, PartialEq)]
pub enum FinalState {
    Pure(Vec<C64>),
    Density(DensityMatrix),
    Moments(MomentState),
}

/// Run health: integrator statistics and monitor results.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub solver: SolverKind,
    pub stats: Stats,
    pub wall_seconds: f64,
    /// Largest `|Tr rho - 1|` (or `|<psi|psi> - 1|`) at the output times.
    pub max_trace_error: f64,
    /// Largest top-level population per mode.
    pub max_top_level: [f64; 3],
    pub truncation_flagged: bool,
    /// Smallest eigenvalue of the reduced cavity matrix at the output times.
    pub min_eigenvalue_cavity: f64,
    /// Smallest eigenvalue of the final full density matrix.
    pub min_eigenvalue_final: Option<f64>,
    pub positivity_flagged: bool,
}

/// Positivity threshold on the smallest eigenvalue.
pub const POSITIVITY_THRESHOLD: f64 = -1e-6;

/// Observables on the output grid plus marked cavity states.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n_a: Vec<f64>,
    pub n_m: Vec<f64>,
    pub n_b: Vec<f64>,
    /// Fidelity against the initial cavity state; NaN without a reference.
    pub fidelity: Vec<f64>,
    /// `Tr rho`, or the squared norm of a pure state.
    pub trace: Vec<f64>,
    /// Population of states with an odd total number of quanta.
    pub odd_population: Vec<f64>,
    pub top_levels: Vec<[f64; 3]>,
    pub retrieval: Option<Retrieval>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: FinalState,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `N_a + N_m + N_b` at every output time.
    pub fn total_excitation(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.n_a[k] + self.n_m[k] + self.n_b[k]).collect()
    }

    /// Index of the output time closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &tk) in self.times.iter().enumerate() {
            if (tk - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    pub fn snapshot(&self, label: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.label == label)
    }
}

/// Segment boundaries: pulse centers, their flanks, the retrieval window start and the end.
pub(crate) fn stops(sc: &Scenario) -> Vec<f64> {
    let s = &sc.schedule;
    let (t0, t1) = (sc.grid.t_start, sc.grid.t_end);
    let tr = s.retrieval_center();
    let mut v: Vec<f64> = [s.t_c1 - 3.0 * s.width, s.t_c1, s.t_c1 + 3.0 * s.width, tr - 3.0 * s.width, tr, tr + 3.0 * s.width]
        .into_iter()
        .filter(|&x| x > t0 && x < t1)
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.push(t1);
    v
}

pub(crate) fn options(sc: &Scenario) -> Options {
    Options { tol: sc.tol, ..Options::default() }
}

/// Initial state vector on the scenario's Fock space.
pub fn initial_pure_state(sc: &Scenario) -> Result<Vec<C64>> {
    let space = sc.space()?;
    match sc.initial_state {
        InitialState::Fock { n_a, n_m, n_b } => space.basis_state([n_a, n_m, n_b]),
        _ => {
            let spec = sc.initial_state.cavity_spec().expect("cavity state");
            let a = spec.amplitudes(sc.cutoffs[0], sc.truncation_limit)?;
            let vac = |n: usize| {
                let mut v = vec![C64::new(0.0, 0.0); n];
                v[0] = C64::new(1.0, 0.0);
                v
            };
            space.product_state(&a, &vac(sc.cutoffs[1]), &vac(sc.cutoffs[2]))
        }
    }
}

/// Initial moments, from closed forms of the input state.
pub fn initial_moments(sc: &Scenario) -> Result<MomentState> {
    let mut m = MomentState::vacuum();
    match sc.initial_state {
        InitialState::Fock { n_a, n_m, n_b } => {
            m.second[0][0] = C64::new(n_a as f64, 0.0);
            m.second[1][1] = C64::new(n_m as f64, 0.0);
            m.second[2][2] = C64::new(n_b as f64, 0.0);
        }
        InitialState::Coherent { alpha } => {
            m.second[0][0] = C64::new(alpha * alpha, 0.0);
            m.first[0] = C64::new(alpha, 0.0);
        }
        InitialState::Cat { alpha } => {
            let x = alpha * alpha;
            m.second[0][0] = C64::new(x * x.tanh(), 0.0);
        }
        InitialState::Squeezed { r } => {
            m.second[0][0] = C64::new(r.sinh().powi(2), 0.0);
        }
    }
    Ok(m)
}

/// Run the scenario's solver from its initial state.
pub fn run(sc: &Scenario) -> Result<Trajectory> {
    match sc.solver {
        SolverKind::Schrodinger => evolve_schrodinger(&initial_pure_state(sc)?, sc),
        SolverKind::Lindblad => evolve_lindblad(&DensityMatrix::from_pure(&initial_pure_state(sc)?), sc),
        SolverKind::Moments => evolve_moments(&initial_moments(sc)?, sc),
    }
}

/// Cavity reference for the moment solver: coherent amplitude, if any.
pub(crate) fn coherent_reference(sc: &Scenario) -> Option<f64> {
    match sc.initial_state.cavity_spec()? {
        StateSpec::Coherent { alpha_re, alpha_im } if alpha_im == 0.0 => Some(alpha_re),
        StateSpec::Fock { n: 0 } => Some(0.0),
        _ => None,
    }
}

pub(crate) fn check_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::invalid(what, format!("has dimension {got}, the Fock space needs {expected}")));
    }
    Ok(())
}

pub(crate) fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}
