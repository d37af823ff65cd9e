//! Stokes and instantaneous eigenvalues of the single-excitation block, and
//! the crossing times of the Stokes branches.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::hamiltonian::{single_excitation_matrix, ThreeLevelMatrix};
use crate::pulses::PulseSchedule;

/// `(S0, S+, S-)` for detunings `delta_a`, `delta_m` and Stokes amplitude `omega_s`.
pub fn stokes_eigenvalues(delta_a: f64, delta_m: f64, omega_s: f64) -> (f64, f64, f64) {
    let mean = 0.5 * (delta_a + delta_m);
    let half_gap = 0.5 * (delta_a - delta_m).hypot(omega_s);
    (0.0, mean + half_gap, mean - half_gap)
}

/// Stokes eigenvalues along the schedule at time `t`.
pub fn stokes_at(t: f64, s: &PulseSchedule) -> (f64, f64, f64) {
    let (da, dm) = s.detunings(t);
    stokes_eigenvalues(da, dm, 2.0 * s.g_ma)
}

/// Ascending eigenvalues of a Hermitian 3x3 matrix.
pub fn hermitian_eigenvalues(m: &ThreeLevelMatrix) -> [f64; 3] {
    let d = DMatrix::from_fn(3, 3, |i, j| m[(i, j)]);
    let mut e: Vec<f64> = d.symmetric_eigenvalues().iter().cloned().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    [e[0], e[1], e[2]]
}

/// Ascending eigenvalues of the single-excitation block at `t`.
pub fn instantaneous_eigenvalues(t: f64, s: &PulseSchedule) -> [f64; 3] {
    hermitian_eigenvalues(&single_excitation_matrix(t, s))
}

/// Eigenvalue branches on a time grid, ordered by continuity.
#[derive(Clone, Debug, Serialize)]
pub struct EigenTrace {
    pub times: Vec<f64>,
    /// `(S0, S+, S-)` per time.
    pub stokes: Vec<[f64; 3]>,
    /// Instantaneous branches per time, following each branch continuously.
    pub instantaneous: Vec<[f64; 3]>,
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Assign `new` values to branches so the summed distance to `predicted` is minimal.
fn match_branches(predicted: &[f64; 3], new: &[f64; 3]) -> [f64; 3] {
    let mut best = PERMUTATIONS[0];
    let mut best_cost = f64::INFINITY;
    for p in PERMUTATIONS {
        let cost: f64 = (0..3).map(|k| (new[p[k]] - predicted[k]).abs()).sum();
        if cost < best_cost {
            best_cost = cost;
            best = p;
        }
    }
    [new[best[0]], new[best[1]], new[best[2]]]
}

impl EigenTrace {
    pub fn compute(s: &PulseSchedule, times: &[f64]) -> Self {
        let stokes: Vec<[f64; 3]> = times
            .iter()
            .map(|&t| {
                let (s0, sp, sm) = stokes_at(t, s);
                [s0, sp, sm]
            })
            .collect();
        let mut instantaneous: Vec<[f64; 3]> = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            let e = instantaneous_eigenvalues(t, s);
            let ordered = match k {
                0 => e,
                1 => match_branches(&instantaneous[0], &e),
                _ => {
                    let (p1, p2) = (instantaneous[k - 1], instantaneous[k - 2]);
                    let (h1, h2) = (t - times[k - 1], times[k - 1] - times[k - 2]);
                    let r = if h2 > 0.0 { h1 / h2 } else { 0.0 };
                    let pred = [0, 1, 2].map(|j| p1[j] + r * (p1[j] - p2[j]));
                    match_branches(&pred, &e)
                }
            };
            instantaneous.push(ordered);
        }
        EigenTrace { times: times.to_vec(), stokes, instantaneous }
    }

    /// Uniform grid of `n` points on `[t0, t1]`.
    pub fn on_grid(s: &PulseSchedule, t0: f64, t1: f64, n: usize) -> Self {
        let times = linspace(t0, t1, n);
        Self::compute(s, &times)
    }

    /// Grid on `[t0, t1]` fine enough that the largest eigenvalue change per
    /// step stays below a quarter of the smallest branch gap.
    pub fn adaptive(s: &PulseSchedule, t0: f64, t1: f64) -> Self {
        let coarse = Self::on_grid(s, t0, t1, 2001);
        let gap = coarse.min_gap().max(1e-12);
        let slope = max_slope(s);
        let n = if slope > 0.0 {
            let step = 0.25 * gap / slope;
            (((t1 - t0) / step).ceil() as usize + 1).clamp(2001, 2_000_000)
        } else {
            2001
        };
        Self::on_grid(s, t0, t1, n)
    }

    /// Smallest spacing between adjacent sorted instantaneous eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.instantaneous
            .iter()
            .map(|e| {
                let mut v = *e;
                v.sort_by(|a, b| a.total_cmp(b));
                (v[1] - v[0]).min(v[2] - v[1])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Upper bound on `|d lambda / dt|` for every branch.
fn max_slope(s: &PulseSchedule) -> f64 {
    let ramp = s.kappa_delta.abs().max((s.kappa_delta - 1.0).abs()) * s.h_delta.abs() * s.omega0 / s.tau_ch;
    // d Omega_p / dt is bounded by Omega_0 sqrt(2/e) / T per pulse
    let pump = s.omega0 * (2.0 / std::f64::consts::E).sqrt() / s.width;
    ramp + pump
}

pub(crate) fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect(),
    }
}

const CROSSING_SCAN_POINTS: usize = 20_000;

/// Times in `window` where `S+` or `S-` crosses `S0 = 0`, sorted.
///
/// Scans a uniform grid for sign changes and refines each bracket by
/// bisection to `1e-8` of the window length.
pub fn find_crossings(s: &PulseSchedule, window: (f64, f64)) -> Vec<f64> {
    let (t0, t1) = window;
    let tol = 1e-8 * (t1 - t0).abs();
    let branch = |t: f64, which: usize| {
        let (_, sp, sm) = stokes_at(t, s);
        if which == 0 {
            sp
        } else {
            sm
        }
    };
    let grid = linspace(t0, t1, CROSSING_SCAN_POINTS);
    let mut out = Vec::new();
    for which in 0..2 {
        let mut prev = branch(grid[0], which);
        for w in grid.windows(2) {
            let cur = branch(w[1], which);
            if prev == 0.0 {
                out.push(w[0]);
            } else if prev * cur < 0.0 {
                let (mut lo, mut hi, mut flo) = (w[0], w[1], prev);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    let fm = branch(mid, which);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if fm * flo < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            prev = cur;
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out
}
