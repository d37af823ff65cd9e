//! Unitary evolution of a pure state.

use std::time::Instant;

use nalgebra::DMatrix;

use super::recorder::{Readout, Recorder, Sample};
use super::{check_dim, elapsed, frame_couplings, options, stops, Diagnostics, FinalState, Trajectory};
use crate::error::{Error, Result};
use crate::fock::{FockSpace, Mode};
use crate::ode::{integrate_steps, OdeSystem, Projection};
use crate::pulses::PulseSchedule;
use crate::scenario::{InitialState, Scenario, SolverKind};
use crate::C64;

/// Nonzero matrix elements `(row, col, value)` of one coupling operator.
pub(super) type Entries = Vec<(usize, usize, f64)>;

/// Matrix elements of `m'a`, `m'b` and `m'b'` on a truncated space.
pub(super) struct Ladder {
    pub ma: Entries,
    pub mb: Entries,
    pub cr: Entries,
    /// Per basis index: `(n_a, n_m, n_b)`.
    pub levels: Vec<[usize; 3]>,
}

impl Ladder {
    pub fn new(space: &FockSpace) -> Self {
        let [_, nm, nb] = space.cutoffs;
        let (sa, sm) = (space.stride(Mode::Cavity), space.stride(Mode::Magnon));
        let mut ma = Vec::new();
        let mut mb = Vec::new();
        let mut cr = Vec::new();
        let levels: Vec<[usize; 3]> = (0..space.dim()).map(|j| space.levels(j)).collect();
        for (j, &[a, m, b]) in levels.iter().enumerate() {
            if m + 1 >= nm {
                continue;
            }
            let up_m = ((m + 1) as f64).sqrt();
            if a >= 1 {
                ma.push((j - sa + sm, j, (a as f64).sqrt() * up_m));
            }
            if b >= 1 {
                mb.push((j - 1 + sm, j, (b as f64).sqrt() * up_m));
            }
            if b + 1 < nb {
                cr.push((j + sm + 1, j, ((b + 1) as f64).sqrt() * up_m));
            }
        }
        Ladder { ma, mb, cr, levels }
    }

    /// `out[row] += c * v * x[col]` and the conjugate term for every entry.
    #[inline]
    pub fn apply_hermitian(entries: &Entries, c: C64, x: &[C64], out: &mut [C64]) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        let cc = c.conj();
        for &(i, j, v) in entries {
            out[i] += c * v * x[j];
            out[j] += cc * v * x[i];
        }
    }
}

struct Schrodinger {
    ladder: Ladder,
    schedule: PulseSchedule,
    t0: f64,
    rwa: bool,
}

impl OdeSystem for Schrodinger {
    fn dim(&self) -> usize {
        self.ladder.levels.len()
    }

    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let c = frame_couplings(&self.schedule, self.t0, t, self.rwa);
        dy.fill(C64::new(0.0, 0.0));
        // dy = -i H y
        let mi = C64::new(0.0, -1.0);
        Ladder::apply_hermitian(&self.ladder.ma, c.ma, y, dy);
        Ladder::apply_hermitian(&self.ladder.mb, c.mb, y, dy);
        Ladder::apply_hermitian(&self.ladder.cr, c.cr, y, dy);
        for v in dy.iter_mut() {
            *v *= mi;
        }
    }
}

struct PureReadout {
    levels: Vec<[usize; 3]>,
    cutoffs: [usize; 3],
    schedule: PulseSchedule,
    t0: f64,
}

impl Projection for PureReadout {
    fn len(&self) -> usize {
        self.levels.len()
    }
    fn project(&self, y: &[C64], out: &mut [C64]) {
        out.copy_from_slice(y);
    }
}

impl Readout for PureReadout {
    fn sample(&self, p: &[C64]) -> Sample {
        let mut s = Sample { n: [0.0; 3], trace: 0.0, odd: 0.0, top: [0.0; 3] };
        for (amp, lv) in p.iter().zip(&self.levels) {
            let w = amp.norm_sqr();
            s.trace += w;
            for k in 0..3 {
                s.n[k] += lv[k] as f64 * w;
                if lv[k] + 1 == self.cutoffs[k] {
                    s.top[k] += w;
                }
            }
            if (lv[0] + lv[1] + lv[2]) % 2 == 1 {
                s.odd += w;
            }
        }
        s
    }

    fn cavity(&self, t: f64, p: &[C64]) -> Option<DMatrix<C64>> {
        let na = self.cutoffs[0];
        let rest = self.cutoffs[1] * self.cutoffs[2];
        let theta_a = self.schedule.detuning_phases(self.t0, t).0;
        let mut rho = DMatrix::zeros(na, na);
        for n in 0..na {
            for k in 0..=n {
                let mut acc = C64::new(0.0, 0.0);
                for u in 0..rest {
                    acc += p[n * rest + u] * p[k * rest + u].conj();
                }
                let v = acc * C64::from_polar(1.0, -theta_a * (n as f64 - k as f64));
                rho[(n, k)] = v;
                rho[(k, n)] = v.conj();
            }
        }
        Some(rho)
    }
}

/// Unitary evolution of `psi0` (lab-frame amplitudes at `t_start`).
/// Under RWA the total excitation number is conserved, so a Fock input with
/// `N` quanta never leaves cutoffs that all exceed `N`.
fn conserves_within_cutoffs(sc: &Scenario) -> bool {
    match sc.initial_state {
        InitialState::Fock { n_a, n_m, n_b } if sc.rwa => sc.cutoffs.iter().all(|&c| c > n_a + n_m + n_b),
        _ => false,
    }
}

pub fn evolve_schrodinger(psi0: &[C64], sc: &Scenario) -> Result<Trajectory> {
    let start = Instant::now();
    let space = sc.space()?;
    check_dim(space.dim(), psi0.len(), "psi0")?;
    let norm: f64 = psi0.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("psi0", format!("norm {norm} differs from 1")));
    }
    let t0 = sc.grid.t_start;
    let mut sys = Schrodinger { ladder: Ladder::new(&space), schedule: sc.schedule, t0, rwa: sc.rwa };
    let readout = PureReadout { levels: sys.ladder.levels.clone(), cutoffs: space.cutoffs, schedule: sc.schedule, t0 };
    let mut rec = Recorder::new(&readout, sc, sc.reference()?);
    rec.start(t0, psi0);
    let (y, stats) = integrate_steps(&mut sys, &readout, t0, psi0, &stops(sc), options(sc), &mut rec)?;
    let t_end = sc.grid.t_end;
    rec.finish(t_end, &y);

    let (theta_a, theta_m) = sc.schedule.detuning_phases(t0, t_end);
    let psi: Vec<C64> = y
        .iter()
        .zip(&readout.levels)
        .map(|(c, lv)| c * C64::from_polar(1.0, -(theta_a * lv[0] as f64 + theta_m * lv[1] as f64)))
        .collect();
    let diagnostics = Diagnostics {
        solver: SolverKind::Schrodinger,
        stats,
        wall_seconds: elapsed(start),
        max_trace_error: rec.max_trace_error(),
        max_top_level: rec.max_top(),
        truncation_flagged: rec.truncation_flagged() && !conserves_within_cutoffs(sc),
        min_eigenvalue_cavity: rec.min_eigenvalue_cavity,
        min_eigenvalue_final: None,
        positivity_flagged: rec.min_eigenvalue_cavity < super::POSITIVITY_THRESHOLD,
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
        final_state: FinalState::Pure(psi),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{mode_operator, OpKind};
    use crate::hamiltonian::build_hamiltonian;

    #[test]
    fn ladder_matches_operator_products() {
        let space = FockSpace::new(3, 3, 4).unwrap();
        let lad = Ladder::new(&space);
        let op = |m, k| mode_operator(&space, m, k);
        let ma = op(Mode::Magnon, OpKind::Raise).matmul(&op(Mode::Cavity, OpKind::Lower));
        let mb = op(Mode::Magnon, OpKind::Raise).matmul(&op(Mode::Phonon, OpKind::Lower));
        let cr = op(Mode::Magnon, OpKind::Raise).matmul(&op(Mode::Phonon, OpKind::Raise));
        for (entries, dense) in [(&lad.ma, ma.to_dense()), (&lad.mb, mb.to_dense()), (&lad.cr, cr.to_dense())] {
            let mut m = DMatrix::<C64>::zeros(space.dim(), space.dim());
            for &(i, j, v) in entries {
                m[(i, j)] += C64::new(v, 0.0);
            }
            assert!((m - dense).norm() < 1e-14);
        }
    }

    /// The frame RHS equals `R (-i H) R'` applied to the lab Hamiltonian.
    #[test]
    fn frame_rhs_matches_rotated_lab_hamiltonian() {
        let space = FockSpace::new(3, 3, 3).unwrap();
        let s = crate::pulses::PulseSchedule::new(0.3, 2.0, -3.0, 3.0, 2.5, 1.0, 1.7, 2.0);
        let t0 = -9.0;
        for &t in &[-4.0, -3.1, 0.2, 2.9] {
            for rwa in [true, false] {
                let mut sys = Schrodinger { ladder: Ladder::new(&space), schedule: s, t0, rwa };
                let (ta, tm) = s.detuning_phases(t0, t);
                let phase = |i: usize| {
                    let lv = space.levels(i);
                    C64::from_polar(1.0, ta * lv[0] as f64 + tm * lv[1] as f64)
                };
                let h = build_hamiltonian(t, &space, &s, rwa).to_dense();
                let y: Vec<C64> = (0..space.dim()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
                let mut dy = vec![C64::new(0.0, 0.0); space.dim()];
                sys.rhs(t, &y, &mut dy);
                // lab: psi = R' y; d/dt y = R(-i H) R' y - i (delta-terms) y; the detuning part cancels
                let lab: Vec<C64> = (0..space.dim()).map(|i| phase(i).conj() * y[i]).collect();
                for i in 0..space.dim() {
                    let mut hy = C64::new(0.0, 0.0);
                    for j in 0..space.dim() {
                        hy += h[(i, j)] * lab[j];
                    }
                    let lv = space.levels(i);
                    let (da, dm) = s.detunings(t);
                    let diag = C64::new(da * lv[0] as f64 + dm * lv[1] as f64, 0.0) * lab[i];
                    let expected = phase(i) * C64::new(0.0, -1.0) * (hy - diag);
                    assert!((dy[i] - expected).norm() < 1e-12, "t {t} rwa {rwa} i {i}");
                }
            }
        }
    }
}
