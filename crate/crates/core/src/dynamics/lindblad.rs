//! Master-equation evolution of the full density matrix.
//!
//! `d rho/dt = -i[H, rho] + sum_x kappa_x (n_x + 1) D[x] rho + kappa_x n_x D[x'] rho`
//! with `D[L] rho = L rho L' - {L'L, rho} / 2`. The right-hand side is
//! evaluated as `Y + Y' + sum gamma L rho L'` with `Y = -i H_eff rho` and
//! `H_eff = H - (i/2) sum gamma L'L`. Only the upper triangle of `rho` is
//! stored (row by row, diagonal first), which keeps the state exactly
//! Hermitian and halves the memory traffic of the integrator.

use std::time::Instant;

use nalgebra::DMatrix;

use super::recorder::{Readout, Recorder, Sample};
use super::schrodinger::Ladder;
use super::{check_dim, elapsed, frame_couplings, options, stops, Diagnostics, FinalState, Trajectory, POSITIVITY_THRESHOLD};
use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockSpace, Mode, QuantumState};
use crate::ode::{integrate_steps, OdeSystem, Projection};
use crate::pulses::PulseSchedule;
use crate::scenario::{Scenario, SolverKind};
use crate::C64;

/// Sparse operator with one nonzero per row: `(S y)[r] = w[r] y[r - shift]`.
///
/// Every coupling and jump operator here has this form; `w` vanishes on rows
/// whose source index would leave the space.
struct Shift {
    shift: isize,
    w: Vec<f64>,
}

impl Shift {
    fn from_entries(dim: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> Option<Self> {
        let mut w = vec![0.0; dim];
        let mut shift = None;
        for (row, col, v) in entries {
            let d = row as isize - col as isize;
            debug_assert!(shift.is_none() || shift == Some(d));
            shift = Some(d);
            w[row] = v;
        }
        shift.map(|shift| Shift { shift, w })
    }

    /// Columns `k` in `[lo, n)` with `k - shift` inside the space.
    #[inline]
    fn range(&self, lo: usize, n: usize) -> (usize, usize) {
        let lo = lo.max(self.shift.max(0) as usize);
        let hi = (n as isize + self.shift.min(0)) as usize;
        (lo, hi.max(lo))
    }
}

/// Jump operators `sqrt(gamma) L`, one per mode and direction with a nonzero rate.
fn jumps(space: &FockSpace, kappa: [f64; 3], nbar: [f64; 3]) -> Vec<Shift> {
    let mut out = Vec::new();
    let dim = space.dim();
    for mode in Mode::ALL {
        let k = mode.index();
        let stride = space.stride(mode);
        let cutoff = space.cutoffs[k];
        let levels = |i: usize| space.levels(i)[k];
        let lower = kappa[k] * (nbar[k] + 1.0);
        let raise = kappa[k] * nbar[k];
        if lower > 0.0 {
            let moves = (0..dim).filter(|&i| levels(i) >= 1).map(|i| (i - stride, i, (lower * levels(i) as f64).sqrt()));
            out.extend(Shift::from_entries(dim, moves));
        }
        if raise > 0.0 {
            let moves = (0..dim).filter(|&i| levels(i) + 1 < cutoff).map(|i| (i + stride, i, (raise * (levels(i) + 1) as f64).sqrt()));
            out.extend(Shift::from_entries(dim, moves));
        }
    }
    out
}

/// One half of a Hermitian coupling term: which coefficient it carries and whether conjugated.
struct Coupling {
    op: Shift,
    kind: usize,
    conj: bool,
}

/// Row offsets of the packed upper triangle: row `i` holds columns `i..n` at `off[i]..off[i + 1]`.
fn packed_offsets(n: usize) -> Vec<usize> {
    let mut off = Vec::with_capacity(n + 1);
    let mut acc = 0;
    for i in 0..=n {
        off.push(acc);
        acc += n - i.min(n);
    }
    off
}

/// Upper triangle of a row-major Hermitian matrix.
fn pack(full: &[C64], n: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.extend_from_slice(&full[i * n + i..(i + 1) * n]);
    }
    out
}

/// Full row-major matrix from a packed upper triangle.
fn unpack(packed: &[C64], n: usize) -> Vec<C64> {
    let off = packed_offsets(n);
    let mut full = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in i..n {
            let v = packed[off[i] + k - i];
            full[i * n + k] = v;
            full[k * n + i] = v.conj();
        }
        full[i * n + i].im = 0.0;
    }
    full
}

struct Lindblad {
    dim: usize,
    off: Vec<usize>,
    couplings: Vec<Coupling>,
    jumps: Vec<Shift>,
    /// Diagonal of `sum gamma L'L / 2`.
    half_loss: Vec<f64>,
    schedule: PulseSchedule,
    t0: f64,
    rwa: bool,
}

impl Lindblad {
    fn new(space: &FockSpace, kappa: [f64; 3], nbar: [f64; 3], schedule: PulseSchedule, t0: f64, rwa: bool) -> Self {
        let dim = space.dim();
        let jumps = jumps(space, kappa, nbar);
        let mut half_loss = vec![0.0; dim];
        for j in &jumps {
            for (r, &a) in j.w.iter().enumerate() {
                if a != 0.0 {
                    half_loss[(r as isize - j.shift) as usize] += 0.5 * a * a;
                }
            }
        }
        let ladder = Ladder::new(space);
        let mut couplings = Vec::new();
        for (kind, entries) in [&ladder.ma, &ladder.mb, &ladder.cr].into_iter().enumerate() {
            if kind == 2 && rwa {
                continue;
            }
            if let Some(op) = Shift::from_entries(dim, entries.iter().copied()) {
                couplings.push(Coupling { op, kind, conj: false });
            }
            if let Some(op) = Shift::from_entries(dim, entries.iter().map(|&(r, c, v)| (c, r, v))) {
                couplings.push(Coupling { op, kind, conj: true });
            }
        }
        Lindblad { dim, off: packed_offsets(dim), couplings, jumps, half_loss, schedule, t0, rwa }
    }
}

impl OdeSystem for Lindblad {
    fn dim(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    /// Upper triangle of `A y + y A' + sum L y L'` with `A = -i H - diag(half_loss)`.
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.dim;
        let off = &self.off;
        let c = frame_couplings(&self.schedule, self.t0, t, self.rwa);
        let base = [c.ma, c.mb, c.cr];
        let mut coefs = [C64::new(0.0, 0.0); 6];
        for (cp, slot) in self.couplings.iter().zip(coefs.iter_mut()) {
            let b = if cp.conj { base[cp.kind].conj() } else { base[cp.kind] };
            *slot = C64::new(b.im, -b.re);
        }
        let hl = &self.half_loss;
        for i in 0..n {
            let out = &mut dy[off[i]..off[i + 1]];
            for ((o, &v), &h) in out.iter_mut().zip(&y[off[i]..off[i + 1]]).zip(&hl[i..]) {
                *o = v * -(hl[i] + h);
            }
            for (cp, &coef) in self.couplings.iter().zip(&coefs) {
                let op = &cp.op;
                // (A y)[i, k] = coef w[i] y[i - shift, k]
                let wi = op.w[i];
                if wi != 0.0 {
                    let src = (i as isize - op.shift) as usize;
                    let a = coef * wi;
                    let from = if src > i {
                        for k in i..src {
                            out[k - i] += a * y[off[k] + src - k].conj();
                        }
                        src
                    } else {
                        i
                    };
                    let row = &y[off[src] + from - src..off[src + 1]];
                    for (o, &v) in out[from - i..].iter_mut().zip(row) {
                        *o += a * v;
                    }
                }
                // (y A')[i, k] = conj(coef) w[k] y[i, k - shift]
                let cc = coef.conj();
                let (lo, hi) = op.range(i, n);
                if lo < hi {
                    let split = (i as isize + op.shift).clamp(lo as isize, hi as isize) as usize;
                    for k in lo..split {
                        let col = (k as isize - op.shift) as usize;
                        out[k - i] += cc * (y[off[col] + i - col].conj() * op.w[k]);
                    }
                    if split < hi {
                        let s0 = off[i] + (split as isize - op.shift) as usize - i;
                        let row = &y[s0..s0 + (hi - split)];
                        for ((o, &v), &w) in out[split - i..hi - i].iter_mut().zip(row).zip(&op.w[split..hi]) {
                            *o += cc * (v * w);
                        }
                    }
                }
            }
            for l in &self.jumps {
                let wi = l.w[i];
                if wi == 0.0 {
                    continue;
                }
                let (lo, hi) = l.range(i, n);
                if lo < hi {
                    // y[i - shift, k - shift]: same row offset pattern, so one contiguous run
                    let r = (i as isize - l.shift) as usize;
                    let row = &y[off[r] + lo - i..off[r] + hi - i];
                    for ((o, &v), &w) in out[lo - i..hi - i].iter_mut().zip(row).zip(&l.w[lo..hi]) {
                        *o += v * (wi * w);
                    }
                }
            }
            out[0].im = 0.0;
        }
    }
}

/// Projected layout: reduced cavity block, then eight scalar observables.
struct MixedReadout {
    cutoffs: [usize; 3],
    dim: usize,
    off: Vec<usize>,
    levels: Vec<[usize; 3]>,
    schedule: PulseSchedule,
    t0: f64,
}

const SCALARS: usize = 8;

impl Projection for MixedReadout {
    fn len(&self) -> usize {
        self.cutoffs[0] * self.cutoffs[0] + SCALARS
    }

    fn project(&self, y: &[C64], out: &mut [C64]) {
        let (na, n) = (self.cutoffs[0], self.dim);
        let rest = n / na;
        let off = &self.off;
        for a in 0..na {
            for b in a..na {
                let mut acc = C64::new(0.0, 0.0);
                for u in 0..rest {
                    acc += y[off[a * rest + u] + (b - a) * rest];
                }
                out[a * na + b] = acc;
                out[b * na + a] = acc.conj();
            }
        }
        let s = &mut out[na * na..];
        s.fill(C64::new(0.0, 0.0));
        for (i, lv) in self.levels.iter().enumerate() {
            let p = y[off[i]];
            s[0] += p;
            for k in 0..3 {
                s[1 + k] += p * lv[k] as f64;
                if lv[k] + 1 == self.cutoffs[k] {
                    s[4 + k] += p;
                }
            }
            if (lv[0] + lv[1] + lv[2]) % 2 == 1 {
                s[7] += p;
            }
        }
    }
}

impl Readout for MixedReadout {
    fn sample(&self, p: &[C64]) -> Sample {
        let na = self.cutoffs[0];
        let s = &p[na * na..];
        Sample { trace: s[0].re, n: [s[1].re, s[2].re, s[3].re], top: [s[4].re, s[5].re, s[6].re], odd: s[7].re }
    }

    fn cavity(&self, t: f64, p: &[C64]) -> Option<DMatrix<C64>> {
        let na = self.cutoffs[0];
        let theta_a = self.schedule.detuning_phases(self.t0, t).0;
        let mut rho = DMatrix::from_fn(na, na, |a, b| p[a * na + b] * C64::from_polar(1.0, -theta_a * (a as f64 - b as f64)));
        let h = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        rho.copy_from(&h);
        Some(rho)
    }
}

/// Master-equation evolution of `rho0` (lab frame at `t_start`).
pub fn evolve_lindblad(rho0: &DensityMatrix, sc: &Scenario) -> Result<Trajectory> {
    let start = Instant::now();
    let space = sc.space()?;
    let dim = space.dim();
    check_dim(dim, rho0.dim(), "rho0")?;
    let tr = rho0.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::invalid("rho0", format!("trace {tr} differs from 1")));
    }
    if dim <= 200 {
        QuantumState::Density(rho0.clone()).validate(1e-9).map_err(|e| match e {
            Error::InvalidValue { reason, .. } => Error::invalid("rho0", reason),
            other => other,
        })?;
    }
    let t0 = sc.grid.t_start;
    let kappa = sc.kappas();
    let nbar = sc.bath()?.as_array();
    let mut sys = Lindblad::new(&space, kappa, nbar, sc.schedule, t0, sc.rwa);
    let readout = MixedReadout {
        cutoffs: space.cutoffs,
        dim,
        off: packed_offsets(dim),
        levels: (0..dim).map(|j| space.levels(j)).collect(),
        schedule: sc.schedule,
        t0,
    };
    let mut rec = Recorder::new(&readout, sc, sc.reference()?);
    let y0 = pack(rho0.as_slice(), dim);
    rec.start(t0, &y0);
    let (y, stats) = integrate_steps(&mut sys, &readout, t0, &y0, &stops(sc), options(sc), &mut rec)?;
    let t_end = sc.grid.t_end;
    rec.finish(t_end, &y);
    let mut y = unpack(&y, dim);

    let (theta_a, theta_m) = sc.schedule.detuning_phases(t0, t_end);
    let phase: Vec<C64> = readout
        .levels
        .iter()
        .map(|lv| C64::from_polar(1.0, -(theta_a * lv[0] as f64 + theta_m * lv[1] as f64)))
        .collect();
    for i in 0..dim {
        for k in 0..dim {
            y[i * dim + k] *= phase[i] * phase[k].conj();
        }
    }
    let rho = DensityMatrix::from_row_major(dim, y)?;
    let min_final = rho.min_eigenvalue();
    let diagnostics = Diagnostics {
        solver: SolverKind::Lindblad,
        stats,
        wall_seconds: elapsed(start),
        max_trace_error: rec.max_trace_error(),
        max_top_level: rec.max_top(),
        truncation_flagged: rec.truncation_flagged(),
        min_eigenvalue_cavity: rec.min_eigenvalue_cavity,
        min_eigenvalue_final: Some(min_final),
        positivity_flagged: rec.min_eigenvalue_cavity < POSITIVITY_THRESHOLD || min_final < POSITIVITY_THRESHOLD,
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
        final_state: FinalState::Density(rho),
        diagnostics,
    })
}
