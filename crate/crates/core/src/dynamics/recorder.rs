//! Output sampling shared by the solvers.

use nalgebra::DMatrix;

use super::{Retrieval, Snapshot};
use crate::error::Result;
use crate::ode::{DenseStep, Projection, StepObserver};
use crate::scenario::Scenario;
use crate::states::fidelity;
use crate::C64;

/// Scalar observables read from a projected state.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Sample {
    pub n: [f64; 3],
    pub trace: f64,
    pub odd: f64,
    pub top: [f64; 3],
}

/// How a solver turns its projected state into observables.
pub(crate) trait Readout: Projection {
    fn sample(&self, p: &[C64]) -> Sample;
    /// Reduced cavity matrix at `t`, rotated out of the detuning frame.
    fn cavity(&self, t: f64, p: &[C64]) -> Option<DMatrix<C64>>;
    /// Fidelity against the cavity reference.
    fn fidelity(&self, t: f64, p: &[C64], reference: &[C64]) -> Option<f64> {
        self.cavity(t, p).map(|rho| fidelity(&rho, reference))
    }
}

const GOLDEN_ITERATIONS: usize = 48;

pub(crate) struct Recorder<'a, R: Readout> {
    readout: &'a R,
    reference: Option<Vec<C64>>,
    times: Vec<f64>,
    next: usize,
    buf: Vec<C64>,
    window: (f64, f64),
    stride: f64,
    monitor_threshold: f64,
    pub out_times: Vec<f64>,
    pub n: [Vec<f64>; 3],
    pub fidelity: Vec<f64>,
    pub trace: Vec<f64>,
    pub odd: Vec<f64>,
    pub top: Vec<[f64; 3]>,
    pub min_eigenvalue_cavity: f64,
    pub best: Option<Retrieval>,
    best_rho: Option<DMatrix<C64>>,
    pub snapshots: Vec<Snapshot>,
}

fn min_eigenvalue(rho: &DMatrix<C64>) -> f64 {
    crate::fock::min_hermitian_eigenvalue(rho)
}

impl<'a, R: Readout> Recorder<'a, R> {
    pub fn new(readout: &'a R, sc: &Scenario, reference: Option<Vec<C64>>) -> Self {
        let times = sc.grid.times();
        Recorder {
            readout,
            reference,
            times,
            next: 0,
            buf: vec![C64::new(0.0, 0.0); readout.len()],
            window: (sc.retrieval_start().max(sc.grid.t_start), sc.grid.t_end),
            stride: sc.retrieval_stride,
            monitor_threshold: sc.monitor_threshold,
            out_times: Vec::new(),
            n: Default::default(),
            fidelity: Vec::new(),
            trace: Vec::new(),
            odd: Vec::new(),
            top: Vec::new(),
            min_eigenvalue_cavity: f64::INFINITY,
            best: None,
            best_rho: None,
            snapshots: Vec::new(),
        }
    }

    /// Record the state at the start time.
    pub fn start(&mut self, t0: f64, y0: &[C64]) {
        let mut p = vec![C64::new(0.0, 0.0); self.readout.len()];
        self.readout.project(y0, &mut p);
        if let Some(rho) = self.readout.cavity(t0, &p) {
            self.snapshots.push(Snapshot { label: "initial".into(), t: t0, rho_a: rho });
        }
        while self.next < self.times.len() && self.times[self.next] <= t0 {
            let t = self.times[self.next];
            self.record(t, &p);
            self.next += 1;
        }
    }

    fn record(&mut self, t: f64, p: &[C64]) {
        let s = self.readout.sample(p);
        self.out_times.push(t);
        for k in 0..3 {
            self.n[k].push(s.n[k]);
        }
        self.trace.push(s.trace);
        self.odd.push(s.odd);
        self.top.push(s.top);
        let cavity = self.readout.cavity(t, p);
        if let Some(rho) = &cavity {
            self.min_eigenvalue_cavity = self.min_eigenvalue_cavity.min(min_eigenvalue(rho));
        }
        let f = match &self.reference {
            Some(r) => match &cavity {
                Some(rho) => fidelity(rho, r),
                None => self.readout.fidelity(t, p, r).unwrap_or(f64::NAN),
            },
            None => f64::NAN,
        };
        self.fidelity.push(f);
    }

    fn fidelity_at(&mut self, step: &DenseStep, t: f64) -> f64 {
        step.eval(t, &mut self.buf);
        let r = self.reference.as_ref().expect("reference");
        self.readout.fidelity(t, &self.buf, r).unwrap_or(f64::NAN)
    }

    fn search_retrieval(&mut self, step: &DenseStep) {
        let (w0, w1) = self.window;
        let lo = step.t_old().max(w0);
        let hi = step.t_new().min(w1);
        if lo > hi {
            return;
        }
        let k0 = ((lo - w0) / self.stride).ceil() as usize;
        let k1 = ((hi - w0) / self.stride).floor() as usize;
        let mut candidates: Vec<f64> = (k0..=k1.max(k0)).map(|k| w0 + k as f64 * self.stride).filter(|&t| t >= lo && t <= hi).collect();
        candidates.push(hi);
        let mut best_t = f64::NAN;
        let mut best_f = f64::NEG_INFINITY;
        for t in candidates {
            let f = self.fidelity_at(step, t);
            if f > best_f {
                best_f = f;
                best_t = t;
            }
        }
        if !(best_f > self.best.map_or(f64::NEG_INFINITY, |b| b.fidelity)) {
            return;
        }
        // golden-section refinement around the best sample
        let (mut a, mut b) = ((best_t - self.stride).max(lo), (best_t + self.stride).min(hi));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = self.fidelity_at(step, c);
        let mut fd = self.fidelity_at(step, d);
        for _ in 0..GOLDEN_ITERATIONS {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.fidelity_at(step, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.fidelity_at(step, d);
            }
        }
        let (t_ref, f_ref) = if fc > fd { (c, fc) } else { (d, fd) };
        let (t, f) = if f_ref > best_f { (t_ref, f_ref) } else { (best_t, best_f) };
        step.eval(t, &mut self.buf);
        self.best = Some(Retrieval { t, fidelity: f });
        self.best_rho = self.readout.cavity(t, &self.buf);
    }

    /// Add the final cavity state and the retrieval snapshot.
    pub fn finish(&mut self, t_end: f64, y: &[C64]) {
        if let (Some(b), Some(rho)) = (self.best, self.best_rho.take()) {
            self.snapshots.push(Snapshot { label: "retrieval".into(), t: b.t, rho_a: rho });
        }
        let mut p = vec![C64::new(0.0, 0.0); self.readout.len()];
        self.readout.project(y, &mut p);
        if let Some(rho) = self.readout.cavity(t_end, &p) {
            self.snapshots.push(Snapshot { label: "final".into(), t: t_end, rho_a: rho });
        }
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trace.iter().fold(0.0, |m, t| m.max((t - 1.0).abs()))
    }

    pub fn max_top(&self) -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for t in &self.top {
            for k in 0..3 {
                m[k] = m[k].max(t[k]);
            }
        }
        m
    }

    pub fn truncation_flagged(&self) -> bool {
        self.max_top().iter().any(|&p| p > self.monitor_threshold)
    }
}

impl<R: Readout> StepObserver for Recorder<'_, R> {
    fn wants(&mut self, t_old: f64, t_new: f64) -> bool {
        let coarse = self.next < self.times.len() && self.times[self.next] <= t_new;
        let window = self.reference.is_some() && t_new >= self.window.0 && t_old <= self.window.1;
        coarse || window
    }

    fn observe(&mut self, step: &DenseStep) -> Result<()> {
        while self.next < self.times.len() && self.times[self.next] <= step.t_new() {
            let t = self.times[self.next];
            step.eval(t, &mut self.buf);
            let p = std::mem::take(&mut self.buf);
            self.record(t, &p);
            self.buf = p;
            self.next += 1;
        }
        if self.reference.is_some() {
            self.search_retrieval(step);
        }
        Ok(())
    }
}
