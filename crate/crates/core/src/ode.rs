//! Adaptive Dormand-Prince 8(5,3) integrator for complex linear systems, with
//! 7th-order dense output evaluated on linear projections of the state.
//!
//! Step-size control and the error norm follow Hairer, Norsett and Wanner's
//! DOP853 as commonly implemented.

use crate::error::{Error, Result};
use crate::C64;

/// Right-hand side `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[C64], dy: &mut [C64]);
}

/// Linear map applied to the state before dense output.
///
/// Dense output interpolates projected stage derivatives, so only the
/// projected dimension is paid per output time.
pub trait Projection {
    fn len(&self) -> usize;
    fn project(&self, y: &[C64], out: &mut [C64]);
}

/// Keeps the whole state.
pub struct Identity(pub usize);

impl Projection for Identity {
    fn len(&self) -> usize {
        self.0
    }
    fn project(&self, y: &[C64], out: &mut [C64]) {
        out.copy_from_slice(y);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-9, atol: 1e-11 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub tol: Tolerances,
    pub max_step: f64,
    pub max_steps: usize,
    pub first_step: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Options { tol: Tolerances::default(), max_step: f64::INFINITY, max_steps: 50_000_000, first_step: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Stats {
    pub rhs_evaluations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

const N_STAGES: usize = 12;
const CHUNK: usize = 512;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

const C: [f64; 16] = [0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0, 1.0, 0.1, 0.2, 0.7777777777777778];
const A: [[f64; 16]; 16] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259, 0.0, 0.0, 0.0, 0.0],
    [0.056167502283047954, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25350021021662483, -0.2462390374708025, -0.12419142326381637, 0.15329179827876568, 0.00820105229563469, 0.007567897660545699, -0.008298, 0.0, 0.0, 0.0],
    [0.03183464816350214, 0.0, 0.0, 0.0, 0.0, 0.028300909672366776, 0.053541988307438566, -0.05492374857139099, 0.0, 0.0, -0.00010834732869724932, 0.0003825710908356584, -0.00034046500868740456, 0.1413124436746325, 0.0, 0.0],
    [-0.42889630158379194, 0.0, 0.0, 0.0, 0.0, -4.697621415361164, 7.683421196062599, 4.06898981839711, 0.3567271874552811, 0.0, 0.0, 0.0, -0.0013990241651590145, 2.9475147891527724, -9.15095847217987, 0.0],
];
const E3: [f64; 13] = [-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082, 0.0];
const E5: [f64; 13] = [0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294, 0.0];
const D: [[f64; 16]; 4] = [
    [-8.428938276109013, 0.0, 0.0, 0.0, 0.0, 0.5667149535193777, -3.0689499459498917, 2.38466765651207, 2.117034582445028, -0.871391583777973, 2.2404374302607883, 0.6315787787694688, -0.08899033645133331, 18.148505520854727, -9.194632392478356, -4.436036387594894],
    [10.427508642579134, 0.0, 0.0, 0.0, 0.0, 242.28349177525817, 165.20045171727028, -374.5467547226902, -22.113666853125306, 7.733432668472264, -30.674084731089398, -9.332130526430229, 15.697238121770845, -31.139403219565178, -9.35292435884448, 35.81684148639408],
    [19.985053242002433, 0.0, 0.0, 0.0, 0.0, -387.0373087493518, -189.17813819516758, 527.8081592054236, -11.57390253995963, 6.8812326946963, -1.0006050966910838, 0.7777137798053443, -2.778205752353508, -60.19669523126412, 84.32040550667716, 11.99229113618279],
    [-25.69393346270375, 0.0, 0.0, 0.0, 0.0, -154.18974869023643, -231.5293791760455, 357.6391179106141, 93.40532418362432, -37.45832313645163, 104.0996495089623, 29.8402934266605, -43.53345659001114, 96.32455395918828, -39.17726167561544, -149.72683625798564],
];

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n.max(1) as f64).sqrt()
}

struct Workspace {
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    y_new: Vec<C64>,
}

struct Solver<'a, S: OdeSystem> {
    sys: &'a mut S,
    opts: Options,
    n: usize,
    ws: Workspace,
    stats: Stats,
}

impl<'a, S: OdeSystem> Solver<'a, S> {
    fn new(sys: &'a mut S, opts: Options) -> Self {
        let n = sys.dim();
        let ws = Workspace { k: vec![vec![C64::new(0.0, 0.0); n]; 16], tmp: vec![C64::new(0.0, 0.0); n], y_new: vec![C64::new(0.0, 0.0); n] };
        Solver { sys, opts, n, ws, stats: Stats::default() }
    }

    fn eval(&mut self, t: f64, y: &[C64], out_stage: usize) {
        let mut k = std::mem::take(&mut self.ws.k[out_stage]);
        self.sys.rhs(t, y, &mut k);
        self.ws.k[out_stage] = k;
        self.stats.rhs_evaluations += 1;
    }

    /// `tmp = y + h * sum_j a[j] k[j]` over `j < s`, one cache-sized chunk at a time.
    fn stage_input(&mut self, y: &[C64], h: f64, a: &[f64], s: usize) {
        let Workspace { k, tmp, .. } = &mut self.ws;
        let mut coeffs = [(0usize, 0.0f64); 16];
        let mut m = 0;
        for (j, &aj) in a.iter().enumerate().take(s) {
            if aj != 0.0 {
                coeffs[m] = (j, h * aj);
                m += 1;
            }
        }
        let n = y.len();
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let t = &mut tmp[start..end];
            t.copy_from_slice(&y[start..end]);
            for &(j, c) in &coeffs[..m] {
                for (ti, kj) in t.iter_mut().zip(&k[j][start..end]) {
                    *ti += kj * c;
                }
            }
            start = end;
        }
    }

    fn initial_step(&mut self, t0: f64, y0: &[C64], t_end: f64) -> f64 {
        let tol = self.opts.tol;
        let n = self.n;
        let scale: Vec<f64> = y0.iter().map(|y| tol.atol + y.norm() * tol.rtol).collect();
        let d0 = rms(y0.iter().zip(&scale).map(|(y, s)| y.norm() / s), n);
        let d1 = rms(self.ws.k[0].iter().zip(&scale).map(|(f, s)| f.norm() / s), n);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(t_end - t0);
        let f0 = self.ws.k[0].clone();
        let y1: Vec<C64> = y0.iter().zip(&f0).map(|(y, f)| y + f * h0).collect();
        self.eval(t0 + h0, &y1, 1);
        let d2 = rms(self.ws.k[1].iter().zip(&f0).zip(&scale).map(|((a, b), s)| (a - b).norm() / s), n) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        (100.0 * h0).min(h1)
    }

    /// One trial step from `(t, y)` with `k[0] = f(t, y)`; fills `y_new`,
    /// `k[12] = f(t + h, y_new)`, returns the error norm.
    fn trial(&mut self, t: f64, y: &[C64], h: f64) -> f64 {
        for s in 1..N_STAGES {
            self.stage_input(y, h, &A[s], s);
            let tmp = std::mem::take(&mut self.ws.tmp);
            self.eval(t + C[s] * h, &tmp, s);
            self.ws.tmp = tmp;
        }
        self.stage_input(y, h, &A[N_STAGES], N_STAGES);
        std::mem::swap(&mut self.ws.tmp, &mut self.ws.y_new);
        let y_new = std::mem::take(&mut self.ws.y_new);
        self.eval(t + h, &y_new, N_STAGES);
        self.ws.y_new = y_new;

        let tol = self.opts.tol;
        let (mut e5, mut e3) = (0.0, 0.0);
        let stages5: Vec<(usize, f64)> = (0..=N_STAGES).filter(|&s| E5[s] != 0.0).map(|s| (s, E5[s])).collect();
        let stages3: Vec<(usize, f64)> = (0..=N_STAGES).filter(|&s| E3[s] != 0.0).map(|s| (s, E3[s])).collect();
        let mut a5 = [C64::new(0.0, 0.0); CHUNK];
        let mut a3 = [C64::new(0.0, 0.0); CHUNK];
        let mut start = 0;
        while start < self.n {
            let end = (start + CHUNK).min(self.n);
            let len = end - start;
            a5[..len].fill(C64::new(0.0, 0.0));
            a3[..len].fill(C64::new(0.0, 0.0));
            for &(s, e) in &stages5 {
                for (acc, k) in a5[..len].iter_mut().zip(&self.ws.k[s][start..end]) {
                    *acc += k * e;
                }
            }
            for &(s, e) in &stages3 {
                for (acc, k) in a3[..len].iter_mut().zip(&self.ws.k[s][start..end]) {
                    *acc += k * e;
                }
            }
            for i in 0..len {
                let big = y[start + i].norm_sqr().max(self.ws.y_new[start + i].norm_sqr());
                let scale = tol.atol + big.sqrt() * tol.rtol;
                let inv = 1.0 / (scale * scale);
                e5 += a5[i].norm_sqr() * inv;
                e3 += a3[i].norm_sqr() * inv;
            }
            start = end;
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / ((e5 + 0.01 * e3) * self.n as f64).sqrt()
    }

    /// Extra stages for dense output of the step `[t, t + h]` from `y`.
    fn extra_stages(&mut self, t: f64, y: &[C64], h: f64) {
        for s in (N_STAGES + 1)..16 {
            self.stage_input(y, h, &A[s], s);
            let tmp = std::mem::take(&mut self.ws.tmp);
            self.eval(t + C[s] * h, &tmp, s);
            self.ws.tmp = tmp;
        }
    }
}

/// Interpolation data of one accepted step in projected coordinates.
pub struct DenseStep {
    t_old: f64,
    h: f64,
    y_old: Vec<C64>,
    f: [Vec<C64>; 7],
}

impl DenseStep {
    fn build<P: Projection>(proj: &P, t_old: f64, h: f64, y_old: &[C64], k: &[Vec<C64>]) -> Self {
        let m = proj.len();
        let zero = C64::new(0.0, 0.0);
        let mut pk = vec![vec![zero; m]; 16];
        for (s, ks) in k.iter().enumerate() {
            proj.project(ks, &mut pk[s]);
        }
        let mut py = vec![zero; m];
        proj.project(y_old, &mut py);
        let mut f: [Vec<C64>; 7] = std::array::from_fn(|_| vec![zero; m]);
        for i in 0..m {
            let mut dy = zero;
            for s in 0..N_STAGES {
                dy += pk[s][i] * A[N_STAGES][s];
            }
            dy *= h;
            f[0][i] = dy;
            f[1][i] = pk[0][i] * h - dy;
            f[2][i] = dy * 2.0 - (pk[N_STAGES][i] + pk[0][i]) * h;
            for (j, row) in D.iter().enumerate() {
                let mut acc = zero;
                for s in 0..16 {
                    if row[s] != 0.0 {
                        acc += pk[s][i] * row[s];
                    }
                }
                f[3 + j][i] = acc * h;
            }
        }
        DenseStep { t_old, h, y_old: py, f }
    }

    pub fn t_old(&self) -> f64 {
        self.t_old
    }

    pub fn t_new(&self) -> f64 {
        self.t_old + self.h
    }

    /// Projected state at `t` inside the step.
    pub fn eval(&self, t: f64, out: &mut [C64]) {
        let x = (t - self.t_old) / self.h;
        let u = 1.0 - x;
        for i in 0..out.len() {
            let mut acc = self.f[6][i] * x;
            acc = (acc + self.f[5][i]) * u;
            acc = (acc + self.f[4][i]) * x;
            acc = (acc + self.f[3][i]) * u;
            acc = (acc + self.f[2][i]) * x;
            acc = (acc + self.f[1][i]) * u;
            acc = (acc + self.f[0][i]) * x;
            out[i] = self.y_old[i] + acc;
        }
    }
}

/// Receives accepted steps.
pub trait StepObserver {
    /// Whether the step from `t_old` to `t_new` should be interpolated.
    fn wants(&mut self, t_old: f64, t_new: f64) -> bool;
    /// Called for every step accepted by `wants`.
    fn observe(&mut self, step: &DenseStep) -> Result<()>;
}

/// Integrate from `t0` to the last entry of `stops`, never stepping across a
/// stop, handing dense steps to `observer`. Returns the final state.
pub fn integrate_steps<S, P, O>(
    sys: &mut S,
    proj: &P,
    t0: f64,
    y0: &[C64],
    stops: &[f64],
    opts: Options,
    observer: &mut O,
) -> Result<(Vec<C64>, Stats)>
where
    S: OdeSystem,
    P: Projection,
    O: StepObserver,
{
    let n = sys.dim();
    assert_eq!(y0.len(), n, "state length does not match the system");
    let t_end = *stops.last().unwrap_or(&t0);
    if !(t_end >= t0) {
        return Err(Error::Integration { t: t0, reason: format!("end time {t_end} precedes start {t0}") });
    }
    let mut solver = Solver::new(sys, opts);
    let mut y = y0.to_vec();
    let mut t = t0;
    if t_end == t0 {
        return Ok((y, solver.stats));
    }

    solver.eval(t, &y, 0);
    let mut h_abs = match opts.first_step {
        Some(h) => h,
        None => solver.initial_step(t0, &y, t_end),
    };
    let mut stop_idx = stops.iter().position(|&s| s > t).unwrap_or(stops.len() - 1);

    while t < t_end {
        let bound = stops[stop_idx];
        let min_step = 10.0 * (next_up(t) - t);
        h_abs = h_abs.min(opts.max_step).max(min_step);
        let mut rejected = false;
        let h = loop {
            if h_abs < min_step {
                return Err(Error::Integration { t, reason: "step size underflow".into() });
            }
            let mut h = h_abs;
            if t + h > bound {
                h = bound - t;
            }
            let err = solver.trial(t, &y, h);
            if !err.is_finite() {
                h_abs *= MIN_FACTOR;
                rejected = true;
                solver.stats.rejected_steps += 1;
                continue;
            }
            if err < 1.0 {
                let mut factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(ERROR_EXPONENT)).min(MAX_FACTOR) };
                if rejected {
                    factor = factor.min(1.0);
                }
                h_abs = h * factor;
                break h;
            }
            h_abs = h * (SAFETY * err.powf(ERROR_EXPONENT)).max(MIN_FACTOR);
            rejected = true;
            solver.stats.rejected_steps += 1;
        };
        solver.stats.accepted_steps += 1;
        if solver.stats.accepted_steps > opts.max_steps {
            return Err(Error::Integration { t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        let t_new = if t + h >= bound { bound } else { t + h };
        if solver.ws.y_new.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Integration { t: t_new, reason: "state became non-finite".into() });
        }

        if observer.wants(t, t_new) {
            solver.extra_stages(t, &y, h);
            let dense = DenseStep::build(proj, t, t_new - t, &y, &solver.ws.k);
            observer.observe(&dense)?;
        }

        std::mem::swap(&mut y, &mut solver.ws.y_new);
        solver.ws.k.swap(0, N_STAGES);
        t = t_new;
        if t >= bound && stop_idx + 1 < stops.len() {
            stop_idx += 1;
        }
    }
    Ok((y, solver.stats))
}

/// Calls `observe` at fixed output times.
struct AtTimes<'a, F> {
    outputs: &'a [f64],
    next: usize,
    buf: Vec<C64>,
    observe: F,
}

impl<F: FnMut(f64, &[C64]) -> Result<()>> StepObserver for AtTimes<'_, F> {
    fn wants(&mut self, _t_old: f64, t_new: f64) -> bool {
        self.next < self.outputs.len() && self.outputs[self.next] <= t_new
    }

    fn observe(&mut self, step: &DenseStep) -> Result<()> {
        while self.next < self.outputs.len() && self.outputs[self.next] <= step.t_new() {
            let to = self.outputs[self.next];
            step.eval(to, &mut self.buf);
            (self.observe)(to, &self.buf)?;
            self.next += 1;
        }
        Ok(())
    }
}

/// Integrate from `t0` to the last entry of `stops`, never stepping across a stop.
///
/// `outputs` must be sorted and inside `[t0, t_end]`; for each one
/// `observe(t, P y(t))` is called in order. Returns the final state.
pub fn integrate<S, P, F>(
    sys: &mut S,
    proj: &P,
    t0: f64,
    y0: &[C64],
    stops: &[f64],
    outputs: &[f64],
    opts: Options,
    mut observe: F,
) -> Result<(Vec<C64>, Stats)>
where
    S: OdeSystem,
    P: Projection,
    F: FnMut(f64, &[C64]) -> Result<()>,
{
    let t_end = *stops.last().unwrap_or(&t0);
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.iter().any(|&t| t < t0 || t > t_end) {
        return Err(Error::Integration { t: t0, reason: "output times must be sorted and within the run".into() });
    }
    let mut buf = vec![C64::new(0.0, 0.0); proj.len()];
    let mut next = 0;
    while next < outputs.len() && outputs[next] <= t0 {
        proj.project(y0, &mut buf);
        observe(outputs[next], &buf)?;
        next += 1;
    }
    let mut obs = AtTimes { outputs, next, buf, observe };
    integrate_steps(sys, proj, t0, y0, stops, opts, &mut obs)
}

/// Integrate to `t_end` and return only the final state.
pub fn solve<S: OdeSystem>(sys: &mut S, t0: f64, y0: &[C64], t_end: f64, opts: Options) -> Result<(Vec<C64>, Stats)> {
    let n = sys.dim();
    integrate(sys, &Identity(n), t0, y0, &[t_end], &[], opts, |_, _| Ok(()))
}

fn next_up(t: f64) -> f64 {
    if t.is_nan() || t == f64::INFINITY {
        return t;
    }
    if t == 0.0 {
        return f64::from_bits(1);
    }
    let bits = t.to_bits();
    if t > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}
