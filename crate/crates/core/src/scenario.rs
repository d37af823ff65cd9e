//! Validated run description and its TOML ingestion.
//!
//! A scenario file has the sections `[params]`, `[schedule]`,
//! `[initial_state]`, `[solver]` and `[grid]`. Dimensioned keys carry their
//! unit as a suffix:
//!
//! | suffix      | meaning                                       |
//! |-------------|-----------------------------------------------|
//! | `_hz`       | cyclic frequency in Hz, multiplied by `2 pi`   |
//! | `_per_s`    | angular frequency or rate in 1/s (rad/s)      |
//! | `_wb`       | rate or time already in units of `omega_b`    |
//! | `_2pi_wb`   | rate given as `2 pi x / omega_b`              |
//! | `_s`        | time in seconds                               |
//! | `_periods`  | time in mechanical periods, `f_b t`           |
//! | `_k`        | temperature in kelvin                         |
//!
//! `omega_b` itself must be given in SI (`omega_b_hz` or `omega_b_per_s`).

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::ode::Tolerances;
use crate::pulses::PulseSchedule;
use crate::states::{StateSpec, DEFAULT_TRUNCATION_LIMIT};
use crate::units::{thermal_occupation, to_internal_units, BathOccupations, InternalParams, PhysicalParams};
use crate::wigner::GridSpec;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Schrodinger,
    Lindblad,
    Moments,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Schrodinger => "schrodinger",
            SolverKind::Lindblad => "lindblad",
            SolverKind::Moments => "moments",
        }
    }
}

/// Initial state of the three modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialState {
    Fock { n_a: usize, n_m: usize, n_b: usize },
    Coherent { alpha: f64 },
    Cat { alpha: f64 },
    Squeezed { r: f64 },
}

impl InitialState {
    /// The cavity factor when magnon and phonon start in vacuum.
    pub fn cavity_spec(&self) -> Option<StateSpec> {
        match *self {
            InitialState::Fock { n_a, n_m: 0, n_b: 0 } => Some(StateSpec::Fock { n: n_a }),
            InitialState::Fock { .. } => None,
            InitialState::Coherent { alpha } => Some(StateSpec::coherent(alpha)),
            InitialState::Cat { alpha } => Some(StateSpec::cat(alpha)),
            InitialState::Squeezed { r } => Some(StateSpec::squeezed(r)),
        }
    }
}

/// Simulated interval and coarse output spacing (internal time).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub stride: f64,
}

impl TimeGrid {
    /// Output times `t_start, t_start + stride, ...` ending exactly at `t_end`.
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_end - self.t_start) / self.stride).floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|k| self.t_start + k as f64 * self.stride).collect();
        if let Some(&last) = v.last() {
            if self.t_end - last > 1e-9 * self.stride {
                v.push(self.t_end);
            } else {
                *v.last_mut().unwrap() = self.t_end;
            }
        }
        v
    }
}

/// Ramp widths added on each side of the protocol for the default window.
pub const DEFAULT_WINDOW_PAD: f64 = 4.0;
/// Number of coarse output intervals when no stride is given.
pub const DEFAULT_OUTPUT_POINTS: usize = 2000;
/// Spacing used while searching for the retrieval maximum.
pub const DEFAULT_RETRIEVAL_STRIDE: f64 = 0.05;
/// Default threshold on the top-level population of any mode.
pub const DEFAULT_MONITOR_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_CUTOFFS: [usize; 3] = [10, 6, 10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub physical: PhysicalParams,
    pub params: InternalParams,
    /// Schedule in internal units, after compression.
    pub schedule: PulseSchedule,
    pub time_compression: f64,
    pub initial_state: InitialState,
    pub cutoffs: [usize; 3],
    pub solver: SolverKind,
    pub rwa: bool,
    pub grid: TimeGrid,
    pub retrieval_stride: f64,
    pub tol: Tolerances,
    pub truncation_limit: f64,
    pub monitor_threshold: f64,
    pub wigner: GridSpec,
}

impl Scenario {
    /// Scenario with default solver settings and the default window.
    pub fn new(name: &str, physical: PhysicalParams, schedule: PulseSchedule, initial_state: InitialState, solver: SolverKind) -> Result<Self> {
        let params = to_internal_units(&physical)?;
        let (t_start, t_end) = schedule.default_window(DEFAULT_WINDOW_PAD);
        let sc = Scenario {
            name: name.to_string(),
            physical,
            params,
            schedule,
            time_compression: 1.0,
            initial_state,
            cutoffs: DEFAULT_CUTOFFS,
            solver,
            rwa: true,
            grid: TimeGrid { t_start, t_end, stride: (t_end - t_start) / DEFAULT_OUTPUT_POINTS as f64 },
            retrieval_stride: DEFAULT_RETRIEVAL_STRIDE,
            tol: Tolerances::default(),
            truncation_limit: DEFAULT_TRUNCATION_LIMIT,
            monitor_threshold: DEFAULT_MONITOR_THRESHOLD,
            wigner: GridSpec::default(),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.schedule.validate()?;
        if self.solver != SolverKind::Moments {
            for (k, label) in ["cutoff_a", "cutoff_m", "cutoff_b"].iter().enumerate() {
                if self.cutoffs[k] < 2 {
                    return Err(Error::invalid(label, "must keep at least 2 levels"));
                }
            }
        }
        if !(self.grid.t_start < self.grid.t_end) {
            return Err(Error::invalid("t_start", "must be earlier than t_end"));
        }
        if !(self.grid.stride > 0.0) {
            return Err(Error::invalid("stride", "must be positive"));
        }
        if !(self.retrieval_stride > 0.0) {
            return Err(Error::invalid("retrieval_stride", "must be positive"));
        }
        if !(self.tol.rtol > 0.0 && self.tol.atol > 0.0) {
            return Err(Error::invalid("rtol", "tolerances must be positive"));
        }
        if !(self.time_compression > 0.0) {
            return Err(Error::invalid("time_compression", "must be positive"));
        }
        if self.solver == SolverKind::Moments && !self.rwa {
            return Err(Error::invalid("rwa", "the moment solver needs the rotating-wave approximation"));
        }
        if let InitialState::Fock { n_a, n_m, n_b } = self.initial_state {
            if self.solver != SolverKind::Moments {
                for (n, c, key) in [(n_a, self.cutoffs[0], "n_a"), (n_m, self.cutoffs[1], "n_m"), (n_b, self.cutoffs[2], "n_b")] {
                    if n >= c {
                        return Err(Error::invalid(key, format!("level {n} needs more than {c} levels")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<FockSpace> {
        FockSpace::new(self.cutoffs[0], self.cutoffs[1], self.cutoffs[2])
    }

    /// Internal damping rates `(kappa_a, kappa_m, kappa_b)`.
    pub fn kappas(&self) -> [f64; 3] {
        [self.params.kappa_a, self.params.kappa_m, self.params.kappa_b]
    }

    /// Thermal occupations; modes without damping are given zero.
    pub fn bath(&self) -> Result<BathOccupations> {
        let p = &self.physical;
        let occ = |omega: f64, kappa: f64| -> Result<f64> {
            if kappa == 0.0 || p.t_bath == 0.0 {
                Ok(0.0)
            } else {
                thermal_occupation(omega, p.t_bath)
            }
        };
        Ok(BathOccupations {
            n_a: occ(p.omega_a, p.kappa_a)?,
            n_m: occ(p.omega_m, p.kappa_m)?,
            n_b: occ(p.omega_b, p.kappa_b)?,
        })
    }

    /// Cavity reference amplitudes on the cavity cutoff, if the initial
    /// state is a cavity state with empty magnon and phonon.
    pub fn reference(&self) -> Result<Option<Vec<C64>>> {
        match self.initial_state.cavity_spec() {
            Some(spec) => Ok(Some(spec.amplitudes(self.cutoffs[0], self.truncation_limit)?)),
            None => Ok(None),
        }
    }

    /// Same scenario with a retrieval delay; the window end moves with it.
    pub fn with_delay(&self, delta_t: f64) -> Result<Self> {
        let mut sc = self.clone();
        let old_end = self.schedule.default_window(DEFAULT_WINDOW_PAD).1;
        sc.schedule = self.schedule.with_delay(delta_t);
        let new_end = sc.schedule.default_window(DEFAULT_WINDOW_PAD).1;
        sc.grid.t_end = self.grid.t_end + (new_end - old_end);
        sc.validate()?;
        Ok(sc)
    }

    /// Start of the retrieval window, the center of the second pulse.
    pub fn retrieval_start(&self) -> f64 {
        self.schedule.retrieval_center()
    }

    /// Internal time to seconds.
    pub fn seconds(&self, t: f64) -> f64 {
        self.params.time_to_si(t)
    }
}

/// Keys read from one TOML table, with unknown-key detection.
struct Table<'a> {
    section: &'static str,
    map: BTreeMap<String, &'a toml::Value>,
    used: std::collections::BTreeSet<String>,
}

impl<'a> Table<'a> {
    fn new(section: &'static str, value: Option<&'a toml::Value>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(v) = value {
            let t = v.as_table().ok_or_else(|| Error::Parse(format!("[{section}] must be a table")))?;
            for (k, v) in t {
                map.insert(k.clone(), v);
            }
        }
        Ok(Table { section, map, used: Default::default() })
    }

    fn qualified(&self, key: &str) -> String {
        format!("{}.{}", self.section, key)
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => {
                self.used.insert(key.to_string());
                let x = match v {
                    toml::Value::Float(f) => *f,
                    toml::Value::Integer(i) => *i as f64,
                    _ => return Err(Error::invalid(&self.qualified(key), "expected a number")),
                };
                if !x.is_finite() {
                    return Err(Error::invalid(&self.qualified(key), "must be finite"));
                }
                Ok(Some(x))
            }
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => {
                self.used.insert(key.to_string());
                v.as_str().map(|s| Some(s.to_string())).ok_or_else(|| Error::invalid(&self.qualified(key), "expected a string"))
            }
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => {
                self.used.insert(key.to_string());
                v.as_bool().map(Some).ok_or_else(|| Error::invalid(&self.qualified(key), "expected true or false"))
            }
        }
    }

    fn integer(&mut self, key: &str) -> Result<Option<usize>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => {
                self.used.insert(key.to_string());
                match v.as_integer() {
                    Some(i) if i >= 0 => Ok(Some(i as usize)),
                    _ => Err(Error::invalid(&self.qualified(key), "expected a non-negative integer")),
                }
            }
        }
    }

    fn integer_array3(&mut self, key: &str) -> Result<Option<[usize; 3]>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => {
                self.used.insert(key.to_string());
                let arr = v.as_array().ok_or_else(|| Error::invalid(&self.qualified(key), "expected [n_a, n_m, n_b]"))?;
                if arr.len() != 3 {
                    return Err(Error::invalid(&self.qualified(key), "expected three entries"));
                }
                let mut out = [0usize; 3];
                for (k, x) in arr.iter().enumerate() {
                    out[k] = match x.as_integer() {
                        Some(i) if i >= 0 => i as usize,
                        _ => return Err(Error::invalid(&self.qualified(key), "entries must be non-negative integers")),
                    };
                }
                Ok(Some(out))
            }
        }
    }

    /// A quantity given under exactly one of several suffixed keys.
    fn suffixed(&mut self, base: &str, suffixes: &[&str]) -> Result<Option<(String, f64)>> {
        let mut found: Option<(String, f64)> = None;
        for s in suffixes {
            let key = format!("{base}{s}");
            if let Some(v) = self.number(&key)? {
                if let Some((other, _)) = &found {
                    return Err(Error::invalid(&self.qualified(&key), format!("conflicts with {}", self.qualified(other))));
                }
                found = Some((s.to_string(), v));
            }
        }
        Ok(found)
    }

    fn finish(&self) -> Result<()> {
        for k in self.map.keys() {
            if !self.used.contains(k) {
                return Err(Error::UnknownKey(self.qualified(k)));
            }
        }
        Ok(())
    }
}

const RATE_SUFFIXES: [&str; 4] = ["_hz", "_per_s", "_wb", "_2pi_wb"];
const TIME_SUFFIXES: [&str; 3] = ["_s", "_wb", "_periods"];

/// Convert a suffixed rate to rad/s.
fn rate_si(suffix: &str, v: f64, omega_b: f64) -> f64 {
    match suffix {
        "_hz" => TAU * v,
        "_per_s" => v,
        "_wb" => v * omega_b,
        "_2pi_wb" => v * omega_b / TAU,
        _ => unreachable!("unknown rate suffix {suffix}"),
    }
}

/// Convert a suffixed time to internal units.
fn time_internal(suffix: &str, v: f64, omega_b: f64) -> f64 {
    match suffix {
        "_s" => v * omega_b,
        "_wb" => v,
        "_periods" => v * TAU,
        _ => unreachable!("unknown time suffix {suffix}"),
    }
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::MissingKey(key.to_string()))
}

/// Parse and validate a scenario from TOML text.
pub fn parse_scenario(text: &str, name: &str) -> Result<Scenario> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    for k in doc.keys() {
        if !["params", "schedule", "initial_state", "solver", "grid", "name"].contains(&k.as_str()) {
            return Err(Error::UnknownKey(k.clone()));
        }
    }
    let name = match doc.get("name") {
        Some(v) => v.as_str().ok_or_else(|| Error::invalid("name", "expected a string"))?.to_string(),
        None => name.to_string(),
    };

    let mut p = Table::new("params", doc.get("params"))?;
    let omega_b = match p.suffixed("omega_b", &["_hz", "_per_s"])? {
        Some((s, v)) => rate_si(&s, v, 1.0),
        None => return Err(Error::MissingKey("params.omega_b_hz".into())),
    };
    if !(omega_b > 0.0) {
        return Err(Error::invalid("params.omega_b", "must be positive"));
    }
    let rate = |t: &mut Table, base: &str, default: Option<f64>| -> Result<Option<f64>> {
        match t.suffixed(base, &RATE_SUFFIXES)? {
            Some((s, v)) => Ok(Some(rate_si(&s, v, omega_b))),
            None => Ok(default),
        }
    };
    let omega_a = required(rate(&mut p, "omega_a", None)?, "params.omega_a_hz")?;
    let omega_m = required(rate(&mut p, "omega_m", None)?, "params.omega_m_hz")?;
    let kappa_a = rate(&mut p, "kappa_a", Some(0.0))?.unwrap();
    let kappa_m = rate(&mut p, "kappa_m", Some(0.0))?.unwrap();
    let kappa_b = rate(&mut p, "kappa_b", Some(0.0))?.unwrap();
    let g_ma = rate(&mut p, "g_ma", None)?;
    let g_mb = rate(&mut p, "g_mb", Some(0.0))?.unwrap();
    let t_bath = p.number("t_bath_k")?.unwrap_or(0.0);
    p.finish()?;

    let mut s = Table::new("schedule", doc.get("schedule"))?;
    let omega0 = required(rate(&mut s, "omega0", None)?, "schedule.omega0_2pi_wb")? / omega_b;
    let time = |t: &mut Table, base: &str, default: Option<f64>| -> Result<Option<f64>> {
        match t.suffixed(base, &TIME_SUFFIXES)? {
            Some((suf, v)) => Ok(Some(time_internal(&suf, v, omega_b))),
            None => Ok(default),
        }
    };
    let width = required(time(&mut s, "width", None)?, "schedule.width_wb")?;
    let t_c1 = required(time(&mut s, "t_c1", None)?, "schedule.t_c1_wb")?;
    let t_c2 = required(time(&mut s, "t_c2", None)?, "schedule.t_c2_wb")?;
    let tau = required(time(&mut s, "tau", None)?, "schedule.tau_wb")?;
    let tau_ch = required(time(&mut s, "tau_ch", None)?, "schedule.tau_ch_wb")?;
    let delta_t = time(&mut s, "delta_t", Some(0.0))?.unwrap();
    let kappa_delta = required(s.number("kappa_delta")?, "schedule.kappa_delta")?;
    let h_delta = required(s.number("h_delta")?, "schedule.h_delta")?;
    let compression = s.number("time_compression")?.unwrap_or(1.0);
    s.finish()?;
    if !(compression > 0.0) {
        return Err(Error::invalid("schedule.time_compression", "must be positive"));
    }

    let mut schedule = PulseSchedule::new(omega0, width, t_c1, t_c2, tau, tau_ch, kappa_delta, h_delta).with_delay(delta_t);
    schedule = schedule.compressed(compression);
    if let Some(g) = g_ma {
        schedule.g_ma = g / omega_b;
    }
    let physical = PhysicalParams {
        omega_a,
        omega_m,
        omega_b,
        g_ma: schedule.g_ma * omega_b,
        g_mb,
        kappa_a,
        kappa_m,
        kappa_b,
        t_bath,
    };
    physical.validate().map_err(|e| match e {
        Error::InvalidValue { key, reason } => Error::InvalidValue { key: format!("params.{key}"), reason },
        other => other,
    })?;
    schedule.validate().map_err(|e| match e {
        Error::InvalidValue { key, reason } => Error::InvalidValue { key: format!("schedule.{key}"), reason },
        other => other,
    })?;

    let mut st = Table::new("initial_state", doc.get("initial_state"))?;
    let kind = required(st.string("kind")?, "initial_state.kind")?;
    let initial_state = match kind.as_str() {
        "fock" => InitialState::Fock {
            n_a: st.integer("n_a")?.unwrap_or(0),
            n_m: st.integer("n_m")?.unwrap_or(0),
            n_b: st.integer("n_b")?.unwrap_or(0),
        },
        "coherent" => InitialState::Coherent { alpha: required(st.number("alpha")?, "initial_state.alpha")? },
        "cat" => InitialState::Cat { alpha: required(st.number("alpha")?, "initial_state.alpha")? },
        "squeezed" => InitialState::Squeezed { r: required(st.number("r")?, "initial_state.r")? },
        other => return Err(Error::invalid("initial_state.kind", format!("unknown state `{other}`"))),
    };
    let truncation_limit = st.number("truncation_limit")?.unwrap_or(DEFAULT_TRUNCATION_LIMIT);
    st.finish()?;

    let mut so = Table::new("solver", doc.get("solver"))?;
    let solver = match so.string("kind")?.as_deref() {
        None | Some("lindblad") => SolverKind::Lindblad,
        Some("schrodinger") => SolverKind::Schrodinger,
        Some("moments") => SolverKind::Moments,
        Some(other) => return Err(Error::invalid("solver.kind", format!("unknown solver `{other}`"))),
    };
    let cutoffs = so.integer_array3("cutoffs")?.unwrap_or(DEFAULT_CUTOFFS);
    let rwa = so.boolean("rwa")?.unwrap_or(true);
    let tol = Tolerances {
        rtol: so.number("rtol")?.unwrap_or(Tolerances::default().rtol),
        atol: so.number("atol")?.unwrap_or(Tolerances::default().atol),
    };
    let monitor_threshold = so.number("monitor_threshold")?.unwrap_or(DEFAULT_MONITOR_THRESHOLD);
    so.finish()?;

    let mut g = Table::new("grid", doc.get("grid"))?;
    let (d0, d1) = schedule.default_window(DEFAULT_WINDOW_PAD);
    let t_start = time(&mut g, "t_start", Some(d0))?.unwrap();
    let t_end = time(&mut g, "t_end", Some(d1))?.unwrap();
    let stride = time(&mut g, "stride", Some((t_end - t_start) / DEFAULT_OUTPUT_POINTS as f64))?.unwrap();
    let retrieval_stride = time(&mut g, "retrieval_stride", Some(DEFAULT_RETRIEVAL_STRIDE))?.unwrap();
    let mut wigner = GridSpec::default();
    if let Some(x) = g.number("wigner_extent")? {
        wigner.x_min = -x;
        wigner.x_max = x;
        wigner.p_min = -x;
        wigner.p_max = x;
    }
    if let Some(n) = g.integer("wigner_points")? {
        wigner.nx = n;
        wigner.np = n;
    }
    g.finish()?;

    let params = to_internal_units(&physical)?;
    let sc = Scenario {
        name,
        physical,
        params,
        schedule,
        time_compression: compression,
        initial_state,
        cutoffs,
        solver,
        rwa,
        grid: TimeGrid { t_start, t_end, stride },
        retrieval_stride,
        tol,
        truncation_limit,
        monitor_threshold,
        wigner,
    };
    sc.validate()?;
    if let Some(spec) = sc.initial_state.cavity_spec() {
        if sc.solver != SolverKind::Moments {
            spec.amplitudes(sc.cutoffs[0], sc.truncation_limit)?;
        }
    }
    Ok(sc)
}

/// Read and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario(&text, stem)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"
[params]
omega_a_hz = 10e9
omega_m_hz = 10e9
omega_b_hz = 10e6
kappa_a_per_s = 0.0
kappa_m_per_s = 1e4
kappa_b_per_s = 100.0
t_bath_k = 1e-3

[schedule]
omega0_2pi_wb = 0.1
width_s = 0.01e-3
t_c1_s = -0.061e-3
t_c2_s = 0.061e-3
tau_ch_s = 0.016e-3
tau_s = 0.11e-3
kappa_delta = 14.05
h_delta = 13.94

[initial_state]
kind = "coherent"
alpha = 1.0

[solver]
kind = "lindblad"
"#;

    #[test]
    fn fig3_config_parses_with_defaults() {
        let sc = parse_scenario(FIG3, "fig3").unwrap();
        assert_eq!(sc.solver, SolverKind::Lindblad);
        assert!(sc.rwa);
        assert_eq!(sc.cutoffs, DEFAULT_CUTOFFS);
        assert!((sc.schedule.omega0 - 0.1 / TAU).abs() < 1e-15);
        assert!((sc.schedule.t_c1 + 0.061e-3 * TAU * 10e6).abs() < 1e-9);
        assert!((sc.params.kappa_b - 100.0 / (TAU * 10e6)).abs() < 1e-18);
        let bath = sc.bath().unwrap();
        assert!((bath.n_b - 1.62).abs() < 0.02);
        assert_eq!(bath.n_a, 0.0);
        assert!(bath.n_m < 1e-200);
        assert!(sc.grid.t_start < sc.schedule.t_c1 && sc.grid.t_end > sc.schedule.t_c2);
    }

    #[test]
    fn negative_kappa_b_names_the_key() {
        let text = FIG3.replace("kappa_b_per_s = 100.0", "kappa_b_per_s = -1.0");
        let err = parse_scenario(&text, "x").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("kappa_b"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = FIG3.replace("kappa_delta = 14.05", "kappa_delta = 14.05\nkapa_delta = 1.0");
        match parse_scenario(&text, "x") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "schedule.kapa_delta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_key_is_reported() {
        let text = FIG3.replace("h_delta = 13.94", "");
        match parse_scenario(&text, "x") {
            Err(Error::MissingKey(k)) => assert_eq!(k, "schedule.h_delta"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conflicting_units_are_rejected() {
        let text = FIG3.replace("width_s = 0.01e-3", "width_s = 0.01e-3\nwidth_wb = 3.0");
        assert!(parse_scenario(&text, "x").is_err());
    }

    #[test]
    fn periods_and_compression() {
        let text = FIG3
            .replace("width_s = 0.01e-3", "width_periods = 108.7")
            .replace("[schedule]", "[schedule]\ntime_compression = 5.0");
        let sc = parse_scenario(&text, "x").unwrap();
        assert!((sc.schedule.width - 108.7 * TAU / 5.0).abs() < 1e-9);
        assert_eq!(sc.time_compression, 5.0);
    }

    #[test]
    fn explicit_rwa_false_and_grid() {
        let text = FIG3.replace("kind = \"lindblad\"", "kind = \"schrodinger\"\nrwa = false\ncutoffs = [12, 2, 2]")
            + "\n[grid]\nt_start_wb = -5000.0\nt_end_wb = 5000.0\nstride_wb = 10.0\n";
        let sc = parse_scenario(&text, "x").unwrap();
        assert!(!sc.rwa);
        assert_eq!(sc.cutoffs, [12, 2, 2]);
        assert_eq!(sc.grid, TimeGrid { t_start: -5000.0, t_end: 5000.0, stride: 10.0 });
    }

    #[test]
    fn moments_require_rwa() {
        let text = FIG3.replace("kind = \"lindblad\"", "kind = \"moments\"\nrwa = false");
        assert!(parse_scenario(&text, "x").is_err());
    }

    #[test]
    fn truncated_initial_state_is_a_validation_error() {
        let text = FIG3.replace("alpha = 1.0", "alpha = 3.0");
        let err = parse_scenario(&text, "x").unwrap_err();
        assert!(matches!(err, Error::Truncation(_)), "{err:?}");
        assert!(err.is_validation());
    }

    #[test]
    fn grid_times_end_exactly() {
        let g = TimeGrid { t_start: 0.0, t_end: 1.0, stride: 0.3 };
        assert_eq!(g.times(), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        let g = TimeGrid { t_start: 0.0, t_end: 1.0, stride: 0.25 };
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn delay_extends_window() {
        let sc = parse_scenario(FIG3, "x").unwrap();
        let d = sc.with_delay(1000.0).unwrap();
        assert!((d.grid.t_end - sc.grid.t_end - 1000.0).abs() < 1e-9);
        assert_eq!(d.schedule.delta_t, 1000.0);
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig3.toml");
        std::fs::write(&path, FIG3).unwrap();
        let sc = load_scenario(&path).unwrap();
        assert_eq!(sc.name, "fig3");
        assert!(load_scenario(&dir.path().join("missing.toml")).is_err());
    }
}
