//! Parameter sweeps and figure data.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{run, Trajectory};
use crate::eigen::EigenTrace;
use crate::error::{Error, Result};
use crate::fit::{fit_exponential, DecayFit};
use crate::io;
use crate::presets::{preset, AMPLITUDES, FIGURES, STORAGE_LADDER};
use crate::scenario::{InitialState, Scenario, SolverKind};
use crate::wigner::wigner;

/// One run of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    /// Subdirectory holding the run's files, when written.
    pub label: String,
    pub value: f64,
    pub outcome: f64,
    pub retrieval_t: Option<f64>,
    pub wall_seconds: f64,
    pub rhs_evaluations: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    pub values: Vec<f64>,
    pub outcome: String,
    pub outcomes: Vec<f64>,
    /// Storage times `t_c2 + delta_t - t_c1` in seconds (storage sweeps only).
    pub storage_times: Vec<f64>,
    pub runs: Vec<RunRecord>,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exponential fit of `F_r` against storage time.
    pub fn fit_storage(&self) -> Result<DecayFit> {
        if self.storage_times.len() != self.outcomes.len() {
            return Err(Error::invalid("sweep", "not a storage sweep"));
        }
        fit_exponential(&self.storage_times, &self.outcomes)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let storage = !self.storage_times.is_empty();
        let mut header = vec![self.parameter.as_str()];
        if storage {
            header.push("t_s");
        }
        header.push(self.outcome.as_str());
        io::write_csv(
            path,
            &header,
            (0..self.len()).map(|k| {
                let mut row = vec![self.values[k]];
                if storage {
                    row.push(self.storage_times[k]);
                }
                row.push(self.outcomes[k]);
                row
            }),
        )
    }
}

/// Run `scenarios` in parallel; the first failure in input order is reported.
fn run_all(scenarios: Vec<Scenario>, values: &[f64], out: Option<&Path>) -> Vec<std::result::Result<Trajectory, (f64, Error)>> {
    scenarios
        .into_par_iter()
        .enumerate()
        .map(|(k, sc)| {
            let tr = run(&sc).map_err(|e| (values[k], e))?;
            if let Some(dir) = out {
                io::write_run(&dir.join(run_label(k)), &sc, &tr).map_err(|e| (values[k], e))?;
            }
            Ok(tr)
        })
        .collect()
}

fn run_label(k: usize) -> String {
    format!("run_{k:03}")
}

fn record(k: usize, value: f64, outcome: f64, tr: &Trajectory) -> RunRecord {
    RunRecord {
        label: run_label(k),
        value,
        outcome,
        retrieval_t: tr.retrieval.map(|r| r.t),
        wall_seconds: tr.diagnostics.wall_seconds,
        rhs_evaluations: tr.diagnostics.stats.rhs_evaluations,
        warnings: io::run_warnings(tr),
    }
}

fn sweep_error(value: f64, e: Error) -> Error {
    Error::Sweep { delay: value, source: Box::new(e) }
}

/// Best retrieval fidelity for each retrieval delay `delta_t` (internal time units).
pub fn storage_scan(base: &Scenario, delays: &[f64]) -> Result<SweepResult> {
    storage_scan_into(base, delays, None)
}

/// [`storage_scan`], writing every run into `out/run_NNN` when `out` is given.
pub fn storage_scan_into(base: &Scenario, delays: &[f64], out: Option<&Path>) -> Result<SweepResult> {
    if let Some(&d) = delays.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::invalid("delays", format!("{d} must be non-negative")));
    }
    if base.reference()?.is_none() {
        return Err(Error::invalid("initial_state", "a storage scan needs a cavity reference state"));
    }
    let scenarios = delays
        .iter()
        .map(|&d| base.with_delay(d).map_err(|e| sweep_error(d, e)))
        .collect::<Result<Vec<_>>>()?;
    let storage_times: Vec<f64> = scenarios.iter().map(|sc| sc.seconds(sc.schedule.storage_time())).collect();
    let results = run_all(scenarios, delays, out);
    let mut runs = Vec::with_capacity(delays.len());
    let mut outcomes = Vec::with_capacity(delays.len());
    for (k, r) in results.into_iter().enumerate() {
        let tr = r.map_err(|(d, e)| sweep_error(d, e))?;
        let f = tr.retrieval.map_or(f64::NAN, |b| b.fidelity);
        runs.push(record(k, delays[k], f, &tr));
        outcomes.push(f);
    }
    Ok(SweepResult { parameter: "delta_t".into(), values: delays.to_vec(), outcome: "F_r".into(), outcomes, storage_times, runs })
}

/// Final cavity occupation for each magnon damping rate (units of `omega_b`), via the moment equations.
pub fn damping_scan(base: &Scenario, kappa_m: &[f64]) -> Result<SweepResult> {
    damping_scan_into(base, kappa_m, None)
}

pub fn damping_scan_into(base: &Scenario, kappa_m: &[f64], out: Option<&Path>) -> Result<SweepResult> {
    if let Some(&k) = kappa_m.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::invalid("kappa_m", format!("{k} must be positive")));
    }
    let scenarios: Vec<Scenario> = kappa_m
        .iter()
        .map(|&k| {
            let mut sc = base.clone();
            sc.solver = SolverKind::Moments;
            sc.params.kappa_m = k;
            sc.physical.kappa_m = k * sc.physical.omega_b;
            sc
        })
        .collect();
    let results = run_all(scenarios, kappa_m, out);
    let mut runs = Vec::with_capacity(kappa_m.len());
    let mut outcomes = Vec::with_capacity(kappa_m.len());
    for (k, r) in results.into_iter().enumerate() {
        let tr = r.map_err(|(v, e)| sweep_error(v, e))?;
        let n = *tr.n_a.last().unwrap_or(&f64::NAN);
        runs.push(record(k, kappa_m[k], n, &tr));
        outcomes.push(n);
    }
    Ok(SweepResult { parameter: "kappa_m".into(), values: kappa_m.to_vec(), outcome: "N_a_final".into(), outcomes, storage_times: Vec::new(), runs })
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| if n == 1 { lo } else { (a + (b - a) * k as f64 / (n - 1) as f64).exp() }).collect()
}

/// Magnon damping values of the damping figure, in units of `omega_b`.
pub fn damping_ladder() -> Vec<f64> {
    logspace(1e-6, 1e-2, 9)
}

fn with_initial(base: &Scenario, initial: InitialState) -> Scenario {
    let mut sc = base.clone();
    sc.initial_state = initial;
    sc
}

fn simulate_into(sc: &Scenario, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Trajectory> {
    let tr = run(sc)?;
    io::write_run(dir, sc, &tr)?;
    files.push(dir.to_path_buf());
    Ok(tr)
}

/// Wigner grids of the initial and retrieved cavity states.
fn wigner_pair(sc: &Scenario, tr: &Trajectory, dir: &Path, files: &mut Vec<PathBuf>) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for label in ["initial", "retrieval"] {
        if let Some(s) = tr.snapshot(label) {
            let grid = wigner(&s.rho_a, &sc.wigner);
            let path = dir.join(format!("wigner_{label}.csv"));
            io::write_wigner(&path, &grid)?;
            warnings.extend(io::wigner_warning(&grid));
            files.push(path);
        }
    }
    Ok(warnings)
}

/// Smallest even cavity cutoff that holds squeezed vacuum `r` within the truncation `limit`.
pub fn squeezed_cutoff(r: f64, limit: f64) -> usize {
    (4..200).step_by(2).find(|&n| crate::states::squeezed_vacuum_with_limit(r, n, limit).is_ok()).unwrap_or(200)
}

/// Write every file needed to redraw one figure; returns the paths written.
pub fn run_figure(name: &str, out: &Path) -> Result<Vec<PathBuf>> {
    if !FIGURES.contains(&name) {
        return Err(Error::invalid("preset", format!("unknown preset `{name}`; expected one of {}", FIGURES.join(", "))));
    }
    let base = preset(name)?;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    match name {
        "fig1b" => {
            let path = out.join("pulses.csv");
            io::write_pulses(&path, &base.schedule, &base.grid.times())?;
            files.push(path);
            simulate_into(&base, &out.join("unitary"), &mut files)?;
        }
        "fig2" => {
            let trace = EigenTrace::adaptive(&base.schedule, base.grid.t_start, base.grid.t_end);
            let path = out.join("eigen.csv");
            io::write_eigen(&path, &trace)?;
            files.push(path);
            simulate_into(&base, &out.join("unitary"), &mut files)?;
            let mut coh = with_initial(&base, InitialState::Coherent { alpha: 0.5 });
            coh.cutoffs = [6, 4, 6];
            simulate_into(&coh, &out.join("coherent_0.5"), &mut files)?;
        }
        "fig3" => {
            for &a in &AMPLITUDES {
                let sc = with_initial(&base, InitialState::Coherent { alpha: a });
                let dir = out.join(format!("coherent_{a}"));
                let tr = simulate_into(&sc, &dir, &mut files)?;
                warnings.extend(wigner_pair(&sc, &tr, &dir, &mut files)?);
            }
        }
        "fig4" => {
            for &a in &AMPLITUDES {
                let sc = with_initial(&base, InitialState::Cat { alpha: a });
                let dir = out.join(format!("cat_{a}"));
                let tr = simulate_into(&sc, &dir, &mut files)?;
                warnings.extend(wigner_pair(&sc, &tr, &dir, &mut files)?);
            }
            // squeezed inputs need far larger cutoffs than a full density matrix allows; the
            // moment solver's channel readout gives their exact cavity state
            for &r in &AMPLITUDES {
                let mut sc = with_initial(&base, InitialState::Squeezed { r });
                sc.solver = SolverKind::Moments;
                sc.cutoffs[0] = squeezed_cutoff(r, sc.truncation_limit);
                let dir = out.join(format!("squeezed_{r}"));
                let tr = simulate_into(&sc, &dir, &mut files)?;
                warnings.extend(wigner_pair(&sc, &tr, &dir, &mut files)?);
            }
        }
        "fig5" => {
            let tr = simulate_into(&base, &out.join("delayed"), &mut files)?;
            warnings.extend(wigner_pair(&base, &tr, &out.join("delayed"), &mut files)?);
            let mut scan_base = base.with_delay(0.0)?;
            scan_base.solver = SolverKind::Moments;
            let delays: Vec<f64> = STORAGE_LADDER.iter().map(|k| k * scan_base.schedule.t_c2).collect();
            let sweep = storage_scan_into(&scan_base, &delays, Some(&out.join("storage")))?;
            let path = out.join("storage.csv");
            sweep.write_csv(&path)?;
            files.push(path);
            let fit = sweep.fit_storage()?;
            let path = out.join("storage_fit.json");
            io::write_json(&path, &fit)?;
            files.push(path);
            let path = out.join("storage_sweep.json");
            io::write_json(&path, &sweep)?;
            files.push(path);
        }
        "fig6" => {
            let sweep = damping_scan_into(&base, &damping_ladder(), Some(&out.join("damping")))?;
            let path = out.join("damping.csv");
            sweep.write_csv(&path)?;
            files.push(path);
            let path = out.join("damping_sweep.json");
            io::write_json(&path, &sweep)?;
            files.push(path);
        }
        _ => unreachable!("checked against FIGURES"),
    }
    #[derive(Serialize)]
    struct FigureMeta<'a> {
        figure: &'a str,
        created_unix: u64,
        scenario: &'a Scenario,
        files: Vec<String>,
        warnings: Vec<String>,
    }
    let rel: Vec<String> = files.iter().map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string()).collect();
    let path = out.join("figure.json");
    io::write_json(&path, &FigureMeta { figure: name, created_unix: io::unix_time(), scenario: &base, files: rel, warnings })?;
    files.push(path);
    Ok(files)
}
