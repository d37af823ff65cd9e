//! Result files: CSV tables, JSON metadata and NPY complex dumps.
//!
//! Complex matrices are written as NPY version 1.0 with dtype `<c16`
//! (little-endian pairs of `f64`, real part first) in C order, which
//! `numpy.load` reads directly.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{Diagnostics, FinalState, Retrieval, Trajectory};
use crate::eigen::EigenTrace;
use crate::error::{Error, Result};
use crate::pulses::PulseSchedule;
use crate::scenario::Scenario;
use crate::wigner::{WignerGrid, INTEGRAL_BOUNDS};
use crate::C64;

const NPY_MAGIC: &[u8] = b"\x93NUMPY";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Write a CSV table with a header row; values use Rust's shortest round-trip formatting.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a numeric CSV written by [`write_csv`]: header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(str::to_string).collect(),
        None => return Err(Error::Parse(format!("{} is empty", path.display()))),
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), k + 2)))?);
    }
    Ok((header, rows))
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "N_a", "N_m", "N_b", "fidelity"];

/// `t, N_a, N_m, N_b, fidelity` with `t` in units of `1 / omega_b`.
pub fn write_trajectory(path: &Path, tr: &Trajectory) -> Result<()> {
    write_csv(path, &TRAJECTORY_HEADER, (0..tr.len()).map(|k| vec![tr.times[k], tr.n_a[k], tr.n_m[k], tr.n_b[k], tr.fidelity[k]]))
}

pub const PULSES_HEADER: [&str; 5] = ["t", "Omega_p", "delta_a", "delta_m", "delta_s"];

/// Pump Rabi frequency and detunings on `times`.
pub fn write_pulses(path: &Path, s: &PulseSchedule, times: &[f64]) -> Result<()> {
    write_csv(
        path,
        &PULSES_HEADER,
        times.iter().map(|&t| {
            let (da, dm) = s.detunings(t);
            vec![t, s.pump(t), da, dm, s.delta_s(t)]
        }),
    )
}

pub const EIGEN_HEADER: [&str; 7] = ["t", "S0", "S+", "S-", "lambda0", "lambda1", "lambda2"];

pub fn write_eigen(path: &Path, trace: &EigenTrace) -> Result<()> {
    write_csv(
        path,
        &EIGEN_HEADER,
        (0..trace.times.len()).map(|k| {
            let (s, l) = (trace.stokes[k], trace.instantaneous[k]);
            vec![trace.times[k], s[0], s[1], s[2], l[0], l[1], l[2]]
        }),
    )
}

pub const WIGNER_HEADER: [&str; 3] = ["x", "p", "W"];

pub fn write_wigner(path: &Path, grid: &WignerGrid) -> Result<()> {
    let np = grid.ps.len();
    write_csv(path, &WIGNER_HEADER, (0..grid.values.len()).map(|k| vec![grid.xs[k / np], grid.ps[k % np], grid.values[k]]))
}

/// Write a complex matrix (or a vector when `cols` is `None`) as NPY `<c16`.
pub fn write_npy(path: &Path, data: &[C64], rows: usize, cols: Option<usize>) -> Result<()> {
    let shape = match cols {
        Some(c) => {
            if rows * c != data.len() {
                return Err(Error::invalid("npy", format!("shape ({rows}, {c}) does not match {} values", data.len())));
            }
            format!("({rows}, {c})")
        }
        None => format!("({rows},)"),
    };
    let mut header = format!("{{'descr': '<c16', 'fortran_order': False, 'shape': {shape}, }}");
    // magic (6) + version (2) + length (2) + header + newline, padded to 64 bytes
    let unpadded = 10 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    let mut w = create(path)?;
    w.write_all(NPY_MAGIC)?;
    w.write_all(&[1, 0])?;
    w.write_all(&(header.len() as u16).to_le_bytes())?;
    w.write_all(header.as_bytes())?;
    for c in data {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_npy(path: &Path, m: &DMatrix<C64>) -> Result<()> {
    let (r, c) = m.shape();
    let data: Vec<C64> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    write_npy(path, &data, r, Some(c))
}

/// Read an NPY `<c16` array written by [`write_npy`]: shape and C-order data.
pub fn read_npy(path: &Path) -> Result<(Vec<usize>, Vec<C64>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |why: &str| Error::Parse(format!("{}: {why}", path.display()));
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err(bad("not an NPY file"));
    }
    let (hlen, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize, 12),
        _ => return Err(bad("unsupported NPY version")),
    };
    let header = std::str::from_utf8(bytes.get(start..start + hlen).ok_or_else(|| bad("truncated header"))?).map_err(|_| bad("header is not UTF-8"))?;
    if !header.contains("'descr': '<c16'") {
        return Err(bad("dtype must be '<c16'"));
    }
    if header.contains("'fortran_order': True") {
        return Err(bad("Fortran order is not supported"));
    }
    let shape_txt = header.split("'shape':").nth(1).and_then(|s| s.split(')').next()).ok_or_else(|| bad("missing shape"))?;
    let shape: Vec<usize> = shape_txt
        .trim_start_matches([' ', '('])
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| bad("bad shape")))
        .collect::<Result<_>>()?;
    let count: usize = shape.iter().product();
    let body = &bytes[start + hlen..];
    if body.len() != 16 * count {
        return Err(bad("data length does not match the shape"));
    }
    let f = |k: usize| f64::from_le_bytes(body[k..k + 8].try_into().expect("8 bytes"));
    let data = (0..count).map(|i| C64::new(f(16 * i), f(16 * i + 8))).collect();
    Ok((shape, data))
}

/// Load a square single-mode density matrix, or a state vector promoted to `|psi><psi|`.
pub fn read_density(path: &Path) -> Result<DMatrix<C64>> {
    let (shape, data) = read_npy(path)?;
    match shape.as_slice() {
        [n, m] if n == m => Ok(DMatrix::from_fn(*n, *n, |i, j| data[i * n + j])),
        [n] => Ok(DMatrix::from_fn(*n, *n, |i, j| data[i] * data[j].conj())),
        _ => Err(Error::Parse(format!("{}: expected a square matrix or a vector, got shape {shape:?}", path.display()))),
    }
}

#[derive(Serialize)]
struct SnapshotMeta<'a> {
    label: &'a str,
    t: f64,
    t_seconds: f64,
    file: String,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    program: &'static str,
    version: &'static str,
    created_unix: u64,
    scenario: &'a Scenario,
    diagnostics: &'a Diagnostics,
    retrieval: Option<Retrieval>,
    retrieval_t_seconds: Option<f64>,
    snapshots: Vec<SnapshotMeta<'a>>,
    final_state: &'static str,
    npy_layout: &'static str,
    warnings: Vec<String>,
}

pub fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Warnings raised by the run monitors.
pub fn run_warnings(tr: &Trajectory) -> Vec<String> {
    let d = &tr.diagnostics;
    let mut out = Vec::new();
    if d.truncation_flagged {
        out.push(format!("top Fock levels reached populations {:?}", d.max_top_level));
    }
    if d.positivity_flagged {
        out.push(format!("negative eigenvalues: cavity {:e}, final {:?}", d.min_eigenvalue_cavity, d.min_eigenvalue_final));
    }
    out
}

/// Write `trajectory.csv`, `meta.json`, one `rho_<label>.npy` per snapshot and the final state.
pub fn write_run(dir: &Path, sc: &Scenario, tr: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory(&dir.join("trajectory.csv"), tr)?;
    let mut snaps = Vec::new();
    for s in &tr.snapshots {
        let file = format!("rho_{}.npy", s.label);
        write_matrix_npy(&dir.join(&file), &s.rho_a)?;
        snaps.push(SnapshotMeta { label: &s.label, t: s.t, t_seconds: sc.seconds(s.t), file });
    }
    let final_state = match &tr.final_state {
        FinalState::Pure(psi) => {
            write_npy(&dir.join("psi_final.npy"), psi, psi.len(), None)?;
            "psi_final.npy"
        }
        FinalState::Density(rho) => {
            write_npy(&dir.join("rho_full_final.npy"), rho.as_slice(), rho.dim(), Some(rho.dim()))?;
            "rho_full_final.npy"
        }
        FinalState::Moments(m) => {
            write_json(&dir.join("moments_final.json"), m)?;
            "moments_final.json"
        }
    };
    let meta = RunMeta {
        program: "magnomem",
        version: env!("CARGO_PKG_VERSION"),
        created_unix: unix_time(),
        scenario: sc,
        diagnostics: &tr.diagnostics,
        retrieval: tr.retrieval,
        retrieval_t_seconds: tr.retrieval.map(|r| sc.seconds(r.t)),
        snapshots: snaps,
        final_state,
        npy_layout: "NPY 1.0, dtype <c16 (little-endian f64 real, f64 imaginary), C order",
        warnings: run_warnings(tr),
    };
    write_json(&dir.join("meta.json"), &meta)
}

/// Coverage warning for a Wigner grid whose integral falls outside the accepted band.
pub fn wigner_warning(grid: &WignerGrid) -> Option<String> {
    let i = grid.integral();
    (i < INTEGRAL_BOUNDS.0 || i > INTEGRAL_BOUNDS.1).then(|| format!("Wigner integral {i:.4} outside [{}, {}]; widen the grid", INTEGRAL_BOUNDS.0, INTEGRAL_BOUNDS.1))
}
