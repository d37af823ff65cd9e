use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use magnomem::analysis::{damping_ladder, damping_scan_into, run_figure, storage_scan_into};
use magnomem::eigen::EigenTrace;
use magnomem::presets::{preset, FIGURES, STORAGE_LADDER};
use magnomem::scenario::{load_scenario, Scenario, SolverKind};
use magnomem::wigner::{wigner, GridSpec};
use magnomem::{dynamics, io, Error, Result};

const AFTER_HELP: &str = "\
Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 solver or fit failure.

Internal units: rates in omega_b, times in 1/omega_b.

CSV columns:
  trajectory.csv   t, N_a, N_m, N_b, fidelity
  pulses           t, Omega_p, delta_a, delta_m, delta_s
  eigen            t, S0, S+, S-, lambda0, lambda1, lambda2
  wigner           x, p, W
  storage.csv      delta_t, t_s (seconds), F_r
  damping.csv      kappa_m, N_a_final

Density dumps (*.npy) are NumPy v1.0 arrays of little-endian complex128 ('<c16'), row-major.";

#[derive(Parser)]
#[command(name = "magnomem", version, about = "Cavity-magnon-phonon state storage and retrieval", after_help = AFTER_HELP)]
struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file, or the name of a preset.
    #[arg(long)]
    scenario: String,
    /// Relative tolerance of the integrator (absolute tolerance is 1e-2 of it).
    #[arg(long)]
    tol: Option<f64>,
    /// Override the scenario's solver.
    #[arg(long, value_enum)]
    solver: Option<Solver>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Schrodinger,
    Lindblad,
    Moments,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trajectory.csv, meta.json and state dumps into --out.
    Simulate {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pump and detuning schedule on the scenario's output grid, as CSV.
    Pulses {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stokes and instantaneous eigenvalues over the scenario window, as CSV.
    Eigen {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wigner function of a density-matrix or state-vector dump, as CSV.
    Wigner {
        /// A rho_*.npy or psi_*.npy file written by `simulate`.
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Half-width of the square phase-space grid.
        #[arg(long, default_value_t = 4.5)]
        extent: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Retrieval fidelity against storage time; writes storage.csv, storage_fit.json and per-run subdirectories.
    ScanStorage {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
        /// Retrieval delays in multiples of t_c2 (default: 2,6,14,30,66,100,135,165,200,250).
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<f64>>,
    },
    /// Final cavity occupation against magnon damping (moment solver); writes damping.csv.
    ScanDamping {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
        /// Magnon damping rates in units of omega_b (default: 9 values from 1e-6 to 1e-2).
        #[arg(long, value_delimiter = ',')]
        kappa_m: Option<Vec<f64>>,
    },
    /// All data behind one figure preset.
    Figure {
        /// One of fig1b, fig2, fig3, fig4, fig5, fig6.
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(args: &ScenarioArgs) -> Result<Scenario> {
    let path = Path::new(&args.scenario);
    let mut sc = if !path.exists() && FIGURES.contains(&args.scenario.as_str()) {
        preset(&args.scenario)?
    } else if path.is_file() {
        load_scenario(path)?
    } else {
        return Err(Error::InvalidValue {
            key: "scenario".into(),
            reason: format!("`{}` is neither a file nor a preset ({})", args.scenario, FIGURES.join(", ")),
        });
    };
    if let Some(tol) = args.tol {
        sc.tol.rtol = tol;
        sc.tol.atol = tol * 1e-2;
    }
    if let Some(s) = args.solver {
        sc.solver = match s {
            Solver::Schrodinger => SolverKind::Schrodinger,
            Solver::Lindblad => SolverKind::Lindblad,
            Solver::Moments => SolverKind::Moments,
        };
    }
    sc.validate()?;
    Ok(sc)
}

fn parent_dir(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { sc, out } => {
            let sc = resolve(&sc)?;
            let tr = dynamics::run(&sc)?;
            io::write_run(&out, &sc, &tr)?;
            match tr.retrieval {
                Some(r) => println!("F_r = {:.6} at t = {:.3}", r.fidelity, r.t),
                None => println!("final N_a = {:.6e}", tr.n_a.last().copied().unwrap_or(f64::NAN)),
            }
            for w in io::run_warnings(&tr) {
                eprintln!("warning: {w}");
            }
        }
        Command::Pulses { sc, out } => {
            let sc = resolve(&sc)?;
            parent_dir(&out)?;
            io::write_pulses(&out, &sc.schedule, &sc.grid.times())?;
        }
        Command::Eigen { sc, out } => {
            let sc = resolve(&sc)?;
            parent_dir(&out)?;
            io::write_eigen(&out, &EigenTrace::adaptive(&sc.schedule, sc.grid.t_start, sc.grid.t_end))?;
        }
        Command::Wigner { state, out, extent, points } => {
            if !(extent > 0.0 && extent.is_finite()) || points < 2 {
                return Err(Error::InvalidValue { key: "extent".into(), reason: "need extent > 0 and at least 2 points".into() });
            }
            let rho = io::read_density(&state)?;
            let spec = GridSpec { x_min: -extent, x_max: extent, p_min: -extent, p_max: extent, nx: points, np: points };
            let grid = wigner(&rho, &spec);
            parent_dir(&out)?;
            io::write_wigner(&out, &grid)?;
            if let Some(w) = io::wigner_warning(&grid) {
                eprintln!("warning: {w}");
            }
        }
        Command::ScanStorage { sc, out, delays } => {
            let sc = resolve(&sc)?;
            let multiples = delays.unwrap_or_else(|| STORAGE_LADDER.to_vec());
            let delays: Vec<f64> = multiples.iter().map(|k| k * sc.schedule.t_c2).collect();
            std::fs::create_dir_all(&out)?;
            let sweep = storage_scan_into(&sc, &delays, Some(&out))?;
            sweep.write_csv(&out.join("storage.csv"))?;
            io::write_json(&out.join("storage_sweep.json"), &sweep)?;
            if sweep.len() >= 4 {
                let fit = sweep.fit_storage()?;
                println!("t_half = {:.4e} s (sigma {:.1e}), A = {:.4}, A0 = {:.4}", fit.t_half, fit.t_half_sigma(), fit.amplitude, fit.offset);
                if let Some(w) = &fit.warning {
                    eprintln!("warning: {w}");
                }
                io::write_json(&out.join("storage_fit.json"), &fit)?;
            }
        }
        Command::ScanDamping { sc, out, kappa_m } => {
            let sc = resolve(&sc)?;
            let values = kappa_m.unwrap_or_else(damping_ladder);
            std::fs::create_dir_all(&out)?;
            let sweep = damping_scan_into(&sc, &values, Some(&out))?;
            sweep.write_csv(&out.join("damping.csv"))?;
            io::write_json(&out.join("damping_sweep.json"), &sweep)?;
        }
        Command::Figure { name, out } => {
            let files = run_figure(&name, &out)?;
            println!("wrote {} files under {}", files.len(), out.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_validation() => 2,
        Error::Io(_) | Error::Json(_) => 1,
        Error::Sweep { source, .. } => exit_code(source),
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
