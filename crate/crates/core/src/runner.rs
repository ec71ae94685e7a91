//! Executes a scenario and writes its outputs.
//!
//! Data files are written only after every computation has succeeded, so a
//! failed run leaves nothing behind. `run_meta.txt` records the resolved
//! scenario, run statistics and wall time; it is the only file whose
//! contents may differ between identical runs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::crossings::{build_catalog, level_diagram};
use crate::dynamics::{derive_dimensionless, integrate_many, pendulum_solution, DynamicsConfig, DynamicsModel, PendulumBranch, Trajectory};
use crate::error::{Error, Result};
use crate::lzs::{fit_anisotropy_params, simulate_hysteresis, FitConfig};
use crate::observables::{dm_db0_curve, emitted_energy, t0_scan, transition_catalog, write_curve_csv, write_peak_csv, write_t0_csv};
use crate::scenario::{Command, Scenario};
use crate::spin::SpinHamiltonian;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "SPINCAVITY_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::Parse { .. } | Error::Io { .. } => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

/// Reads the thread cap from the environment. Unset means the rayon default.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::validation(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
        },
    }
}

/// Outputs of a run, held in memory until everything has succeeded.
#[derive(Debug, Default)]
pub struct RunOutput {
    /// (file name, contents)
    pub files: Vec<(String, Vec<u8>)>,
    /// Extra `key = value` lines for the metadata file.
    pub meta: Vec<(String, String)>,
}

impl RunOutput {
    fn file(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) {
        let mut buf = Vec::new();
        write(&mut buf).expect("writing to memory cannot fail");
        self.files.push((name.into(), buf));
    }

    fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }
}

/// Computes every output of the scenario without touching the filesystem.
pub fn compute(sc: &Scenario) -> Result<RunOutput> {
    sc.validate()?;
    let mut out = RunOutput::default();
    match sc.command {
        Command::Levels => {
            let ham = SpinHamiltonian::new(sc.spin)?;
            let l = &sc.levels;
            let grid: Vec<f64> = if l.points == 1 {
                vec![l.field_min]
            } else {
                (0..l.points)
                    .map(|k| l.field_min + (l.field_max - l.field_min) * k as f64 / (l.points - 1) as f64)
                    .collect()
            };
            let diagram = level_diagram(&ham, &grid)?;
            out.file("levels.csv", |w| diagram.write_csv(w));
        }
        Command::Crossings => {
            let ham = SpinHamiltonian::new(sc.spin)?;
            let cat = build_catalog(&ham, (sc.crossings.field_min, sc.crossings.field_max))?;
            out.file("crossings.csv", |w| {
                writeln!(w, "m,m_prime,B0_star_tesla,delta0_joule,epsilon0_joule")?;
                for r in &cat.records {
                    writeln!(w, "{},{},{:.16e},{:.16e},{:.16e}", r.m, r.m_prime, r.b0_star, r.delta0, r.epsilon0)?;
                }
                Ok(())
            });
            out.meta("crossings_found", cat.records.len());
            for (m, mp, why) in &cat.skipped {
                out.meta(format!("skipped_{m}_{mp}"), why);
            }
        }
        Command::Hysteresis => {
            let ham = SpinHamiltonian::new(sc.spin)?;
            let r = simulate_hysteresis(&ham, &sc.hysteresis)?;
            out.file("hysteresis.csv", |w| r.write_csv(w));
            out.file("steps.csv", |w| {
                writeln!(w, "m,m_prime,B0_star_tesla,probability,height")?;
                for s in &r.steps {
                    writeln!(
                        w,
                        "{},{},{:.16e},{:.16e},{:.16e}",
                        s.crossing.m,
                        s.crossing.m_prime,
                        s.crossing.b0_star,
                        s.probability,
                        s.height()
                    )?;
                }
                Ok(())
            });
            out.meta("steps", r.steps.len());
            out.meta("skipped_pairs", r.skipped.len());
        }
        Command::Fit => {
            let targets = match &sc.fit.targets {
                Some(t) => t.clone(),
                None => {
                    let ham = SpinHamiltonian::new(sc.spin)?;
                    let r = simulate_hysteresis(&ham, &sc.hysteresis)?;
                    r.steps
                        .iter()
                        .filter(|s| s.height() > sc.fit.synthetic_min_height)
                        .map(|s| (s.crossing.b0_star, s.height()))
                        .collect()
                }
            };
            let fit = FitConfig {
                targets,
                ..sc.fit.config.clone()
            };
            let r = fit_anisotropy_params(&fit, &sc.spin, &sc.hysteresis, sc.seed)?;
            out.file("fit_report.txt", |w| r.write_report(w));
            out.file("fit_targets.csv", |w| {
                writeln!(w, "B0_tesla,height")?;
                for (b, h) in &fit.targets {
                    writeln!(w, "{b:.16e},{h:.16e}")?;
                }
                Ok(())
            });
            if !r.converged {
                return Err(Error::NonConvergence {
                    what: "simplex fit",
                    iterations: r.iterations,
                    residual: r.residual,
                });
            }
        }
        Command::Dynamics | Command::Maser | Command::Peaks => {
            let model = if sc.command == Command::Maser {
                DynamicsModel::RateEquations
            } else {
                sc.dynamics.model
            };
            let configs = dynamics_configs(sc, &mut out)?;
            let trajectories = run_trajectories(model, &configs)?;
            if sc.command == Command::Peaks {
                let reports = trajectories.iter().map(dm_db0_curve).collect::<Result<Vec<_>>>()?;
                out.file("peaks.csv", |w| write_peak_csv(&reports, w));
                for (k, r) in reports.iter().enumerate() {
                    out.file(format!("curve_{k:03}.csv"), |w| write_curve_csv(r, w));
                }
            }
            out.file("runs.csv", |w| {
                writeln!(w, "index,gamma,kappa,v,Z_final,photons_per_molecule,conservation_defect")?;
                for (k, t) in trajectories.iter().enumerate() {
                    let c = &t.config;
                    writeln!(
                        w,
                        "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        c.gamma,
                        c.kappa,
                        c.v,
                        t.z_final(),
                        c.kappa * t.integrated_intensity(),
                        t.conservation_defect()
                    )?;
                }
                Ok(())
            });
            for (k, t) in trajectories.iter().enumerate() {
                out.file(format!("trajectory_{k:03}.csv"), |w| t.write_csv(w));
                out.meta(
                    format!("run_{k:03}_steps"),
                    format!("accepted {} rejected {} evaluations {}", t.stats.accepted, t.stats.rejected, t.stats.evaluations),
                );
                if sc.physical.sample_volume.is_some() {
                    let e = emitted_energy(t, &sc.physical.context(sc.spin.g_factor))?;
                    out.meta(format!("run_{k:03}_emitted_energy_joule"), format!("{e:.16e}"));
                }
            }
        }
        Command::T0Scan => {
            let ham = SpinHamiltonian::new(sc.spin)?;
            let t = &sc.t0scan;
            let catalog = transition_catalog(&ham, t.field)?;
            let rows = t0_scan(&ham, t.field, &t.temperatures, t.total_density, &catalog)?;
            out.file("t0scan.csv", |w| write_t0_csv(&rows, w));
            out.file("transitions.csv", |w| {
                writeln!(w, "m,m_prime,s_magnitude,omega_rad_per_s")?;
                for c in &catalog {
                    writeln!(w, "{},{},{:.16e},{:.16e}", c.m, c.m_prime, c.s_magnitude, c.omega)?;
                }
                Ok(())
            });
        }
    }
    Ok(out)
}

fn dynamics_configs(sc: &Scenario, out: &mut RunOutput) -> Result<Vec<DynamicsConfig>> {
    let d = &sc.dynamics;
    if !d.derive {
        return Ok(d.configs());
    }
    let dimless = derive_dimensionless(&sc.physical.context(sc.spin.g_factor))?;
    out.meta("T0_seconds", format!("{:.16e}", dimless.t0));
    let cfg = d.config(dimless.gamma, dimless.kappa, dimless.v);
    cfg.validate()?;
    Ok(vec![cfg])
}

fn run_trajectories(model: DynamicsModel, configs: &[DynamicsConfig]) -> Result<Vec<Trajectory>> {
    if model == DynamicsModel::Pendulum {
        return configs
            .iter()
            .map(|c| {
                let grid = c.output_grid();
                pendulum_solution(c.kappa, c.z0, c.theta0, &grid, PendulumBranch::Full).map(|p| p.trajectory)
            })
            .collect();
    }
    integrate_many(model, configs).into_iter().collect()
}

/// Runs the scenario and writes its outputs into `out_dir`. On failure
/// nothing is written.
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let output = compute(sc)?;
    let wall = started.elapsed().as_secs_f64();
    let mut written = Vec::new();
    let result = write_outputs(sc, &output, out_dir, wall, &mut written);
    if let Err(e) = result {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        return Err(e);
    }
    Ok(written)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_outputs(sc: &Scenario, output: &RunOutput, out_dir: &Path, wall: f64, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (name, bytes) in &output.files {
        let path = out_dir.join(name);
        written.push(path.clone());
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    let path = out_dir.join("run_meta.txt");
    written.push(path.clone());
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    let meta = (|| -> std::io::Result<()> {
        writeln!(w, "# resolved scenario")?;
        w.write_all(sc.serialize().as_bytes())?;
        writeln!(w, "\n[run]")?;
        writeln!(w, "version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "threads = {}", rayon::current_num_threads())?;
        writeln!(w, "wall_time_seconds = {wall:.6}")?;
        for (k, v) in &output.meta {
            writeln!(w, "{k} = {v}")?;
        }
        for (name, _) in &output.files {
            writeln!(w, "output = {name}")?;
        }
        w.flush()
    })();
    meta.map_err(io_err(&path))
}
