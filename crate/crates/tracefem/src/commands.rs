//! The `study`, `solve` and `verify-geometry` subcommands.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tracefem_core::geometry::Sphere;
use tracefem_core::manufactured::SphereProblem;
use tracefem_core::study::{
    eoc, error_report, geometry_diagnostics, run_study, solve_level, ErrorReport, GeometryReport, LevelOutcome, LevelSolution, Observer,
    Stage,
};

use crate::config::{MethodName, RunConfig};
use crate::output::{write_json, CsvSink};
use crate::plot::{loglog_svg, Series};
use crate::{vtk, CliError, Exit};

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub plot: bool,
    pub vtk: bool,
    pub deterministic: bool,
    pub quiet: bool,
    /// Overrides `output_dir` of the configuration.
    pub output: Option<PathBuf>,
}

fn output_dir(cfg: &RunConfig, flags: &Flags) -> Result<PathBuf, CliError> {
    let dir = flags.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn report(e: &CliError) -> Exit {
    log::error!("{e}");
    Exit::Failure
}

struct CliObserver<'a> {
    start: Instant,
    csv: Option<&'a mut CsvSink>,
    vtk_dir: Option<&'a Path>,
    failure: Option<CliError>,
}

impl Observer for CliObserver<'_> {
    fn seconds(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn stage(&mut self, level: u32, stage: Stage) {
        log::info!("level {level}: {}", stage.name());
    }

    fn solved(&mut self, sol: &LevelSolution, _errors: &ErrorReport) {
        if let Some(dir) = self.vtk_dir {
            let path = dir.join(format!("solution_level{}.vtk", sol.disc.mesh.level));
            if let Err(e) = vtk::write_surface(&path, sol) {
                self.failure.get_or_insert(e);
            }
        }
    }

    fn level_done(&mut self, outcome: &LevelOutcome) {
        match outcome {
            LevelOutcome::Done(r) => {
                log::info!(
                    "level {}: energy error {:.4e}{} in {} iterations",
                    r.level,
                    r.errors.energy,
                    r.eoc_energy.map(|v| format!(" (order {v:.2})")).unwrap_or_default(),
                    r.solve.iterations
                );
                if let Some(csv) = self.csv.as_deref_mut() {
                    if let Err(e) = csv.push(r) {
                        self.failure.get_or_insert(e);
                    }
                }
            }
            LevelOutcome::Failed(f) => log::warn!("level {} failed in stage {}: {}", f.level, f.stage.name(), f.error),
        }
    }
}

pub fn cmd_study(config: &Path, flags: &Flags) -> Exit {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match study(&cfg, flags) {
        Ok(exit) => exit,
        Err(e) => report(&e),
    }
}

pub fn study(cfg: &RunConfig, flags: &Flags) -> Result<Exit, CliError> {
    let dir = output_dir(cfg, flags)?;
    let mut csv = CsvSink::create(&dir.join("results.csv"), flags.deterministic)?;
    let mut obs = CliObserver {
        start: Instant::now(),
        csv: Some(&mut csv),
        vtk_dir: flags.vtk.then_some(dir.as_path()),
        failure: None,
    };
    let outcomes = run_study(&cfg.study_config(), &mut obs)?;
    if let Some(e) = obs.failure.take() {
        return Err(e);
    }
    write_json(&dir.join("results.json"), cfg, &outcomes, flags.deterministic)?;
    if flags.plot {
        fs::write(dir.join("convergence.svg"), study_plot(cfg, &outcomes))?;
    }
    let failed = outcomes.iter().filter(|o| matches!(o, LevelOutcome::Failed(_))).count();
    if !flags.quiet {
        print_table(&outcomes);
    }
    Ok(if failed == 0 { Exit::Success } else { Exit::Partial })
}

fn study_plot(cfg: &RunConfig, outcomes: &[LevelOutcome]) -> String {
    let done: Vec<_> = outcomes
        .iter()
        .filter_map(|o| match o {
            LevelOutcome::Done(r) => Some(r),
            _ => None,
        })
        .collect();
    let mut series = vec![Series { label: "energy error".into(), points: done.iter().map(|r| (r.h, r.errors.energy)).collect() }];
    if cfg.method == MethodName::Lagrange {
        series.push(Series { label: "multiplier error (M)".into(), points: done.iter().filter_map(|r| r.errors.m.map(|m| (r.h, m))).collect() });
    }
    let k = cfg.k as u32;
    let title = format!("{:?} k={} k_g={}", cfg.method, cfg.k, cfg.k_g).to_lowercase();
    loglog_svg(&title, &series, &[k, k + 1])
}

fn print_table(outcomes: &[LevelOutcome]) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:>5} {:>10} {:>10} {:>12} {:>7} {:>12} {:>7} {:>7}", "level", "h", "ndof", "energy", "eoc", "M", "eoc_M", "iters");
    for o in outcomes {
        match o {
            LevelOutcome::Done(r) => {
                let f = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    out,
                    "{:>5} {:>10.5} {:>10} {:>12.4e} {:>7} {:>12} {:>7} {:>7}",
                    r.level,
                    r.h,
                    3 * r.ndof_u + r.ndof_lambda,
                    r.errors.energy,
                    f(r.eoc_energy),
                    r.errors.m.map(|m| format!("{m:.4e}")).unwrap_or_else(|| "-".into()),
                    f(r.eoc_m),
                    r.solve.iterations
                );
            }
            LevelOutcome::Failed(fl) => {
                let _ = writeln!(out, "{:>5} failed in stage {}: {}", fl.level, fl.stage.name(), fl.error);
            }
        }
    }
}

pub fn cmd_solve(config: &Path, level: u32, flags: &Flags) -> Exit {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match solve(&cfg, level, flags) {
        Ok(exit) => exit,
        Err(e) => report(&e),
    }
}

pub fn solve(cfg: &RunConfig, level: u32, flags: &Flags) -> Result<Exit, CliError> {
    if level > crate::config::MAX_LEVEL {
        return Err(CliError::Config(format!("level {level} violates level <= {}", crate::config::MAX_LEVEL)));
    }
    let sc = cfg.study_config();
    let mut obs = CliObserver { start: Instant::now(), csv: None, vtk_dir: None, failure: None };
    let sol = match solve_level(&sc, level, &mut obs) {
        Ok(s) => s,
        Err(f) => {
            log::error!("level {level} failed in stage {}: {}", f.stage.name(), f.error);
            return Ok(Exit::Failure);
        }
    };
    let r = error_report(&sol.disc, &sol.params, &SphereProblem, &sol.u, sol.lambda.as_deref())?;
    if !flags.quiet {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "level {level}  h = {}  velocity dofs = {}  multiplier dofs = {}", sol.disc.h(), sol.u.len(), sol.lambda.as_ref().map_or(0, Vec::len));
        let _ = writeln!(out, "solver: {} iterations, relative residual {:.3e}", sol.solve.iterations, sol.solve.relative_residual);
        let _ = writeln!(out, "energy error {:.6e}  (a {:.3e}, s {:.3e}, k {:.3e})", r.energy, r.terms[0], r.terms[1], r.terms[2]);
        if let Some(m) = r.m {
            let _ = writeln!(out, "multiplier M-norm error {m:.6e}");
        }
        let _ = writeln!(out, "L2 {:.6e}  L2 tangential {:.6e}  H1 {:.6e}", r.l2, r.l2_tan, r.h1);
    }
    if flags.vtk {
        let dir = output_dir(cfg, flags)?;
        vtk::write_surface(&dir.join(format!("solution_level{level}.vtk")), &sol)?;
    }
    Ok(Exit::Success)
}

pub fn cmd_verify_geometry(config: &Path, flags: &Flags) -> Exit {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match verify_geometry(&cfg, flags) {
        Ok((exit, _)) => exit,
        Err(e) => report(&e),
    }
}

/// Geometry errors per level; the penalty normal is included for the
/// penalty methods.
pub fn verify_geometry(cfg: &RunConfig, flags: &Flags) -> Result<(Exit, Vec<GeometryReport>), CliError> {
    let dir = output_dir(cfg, flags)?;
    let kp = match cfg.method {
        MethodName::Lagrange => None,
        _ => cfg.k_p,
    };
    let mut reports = Vec::new();
    let mut failed = false;
    for &level in &cfg.levels {
        match geometry_diagnostics(&Sphere::default(), 4.0 * PI, level, cfg.k_g, kp) {
            Ok(r) => reports.push(r),
            Err(e) => {
                log::warn!("level {level}: {e}");
                failed = true;
            }
        }
    }
    let orders = |f: fn(&GeometryReport) -> f64| -> Vec<Option<f64>> {
        let mut v = vec![None];
        if reports.len() >= 2 {
            let e: Vec<f64> = reports.iter().map(f).collect();
            let h: Vec<f64> = reports.iter().map(|r| r.h).collect();
            v.extend(eoc(&e, &h).unwrap_or_default().into_iter().map(Some));
        }
        v
    };
    let o_area = orders(|r| r.area);
    let o_n = orders(|r| r.normal);
    let o_p = orders(|r| r.penalty_normal.unwrap_or(0.0));
    let o_h = orders(|r| r.weingarten);
    let mut w = csv::Writer::from_path(dir.join("geometry.csv"))?;
    w.write_record(["level", "h", "err_area", "err_n_h", "err_n_tilde", "err_H_h", "eoc_area", "eoc_n_h", "eoc_n_tilde", "eoc_H_h"])?;
    let f = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
    let mut out = std::io::stdout().lock();
    if !flags.quiet {
        let _ = writeln!(out, "{:>5} {:>10} {:>20} {:>20} {:>20} {:>20}", "level", "h", "area (eoc)", "n_h (eoc)", "n_tilde (eoc)", "H_h (eoc)");
    }
    for (i, r) in reports.iter().enumerate() {
        let p = r.penalty_normal.map(|v| format!("{v:.9e}")).unwrap_or_default();
        let op = if r.penalty_normal.is_some() { o_p[i] } else { None };
        w.write_record([
            r.level.to_string(),
            r.h.to_string(),
            format!("{:.9e}", r.area),
            format!("{:.9e}", r.normal),
            p.clone(),
            format!("{:.9e}", r.weingarten),
            f(o_area[i]),
            f(o_n[i]),
            f(op),
            f(o_h[i]),
        ])?;
        if !flags.quiet {
            let cell = |e: String, o: Option<f64>| format!("{e} ({})", o.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()));
            let _ = writeln!(
                out,
                "{:>5} {:>10} {:>20} {:>20} {:>20} {:>20}",
                r.level,
                r.h,
                cell(format!("{:.3e}", r.area), o_area[i]),
                cell(format!("{:.3e}", r.normal), o_n[i]),
                if p.is_empty() { "-".into() } else { cell(format!("{:.3e}", r.penalty_normal.unwrap()), op) },
                cell(format!("{:.3e}", r.weingarten), o_h[i])
            );
        }
    }
    w.flush()?;
    Ok((if failed { Exit::Partial } else { Exit::Success }, reports))
}
