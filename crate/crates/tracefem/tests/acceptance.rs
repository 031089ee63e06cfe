//! Acceptance suite: convergence orders of the three methods, geometry
//! approximation orders and the property checks. Prints one PASS/FAIL line
//! per criterion; criterion 12 is reported but does not gate.
//!
//! Run a subset with `cargo test --test acceptance -- 1 4 10`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracefem::commands::{study, Flags};
use tracefem::config::RunConfig;
use tracefem_core::assembly::{
    assemble_forms, build_system, default_box, DiscreteSetup, Discretization, FormParams, FormWeights, Method, Scaling,
};
use tracefem_core::cut::{extract_cut, marching_tet, VertexValues};
use tracefem_core::deform::GeometrySource;
use tracefem_core::dual::jacobian;
use tracefem_core::fem::LagrangeBasis;
use tracefem_core::geometry::{LevelSetOracle, Sphere};
use tracefem_core::linalg;
use tracefem_core::manufactured::{strain_generic, SphereProblem};
use tracefem_core::mesh::{BackgroundMesh, BoundingBox};
use tracefem_core::solver::{block_preconditioner, cg, jacobi, minres, pin_dofs};
use tracefem_core::sparse::{norm, CsrMatrix};
use tracefem_core::study::{geometry_diagnostics, run_study, LevelOutcome, Silent, StudyConfig, StudyRecord};

const EOC_K1: (f64, f64) = (0.8, 1.2);
const EOC_K2: (f64, f64) = (1.7, 2.3);
const EOC_LOSS: (f64, f64) = (0.7, 1.3);
const EOC_NO_CONV_MAX: f64 = 0.3;
const EOC_HALF: (f64, f64) = (1.2, 1.8);
const EOC_K3: (f64, f64) = (2.6, 3.4);
const GEOMETRY_EOC_SLACK: f64 = 0.3;
const RUNTIME_K1: f64 = 120.0;
const RUNTIME_K2: f64 = 600.0;
const SATURATION: f64 = 1e-8;
const DERIVATIVE_AGREEMENT: f64 = 1e-6;
const SOLVER_TOL: f64 = 1e-10;
/// The level-4 factor of the quadratic multiplier systems needs about 15 GB.
const QUADRATIC_MULTIPLIER_LEVELS: [u32; 3] = [1, 2, 3];

struct Check {
    pass: bool,
    detail: String,
}

fn within(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo && v <= hi
}

fn config(method: Method, k: usize, kg: usize, kp: usize, kl: usize, eta: Option<(f64, f64)>, rho: f64, levels: Vec<u32>) -> StudyConfig {
    StudyConfig {
        setup: DiscreteSetup { method, k, kg, kp, kl, source: GeometrySource::Discrete },
        params: FormParams {
            eta: eta.map(|(c, e)| Scaling::new(c, e)),
            rho: Scaling::new(1.0, rho),
            rho_tilde: (method == Method::Lagrange).then(|| Scaling::new(1.0, rho)),
        },
        levels,
        solver: tracefem_core::solver::SolverOptions {
            kind: if method == Method::Lagrange {
                tracefem_core::solver::SolverKind::Direct
            } else {
                tracefem_core::solver::SolverKind::Cg
            },
            tol: SOLVER_TOL,
            maxit: None,
        },
    }
}

/// Runs the study and returns the records with the wall time.
fn records(cfg: &StudyConfig) -> Result<(Vec<StudyRecord>, f64), String> {
    let t = Instant::now();
    let out = run_study(cfg, &mut Silent).map_err(|e| e.to_string())?;
    let mut recs = Vec::new();
    for o in out {
        match o {
            LevelOutcome::Done(r) => recs.push(r),
            LevelOutcome::Failed(f) => return Err(format!("level {} failed in {}: {}", f.level, f.stage.name(), f.error)),
        }
    }
    Ok((recs, t.elapsed().as_secs_f64()))
}

fn last_eoc(recs: &[StudyRecord], f: impl Fn(&StudyRecord) -> f64) -> f64 {
    let n = recs.len();
    let (a, b) = (&recs[n - 2], &recs[n - 1]);
    (f(a) / f(b)).ln() / (a.h / b.h).ln()
}

fn history(recs: &[StudyRecord], f: impl Fn(&StudyRecord) -> f64) -> String {
    recs.iter().map(|r| format!("{:.3e}", f(r))).collect::<Vec<_>>().join(", ")
}

fn energy_criterion(cfg: StudyConfig, window: (f64, f64), max_seconds: Option<f64>) -> Check {
    match records(&cfg) {
        Err(e) => Check { pass: false, detail: e },
        Ok((recs, secs)) => {
            let o = last_eoc(&recs, |r| r.errors.energy);
            let fast = max_seconds.map_or(true, |m| secs <= m);
            Check {
                pass: within(o, window) && fast,
                detail: format!("eoc {o:.3} (window [{}, {}]), errors [{}], {secs:.1} s", window.0, window.1, history(&recs, |r| r.errors.energy)),
            }
        }
    }
}

fn combined_criterion(cfg: StudyConfig, window: (f64, f64)) -> Check {
    match records(&cfg) {
        Err(e) => Check { pass: false, detail: e },
        Ok((recs, secs)) => {
            let o = last_eoc(&recs, |r| r.errors.combined());
            Check {
                pass: within(o, window),
                detail: format!(
                    "combined eoc {o:.3} (window [{}, {}]), errors [{}], {secs:.1} s",
                    window.0,
                    window.1,
                    history(&recs, |r| r.errors.combined())
                ),
            }
        }
    }
}

fn criterion_8() -> Check {
    match records(&config(Method::Lagrange, 2, 2, 2, 2, None, -1.0, QUADRATIC_MULTIPLIER_LEVELS.to_vec())) {
        Err(e) => Check { pass: false, detail: e },
        Ok((recs, secs)) => {
            let ou = last_eoc(&recs, |r| r.errors.energy);
            let om = last_eoc(&recs, |r| r.errors.m.unwrap_or(f64::NAN));
            Check {
                pass: within(ou, EOC_K2) && within(om, EOC_LOSS),
                detail: format!(
                    "energy eoc {ou:.3} (window [{}, {}]), M eoc {om:.3} (window [{}, {}]), {secs:.1} s",
                    EOC_K2.0, EOC_K2.1, EOC_LOSS.0, EOC_LOSS.1
                ),
            }
        }
    }
}

/// Gated with the superparametric scaling ρ = ρ̃ = h⁻¹; the run with ρ = ρ̃ = h
/// is reported alongside.
fn criterion_9() -> Check {
    let levels = QUADRATIC_MULTIPLIER_LEVELS.to_vec();
    let gated = combined_criterion(config(Method::Lagrange, 2, 3, 1, 1, None, 1.0, levels.clone()), EOC_LOSS);
    let other = match records(&config(Method::Lagrange, 2, 3, 1, 1, None, -1.0, levels)) {
        Ok((recs, _)) => format!("{:.3}", last_eoc(&recs, |r| r.errors.combined())),
        Err(e) => e,
    };
    Check { pass: gated.pass, detail: format!("{}; with rho=h: combined eoc {other}", gated.detail) }
}

fn criterion_10() -> Check {
    let sphere = Sphere::default();
    let levels = [1u32, 2, 3, 4];
    let mut ok = true;
    let mut notes = Vec::new();
    let eoc = |a: f64, b: f64, ha: f64, hb: f64| (a / b).ln() / (ha / hb).ln();
    for kg in 1..=3usize {
        let reps: Vec<_> = levels.iter().map(|&l| geometry_diagnostics(&sphere, 4.0 * PI, l, kg, None)).collect();
        if let Some(Err(e)) = reps.iter().find(|r| r.is_err()) {
            return Check { pass: false, detail: format!("k_g = {kg}: {e}") };
        }
        let reps: Vec<_> = reps.into_iter().map(Result::unwrap).collect();
        let (a, b) = (&reps[2], &reps[3]);
        let kf = kg as f64;
        let series = |f: fn(&tracefem_core::study::GeometryReport) -> f64| reps.iter().map(f).collect::<Vec<_>>();
        for (name, errs, target) in [
            ("area", series(|r| r.area), kf + 1.0),
            ("n_h", series(|r| r.normal), kf),
            ("H_h", series(|r| r.weingarten), kf - 1.0),
        ] {
            let v = eoc(errs[2], errs[3], a.h, b.h);
            let good = (v - target).abs() <= GEOMETRY_EOC_SLACK;
            ok &= good;
            if good {
                notes.push(format!("k_g={kg} {name} {v:.2}"));
            } else {
                let h: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
                notes.push(format!("k_g={kg} {name} {v:.2}! (target {target}, errors [{}])", h.join(", ")));
            }
        }
    }
    for kp in 1..=4usize {
        let reps: Vec<_> = levels[1..].iter().map(|&l| geometry_diagnostics(&sphere, 4.0 * PI, l, 1, Some(kp))).collect();
        if let Some(Err(e)) = reps.iter().find(|r| r.is_err()) {
            return Check { pass: false, detail: format!("k_p = {kp}: {e}") };
        }
        let reps: Vec<_> = reps.into_iter().map(Result::unwrap).collect();
        let (a, b) = (&reps[1], &reps[2]);
        let v = eoc(a.penalty_normal.unwrap(), b.penalty_normal.unwrap(), a.h, b.h);
        let good = (v - kp as f64).abs() <= GEOMETRY_EOC_SLACK;
        ok &= good;
        notes.push(format!("k_p={kp} n_tilde {v:.2}{}", if good { "" } else { "!" }));
    }
    Check { pass: ok, detail: notes.join(", ") }
}

fn marching_cases() -> Result<(), String> {
    let mesh = BackgroundMesh::new(BoundingBox::cube(0.5), 0).map_err(|e| e.to_string())?;
    let verts = mesh.tet(0);
    let c = mesh.tet_coords(0);
    for pattern in 0u8..16 {
        let vals: [f64; 4] = core::array::from_fn(|i| if pattern & (1 << i) != 0 { -1.0 - i as f64 * 0.1 } else { 1.0 + i as f64 * 0.2 });
        // linear interpolant gradient from the four vertex values
        let j = linalg::from_columns(linalg::sub(c[1], c[0]), linalg::sub(c[2], c[0]), linalg::sub(c[3], c[0]));
        let jinv_t = linalg::transpose(&linalg::inverse(&j).unwrap());
        let grad = linalg::mat_vec(&jinv_t, [vals[1] - vals[0], vals[2] - vals[0], vals[3] - vals[0]]);
        let expected = match pattern.count_ones() {
            0 | 4 => 0,
            2 => 2,
            _ => 1,
        };
        match marching_tet(&mesh, verts, vals, grad) {
            None if expected == 0 => {}
            Some((tris, n, _)) if n == expected => {
                for t in &tris[..n] {
                    let nrm = linalg::cross(linalg::sub(t.points[1], t.points[0]), linalg::sub(t.points[2], t.points[0]));
                    if linalg::dot(nrm, grad) <= 0.0 {
                        return Err(format!("pattern {pattern:04b}: triangle not oriented towards positive values"));
                    }
                    for p in t.points {
                        let lam = linalg::mat_vec(&linalg::inverse(&j).unwrap(), linalg::sub(p, c[0]));
                        let v = vals[0] * (1.0 - lam[0] - lam[1] - lam[2]) + vals[1] * lam[0] + vals[2] * lam[1] + vals[3] * lam[2];
                        if v.abs() > 1e-12 {
                            return Err(format!("pattern {pattern:04b}: vertex off the zero set ({v:e})"));
                        }
                    }
                }
            }
            other => return Err(format!("pattern {pattern:04b}: expected {expected} triangles, got {:?}", other.map(|o| o.1))),
        }
    }
    Ok(())
}

fn watertight() -> Result<(), String> {
    for level in 0..=4 {
        let mesh = BackgroundMesh::new(default_box(), level).map_err(|e| e.to_string())?;
        let cut = extract_cut(&mesh, &VertexValues::sample(&mesh, &Sphere::default())).map_err(|e| e.to_string())?;
        if !cut.is_watertight() {
            return Err(format!("level {level} not watertight"));
        }
    }
    Ok(())
}

fn partition_of_unity(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for k in 1..=4 {
        let b = LagrangeBasis::new(k).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let x = loop {
                let p = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
                if p.iter().sum::<f64>() <= 1.0 {
                    break p;
                }
            };
            let t = b.tabulate(x);
            let s: f64 = t.vals[..t.n].iter().sum();
            let g = t.grads[..t.n].iter().fold([0.0; 3], |a, &v| linalg::add(a, v));
            if (s - 1.0).abs() > 1e-12 || linalg::norm(g) > 1e-10 {
                return Err(format!("degree {k}: sum {s}, gradient sum {g:?}"));
            }
        }
    }
    Ok(())
}

fn spd_probes(rng: &mut ChaCha8Rng) -> Result<(), String> {
    for (method, k) in [(Method::P1, 1), (Method::P2, 2), (Method::Lagrange, 1)] {
        let eta = (method != Method::Lagrange).then_some((1.0, 2.0));
        let cfg = config(method, k, k.max(2), 3, 1, eta, 1.0, vec![1]);
        let disc = Discretization::build(&Sphere::default(), default_box(), 1, cfg.setup).map_err(|e| e.to_string())?;
        let p = cfg.params.resolve(method, disc.h()).map_err(|e| e.to_string())?;
        let a = assemble_forms(&disc, &FormWeights::for_method(method, &p)).map_err(|e| e.to_string())?;
        let sym = a.symmetry_defect();
        if sym > 1e-12 * a.max_abs() {
            return Err(format!("{method:?}: symmetry defect {sym:e}"));
        }
        for _ in 0..20 {
            let x: Vec<f64> = (0..a.nrows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if !(a.bilinear(&x, &x) > 0.0) {
                return Err(format!("{method:?}: nonpositive probe"));
            }
        }
    }
    Ok(())
}

fn saturation() -> Result<f64, String> {
    let cfg = config(Method::P2, 1, 1, 2, 1, Some((1.0, 2.0)), 1.0, vec![2]);
    let disc = Discretization::build(&Sphere::default(), default_box(), 2, cfg.setup).map_err(|e| e.to_string())?;
    let p = cfg.params.resolve(Method::P2, disc.h()).map_err(|e| e.to_string())?;
    let w = FormWeights::for_method(Method::P2, &p);
    let a = assemble_forms(&disc, &w).map_err(|e| e.to_string())?;
    let (s, v) = (cfg.setup.surface_degree(), cfg.setup.volume_degree());
    let bumped = disc.with_degrees(s + 2, v + 2);
    let b = assemble_forms(&bumped, &w).map_err(|e| e.to_string())?;
    let mut diff = b.clone();
    diff.add_scaled(-1.0, &a).map_err(|e| e.to_string())?;
    Ok(diff.max_abs() / a.max_abs())
}

fn derivatives(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let problem = SphereProblem;
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = linalg::normalize([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).unwrap();
        let y = linalg::scale(1.0 + rng.gen_range(-0.2..0.2), x);
        // u* ∘ p
        let (_, g) = problem.u_ext(y).map_err(|e| e.to_string())?;
        let (_, gl) = problem.lambda_ext(y).map_err(|e| e.to_string())?;
        for j in 0..3 {
            let mut yp = y;
            let mut ym = y;
            yp[j] += step;
            ym[j] -= step;
            let up = problem.u_ext(yp).unwrap().0;
            let um = problem.u_ext(ym).unwrap().0;
            for i in 0..3 {
                worst = worst.max(((up[i] - um[i]) / (2.0 * step) - g[i][j]).abs());
            }
            let lp = problem.lambda_ext(yp).unwrap().0;
            let lm = problem.lambda_ext(ym).unwrap().0;
            worst = worst.max(((lp - lm) / (2.0 * step) - gl[j]).abs());
        }
        // f from finite differences of the strain
        let p = linalg::projector(x);
        let mut div = [0.0; 3];
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += step;
            xm[a] -= step;
            let ep = strain_generic(xp);
            let em = strain_generic(xm);
            for (i, d) in div.iter_mut().enumerate() {
                for b in 0..3 {
                    *d += p[a][b] * (ep[i][b] - em[i][b]) / (2.0 * step);
                }
            }
        }
        let u = problem.u_star(x).unwrap();
        let f = problem.f_on_surface(x).unwrap();
        let pd = linalg::mat_vec(&p, div);
        for i in 0..3 {
            worst = worst.max((-pd[i] + u[i] - f[i]).abs());
        }
        // λ = −tr(E H) with E from a finite-difference gradient of u*
        let (_, gu) = jacobian(|z| tracefem_core::manufactured::u_star_generic(z), x);
        let mut gfd = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += step;
            xm[j] -= step;
            let up = problem.u_star(xp).unwrap();
            let um = problem.u_star(xm).unwrap();
            for i in 0..3 {
                gfd[i][j] = (up[i] - um[i]) / (2.0 * step);
                worst = worst.max((gfd[i][j] - gu[i][j]).abs());
            }
        }
        let e = linalg::sym(&linalg::mat_mul(&p, &linalg::mat_mul(&gfd, &p)));
        let h = Sphere::default().frame_at(x).unwrap().h;
        let lam = -linalg::ddot(&e, &h);
        worst = worst.max((lam - problem.lambda(x).unwrap()).abs());
    }
    Ok(worst)
}

fn galerkin_residual() -> Result<f64, String> {
    let problem = SphereProblem;
    let mut worst: f64 = 0.0;
    for method in [Method::P2, Method::Lagrange] {
        let eta = (method != Method::Lagrange).then_some((1.0, 2.0));
        let cfg = config(method, 1, 2, 2, 1, eta, 1.0, vec![1]);
        let disc = Discretization::build(&Sphere::default(), default_box(), 2, cfg.setup).map_err(|e| e.to_string())?;
        let mut sys = build_system(&disc, &cfg.params, |x| problem.f_ext(x)).map_err(|e| e.to_string())?;
        let x = if method == Method::Lagrange {
            let (md, sd) = sys.multiplier_diag.clone().unwrap();
            let (inv, pinned) = block_preconditioner(&sys.a_diag, &md, &sd).map_err(|e| e.to_string())?;
            pin_dofs(&mut sys.matrix, &mut sys.rhs, &pinned);
            minres(&sys.matrix, &sys.rhs, &inv, SOLVER_TOL, 50_000).map_err(|e| e.to_string())?.0
        } else {
            let minv = jacobi(&sys.a_diag).map_err(|e| e.to_string())?;
            cg(&sys.matrix, &sys.rhs, &minv, SOLVER_TOL, 50_000).map_err(|e| e.to_string())?.0
        };
        worst = worst.max(residual(&sys.matrix, &sys.rhs, &x));
    }
    Ok(worst)
}

fn residual(k: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let kx = k.mul(x);
    let r: Vec<f64> = b.iter().zip(&kx).map(|(a, c)| a - c).collect();
    norm(&r) / norm(b)
}

fn deterministic_csv() -> Result<(), String> {
    let text = "method = \"p2\"\nk = 1\nk_p = 2\neta = { c = 1.0, e = 2.0 }\nrho = { c = 1.0, e = 1.0 }\nlevels = [1, 2]\n";
    let cfg = RunConfig::from_toml(text).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let flags = Flags { deterministic: true, quiet: true, output: Some(dir.path().to_path_buf()), ..Default::default() };
        study(&cfg, &flags).map_err(|e| e.to_string())?;
        files.push(std::fs::read(dir.path().join("results.csv")).map_err(|e| e.to_string())?);
    }
    if files[0] != files[1] {
        return Err("results.csv differs between runs".into());
    }
    Ok(())
}

fn criterion_11() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut notes = Vec::new();
    let mut ok = true;
    let mut note = |name: &str, r: Result<String, String>| match r {
        Ok(s) => notes.push(format!("{name} ok{s}")),
        Err(e) => {
            ok = false;
            notes.push(format!("{name} FAILED ({e})"));
        }
    };
    note("marching tets", marching_cases().map(|_| String::new()));
    note("watertight", watertight().map(|_| String::new()));
    note("partition of unity", partition_of_unity(&mut rng).map(|_| String::new()));
    note("spd/symmetry", spd_probes(&mut rng).map(|_| String::new()));
    note(
        "saturation",
        saturation().and_then(|v| if v < SATURATION { Ok(format!(" ({v:.1e})")) } else { Err(format!("relative change {v:.2e}")) }),
    );
    note(
        "derivatives",
        derivatives(&mut rng).and_then(|v| {
            if v <= DERIVATIVE_AGREEMENT {
                Ok(format!(" ({v:.1e})"))
            } else {
                Err(format!("max deviation {v:.2e}"))
            }
        }),
    );
    note(
        "galerkin residual",
        galerkin_residual().and_then(|v| if v <= SOLVER_TOL { Ok(format!(" ({v:.1e})")) } else { Err(format!("{v:.2e}")) }),
    );
    note("deterministic csv", deterministic_csv().map(|_| String::new()));
    Check { pass: ok, detail: notes.join(", ") }
}

type Criterion = (u32, &'static str, bool, fn() -> Check);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "P2h k=k_g=1 k_p=2 eta=h^-2 rho=h^-1: O(h)", true, || {
            energy_criterion(config(Method::P2, 1, 1, 2, 1, Some((1.0, 2.0)), 1.0, vec![1, 2, 3, 4]), EOC_K1, Some(RUNTIME_K1))
        }),
        (2, "P2h k=k_g=2 k_p=3: O(h^2)", true, || {
            energy_criterion(config(Method::P2, 2, 2, 3, 1, Some((1.0, 2.0)), 1.0, vec![1, 2, 3, 4]), EOC_K2, Some(RUNTIME_K2))
        }),
        (3, "P2h k=k_g=2 k_p=2: loss of one order", true, || {
            energy_criterion(config(Method::P2, 2, 2, 2, 1, Some((1.0, 2.0)), 1.0, vec![1, 2, 3, 4]), EOC_LOSS, None)
        }),
        (4, "P1h k=k_g=1 k_p=2 eta=h^-2: O(h)", true, || {
            energy_criterion(config(Method::P1, 1, 1, 2, 1, Some((1.0, 2.0)), 1.0, vec![1, 2, 3, 4]), EOC_K1, None)
        }),
        (5, "P1h k=k_g=k_p=1 eta=10h^-2: no convergence", true, || {
            match records(&config(Method::P1, 1, 1, 1, 1, Some((10.0, 2.0)), 1.0, vec![1, 2, 3, 4])) {
                Err(e) => Check { pass: false, detail: e },
                Ok((recs, secs)) => {
                    let o = last_eoc(&recs, |r| r.errors.energy);
                    Check {
                        pass: o <= EOC_NO_CONV_MAX,
                        detail: format!("eoc {o:.3} (max {EOC_NO_CONV_MAX}), errors [{}], {secs:.1} s", history(&recs, |r| r.errors.energy)),
                    }
                }
            }
        }),
        (6, "P1h k=k_g=2 k_p=4 eta=h^-3: O(h^1.5)", true, || {
            energy_criterion(config(Method::P1, 2, 2, 4, 1, Some((1.0, 3.0)), 1.0, vec![1, 2, 3, 4]), EOC_HALF, None)
        }),
        (7, "Lh k=k_l=1 k_g=2 rho=h^-1: O(h)", true, || {
            combined_criterion(config(Method::Lagrange, 1, 2, 1, 1, None, 1.0, vec![1, 2, 3, 4]), EOC_K1)
        }),
        (8, "Lh k=k_l=k_g=2 rho=h: O(h^2) velocity, O(h) multiplier", true, criterion_8),
        (9, "Lh k=2 k_l=1 k_g=3 rho=h^-1: O(h)", true, criterion_9),
        (10, "geometry orders", true, criterion_10),
        (11, "property suites", true, criterion_11),
        (12, "P2h k=k_g=3 k_p=4: O(h^3) (stretch)", false, || {
            energy_criterion(config(Method::P2, 3, 3, 4, 1, Some((1.0, 2.0)), 1.0, vec![1, 2, 3]), EOC_K3, None)
        }),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut gating_failures = Vec::new();
    for (id, name, gating, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let c = run();
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name}{}: {} [{:.1} s]", if gating { "" } else { " (non-gating)" }, c.detail, t.elapsed().as_secs_f64());
        if gating && !c.pass {
            gating_failures.push(id);
        }
    }
    if !gating_failures.is_empty() {
        println!("gating criteria failed: {gating_failures:?}");
        std::process::exit(1);
    }
}
