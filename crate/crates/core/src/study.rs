//! Error norms of the discrete solutions against the manufactured sphere
//! solution, geometry diagnostics, orders of convergence and the
//! multi-level driver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::assembly::{build_system, default_box, Discretization, DiscreteSetup, FormParams, Method, Resolved};
use crate::deform::{penalty_normal, weingarten_h};
use crate::error::{Error, Result};
use crate::fem::{interpolate_parametric, FeSpace, Tabulation};
use crate::geometry::{LevelSetOracle, Sphere};
use crate::linalg::{self, Mat3, Vec3};
use crate::manufactured::SphereProblem;
use crate::solver::{
    block_preconditioner, cg, default_maxit, direct, minres, pin_dofs, Factorization, NodalBlockJacobi, SolveReport, SolverKind,
    SolverOptions,
};
#[allow(unused_imports)]
use num_traits::Float;

/// Squared error contributions of one element.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementErrors {
    /// Strain and zero-order part of the method's energy.
    pub a: f64,
    pub s: f64,
    pub k: f64,
    pub l2: f64,
    pub l2_tan: f64,
    /// `‖P_h ∇e P_h‖²` on `Γ_h`.
    pub h1_semi: f64,
    pub m_l2: f64,
    pub m_stab: f64,
}

impl core::ops::AddAssign for ElementErrors {
    fn add_assign(&mut self, o: Self) {
        self.a += o.a;
        self.s += o.s;
        self.k += o.k;
        self.l2 += o.l2;
        self.l2_tan += o.l2_tan;
        self.h1_semi += o.h1_semi;
        self.m_l2 += o.m_l2;
        self.m_stab += o.m_stab;
    }
}

/// Error norms of one solve. `terms` holds the squared a-, s- and k-parts of
/// the energy error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub energy: f64,
    pub terms: [f64; 3],
    pub m: Option<f64>,
    pub l2: f64,
    pub l2_tan: f64,
    pub h1: f64,
}

impl ErrorReport {
    pub fn from_sums(s: &ElementErrors, with_multiplier: bool) -> Self {
        ErrorReport {
            energy: (s.a + s.s + s.k).sqrt(),
            terms: [s.a, s.s, s.k],
            m: with_multiplier.then(|| (s.m_l2 + s.m_stab).sqrt()),
            l2: s.l2.sqrt(),
            l2_tan: s.l2_tan.sqrt(),
            h1: (s.l2 + s.h1_semi).sqrt(),
        }
    }

    /// `(‖e_u‖² + ‖e_λ‖_M²)^{1/2}`
    pub fn combined(&self) -> f64 {
        let m = self.m.unwrap_or(0.0);
        (self.energy * self.energy + m * m).sqrt()
    }
}

/// Exact fields extended off the surface, with gradients.
pub trait ExactSolution {
    fn velocity(&self, x: Vec3) -> Result<(Vec3, Mat3)>;
    fn multiplier(&self, x: Vec3) -> Result<(f64, Vec3)>;
}

impl ExactSolution for SphereProblem {
    fn velocity(&self, x: Vec3) -> Result<(Vec3, Mat3)> {
        self.u_ext(x)
    }

    fn multiplier(&self, x: Vec3) -> Result<(f64, Vec3)> {
        self.lambda_ext(x)
    }
}

fn eval_vector(tab: &Tabulation, finv_t: &Mat3, dofs: &[u32], coeffs: &[f64]) -> (Vec3, Mat3) {
    let mut v = [0.0; 3];
    let mut g = [[0.0; 3]; 3];
    for i in 0..tab.n {
        let gi = linalg::mat_vec(finv_t, tab.grads[i]);
        let base = 3 * dofs[i] as usize;
        for c in 0..3 {
            let a = coeffs[base + c];
            v[c] += a * tab.vals[i];
            for j in 0..3 {
                g[c][j] += a * gi[j];
            }
        }
    }
    (v, g)
}

fn eval_scalar(tab: &Tabulation, finv_t: &Mat3, dofs: &[u32], coeffs: &[f64]) -> (f64, Vec3) {
    let mut v = 0.0;
    let mut g = [0.0; 3];
    for i in 0..tab.n {
        let a = coeffs[dofs[i] as usize];
        v += a * tab.vals[i];
        g = linalg::axpy(a, linalg::mat_vec(finv_t, tab.grads[i]), g);
    }
    (v, g)
}

/// Per-element squared errors of `u^e − u_h` (and `λ^e − λ_h` when a
/// multiplier is given) in the terms of the method's norms.
pub fn element_errors(
    disc: &Discretization,
    params: &Resolved,
    exact: &impl ExactSolution,
    u_h: &[f64],
    lambda_h: Option<&[f64]>,
) -> Result<Vec<ElementErrors>> {
    let method = disc.setup.method;
    let space = &disc.velocity;
    if u_h.len() != 3 * space.n_dofs() {
        return Err(Error::Assembly(format!("velocity vector has length {}, expected {}", u_h.len(), 3 * space.n_dofs())));
    }
    let mul = match (lambda_h, disc.multiplier.as_ref()) {
        (Some(l), Some(m)) if l.len() == m.n_dofs() => Some((l, m)),
        (Some(l), Some(m)) => {
            return Err(Error::Assembly(format!("multiplier vector has length {}, expected {}", l.len(), m.n_dofs())))
        }
        (Some(_), None) => return Err(Error::Config("no multiplier space".into())),
        _ => None,
    };
    let tangential = method == Method::P2;
    if tangential && disc.weingarten.is_none() {
        return Err(Error::Config("the tangential strain needs the discrete Weingarten map".into()));
    }
    let mut out = vec![ElementErrors::default(); disc.n_elements()];
    let mut spts = Vec::new();
    let mut vpts = Vec::new();
    for (e, acc) in out.iter_mut().enumerate() {
        let dofs = space.element_dofs(e);
        disc.surface_points(e, &mut spts)?;
        for q in &spts {
            let tab = space.basis().tabulate(q.xi);
            let (uh, guh) = eval_vector(&tab, &q.finv_t, dofs, u_h);
            let (ue, gue) = exact.velocity(q.x)?;
            let err = linalg::sub(ue, uh);
            let gerr = linalg::mat_sub(&gue, &guh);
            let nh = q.n_h;
            let p = linalg::projector(nh);
            let perr = linalg::mat_vec(&p, err);
            let (strain, mass) = if tangential {
                let hh = disc.weingarten.as_ref().unwrap().eval(e, q.xi, &q.finv_t);
                let s = crate::assembly::strain_th(&gerr, err, nh, &hh);
                (linalg::ddot(&s, &s), linalg::dot(perr, perr))
            } else {
                let s = crate::assembly::strain_h(&gerr, nh);
                (linalg::ddot(&s, &s), linalg::dot(err, err))
            };
            acc.a += q.w * (strain + mass);
            if method != Method::Lagrange {
                let nt = disc.penalty_normal.as_ref().ok_or_else(|| Error::Config("no penalty normal".into()))?.eval(e, q.xi, &q.finv_t)?;
                let en = linalg::dot(err, nt);
                acc.k += q.w * params.eta * en * en;
            }
            acc.l2 += q.w * linalg::dot(err, err);
            acc.l2_tan += q.w * linalg::dot(perr, perr);
            let sg = linalg::mat_mul(&p, &linalg::mat_mul(&gerr, &p));
            acc.h1_semi += q.w * linalg::ddot(&sg, &sg);
            if let Some((l, m)) = mul {
                let tm = m.basis().tabulate(q.xi);
                let (lh, _) = eval_scalar(&tm, &q.finv_t, m.element_dofs(e), l);
                let (le, _) = exact.multiplier(q.x)?;
                acc.m_l2 += q.w * (le - lh) * (le - lh);
            }
        }
        let need_volume = params.rho != 0.0 || (mul.is_some() && params.rho_tilde != 0.0);
        if need_volume {
            disc.volume_points(e, &mut vpts)?;
            for q in &vpts {
                if params.rho != 0.0 {
                    let tab = space.basis().tabulate(q.xi);
                    let (_, guh) = eval_vector(&tab, &q.finv_t, dofs, u_h);
                    let (_, gue) = exact.velocity(q.x)?;
                    let gn = linalg::mat_vec(&linalg::mat_sub(&gue, &guh), q.n_h);
                    acc.s += q.w * params.rho * linalg::dot(gn, gn);
                }
                if let Some((l, m)) = mul {
                    if params.rho_tilde != 0.0 {
                        let tm = m.basis().tabulate(q.xi);
                        let (_, glh) = eval_scalar(&tm, &q.finv_t, m.element_dofs(e), l);
                        let (_, gle) = exact.multiplier(q.x)?;
                        let dn = linalg::dot(linalg::sub(gle, glh), q.n_h);
                        acc.m_stab += q.w * params.rho_tilde * dn * dn;
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn error_report(
    disc: &Discretization,
    params: &Resolved,
    exact: &impl ExactSolution,
    u_h: &[f64],
    lambda_h: Option<&[f64]>,
) -> Result<ErrorReport> {
    let per = element_errors(disc, params, exact, u_h, lambda_h)?;
    let mut sum = ElementErrors::default();
    for v in per {
        sum += v;
    }
    Ok(ErrorReport::from_sums(&sum, lambda_h.is_some()))
}

/// Method-matched energy norm of `u^e − u_h`.
pub fn energy_error(disc: &Discretization, params: &Resolved, exact: &impl ExactSolution, u_h: &[f64]) -> Result<f64> {
    Ok(error_report(disc, params, exact, u_h, None)?.energy)
}

/// `‖λ^e − λ_h‖_M` with `ρ̃` as the weight of the normal-derivative part.
pub fn multiplier_error(disc: &Discretization, params: &Resolved, exact: &impl ExactSolution, u_h: &[f64], lambda_h: &[f64]) -> Result<f64> {
    let r = error_report(disc, params, exact, u_h, Some(lambda_h))?;
    Ok(r.m.unwrap_or(0.0))
}

/// Parametric interpolant of `u^e`, interleaved by component.
pub fn interpolate_velocity(disc: &Discretization, exact: &impl ExactSolution) -> Result<Vec<f64>> {
    Ok(interpolate_parametric(&disc.velocity, &disc.deformation, 3, |x| Ok(exact.velocity(x)?.0.to_vec()))?.coeffs)
}

/// Parametric interpolant of `λ^e` in the multiplier space.
pub fn interpolate_multiplier(disc: &Discretization, exact: &impl ExactSolution) -> Result<Vec<f64>> {
    let m = disc.multiplier.as_ref().ok_or_else(|| Error::Config("no multiplier space".into()))?;
    Ok(interpolate_parametric(m, &disc.deformation, 1, |x| Ok(vec![exact.multiplier(x)?.0]))?.coeffs)
}

/// Local orders `log(e_{i−1}/e_i) / log(h_{i−1}/h_i)`; NaN marks pairs
/// involving a zero or non-finite error.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::Config(format!("eoc needs two equally long lists of length >= 2, got {} and {}", errors.len(), hs.len())));
    }
    Ok((1..errors.len())
        .map(|i| {
            let (a, b) = (errors[i - 1], errors[i]);
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                f64::NAN
            } else {
                (a / b).ln() / (hs[i - 1] / hs[i]).ln()
            }
        })
        .collect())
}

fn eoc_pair(prev: Option<(f64, f64)>, cur: (f64, f64)) -> Option<f64> {
    prev.map(|p| eoc(&[p.0, cur.0], &[p.1, cur.1]).map(|v| v[0]).unwrap_or(f64::NAN))
}

/// Geometric errors on one level: `|area(Γ_h) − area(Γ)|` and the maximum
/// deviations of `n_h`, `ñ_h` and `H_h` from the exact fields at the surface
/// quadrature points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryReport {
    pub level: u32,
    pub h: f64,
    pub area: f64,
    pub normal: f64,
    pub penalty_normal: Option<f64>,
    pub weingarten: f64,
}

pub fn geometry_diagnostics<O: LevelSetOracle>(
    oracle: &O,
    exact_area: f64,
    level: u32,
    kg: usize,
    kp: Option<usize>,
) -> Result<GeometryReport> {
    let setup = DiscreteSetup {
        method: Method::Lagrange,
        k: 1,
        kg,
        kp: kp.unwrap_or(kg),
        kl: 1,
        source: crate::deform::GeometrySource::Discrete,
    };
    let disc = Discretization::build(oracle, default_box(), level, setup)?;
    let wf = weingarten_h(&disc.deformation)?;
    let pn = match kp {
        Some(kp) => Some(penalty_normal(&disc.mesh, &disc.deformation, oracle, kp)?),
        None => None,
    };
    let mut area = 0.0;
    let (mut nerr, mut perr, mut herr) = (0.0f64, 0.0f64, 0.0f64);
    let mut pts = Vec::new();
    for e in 0..disc.n_elements() {
        disc.surface_points(e, &mut pts)?;
        for q in &pts {
            area += q.w;
            let fr = oracle.frame_at(q.x)?;
            nerr = nerr.max(linalg::norm(linalg::sub(q.n_h, fr.n)));
            let hh = wf.eval(e, q.xi, &q.finv_t);
            herr = herr.max(linalg::frobenius(&linalg::mat_sub(&hh, &fr.h)));
            if let Some(pn) = &pn {
                perr = perr.max(linalg::norm(linalg::sub(pn.eval(e, q.xi, &q.finv_t)?, fr.n)));
            }
        }
    }
    Ok(GeometryReport {
        level,
        h: disc.h(),
        area: (area - exact_area).abs(),
        normal: nerr,
        penalty_normal: pn.map(|_| perr),
        weingarten: herr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub setup: DiscreteSetup,
    pub params: FormParams,
    pub levels: Vec<u32>,
    pub solver: SolverOptions,
}

impl StudyConfig {
    /// Default levels 1..=4, or 1..=3 for cubic elements.
    /// Levels 1–4, or 1–3 where the finest level does not fit a desk budget:
    /// cubic elements, and quadratic multiplier systems (direct factor size).
    pub fn default_levels(method: Method, k: usize) -> Vec<u32> {
        if k >= 3 || (method == Method::Lagrange && k >= 2) {
            vec![1, 2, 3]
        } else {
            vec![1, 2, 3, 4]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.setup;
        for (name, v, max) in [("k", s.k, 3), ("k_g", s.kg, 3), ("k_p", s.kp, 4), ("k_l", s.kl, 3)] {
            if v < 1 || v > max {
                return Err(Error::Config(format!("{name} = {v} must lie in 1..={max}")));
            }
        }
        match s.method {
            Method::P1 | Method::P2 => {
                if s.kp < s.kg {
                    return Err(Error::Config(format!("k_p = {} must be at least k_g = {}", s.kp, s.kg)));
                }
                if self.params.eta.is_none() {
                    return Err(Error::Config("penalty methods need eta".into()));
                }
                Ok(())
            }
            Method::Lagrange => {
                if s.kl > s.k {
                    return Err(Error::Config(format!("k_l = {} must not exceed k = {}", s.kl, s.k)));
                }
                if self.params.rho_tilde.is_none() {
                    return Err(Error::Config("the multiplier method needs rho_tilde".into()));
                }
                if self.solver.kind == SolverKind::Cg {
                    return Err(Error::Config("the multiplier system is indefinite; use minres or direct".into()));
                }
                Ok(())
            }
        }?;
        if self.levels.is_empty() {
            return Err(Error::Config("no levels given".into()));
        }
        if !(self.solver.tol > 0.0) {
            return Err(Error::Config(format!("solver tolerance {} must be positive", self.solver.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Discretize,
    Assemble,
    Solve,
    Errors,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Discretize => "discretize",
            Stage::Assemble => "assemble",
            Stage::Solve => "solve",
            Stage::Errors => "errors",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub level: u32,
    pub h: f64,
    pub ndof_u: usize,
    pub ndof_lambda: usize,
    pub errors: ErrorReport,
    pub eoc_energy: Option<f64>,
    pub eoc_m: Option<f64>,
    pub solve: SolveReport,
    /// Wall time of the whole level.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageFailure {
    pub level: u32,
    pub stage: Stage,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelOutcome {
    Done(StudyRecord),
    Failed(StageFailure),
}

/// Hooks of the study driver. The core has no clock; callers that want
/// timings supply one through `seconds`.
pub trait Observer {
    fn seconds(&mut self) -> f64 {
        0.0
    }
    fn stage(&mut self, _level: u32, _stage: Stage) {}
    /// Sees the discrete solution of a level before it is dropped.
    fn solved(&mut self, _solution: &LevelSolution, _errors: &ErrorReport) {}
    fn level_done(&mut self, _outcome: &LevelOutcome) {}
}

pub struct Silent;

impl Observer for Silent {}

/// Result of one level: discretization, solution vectors and report.
pub struct LevelSolution {
    pub disc: Discretization,
    pub params: Resolved,
    pub u: Vec<f64>,
    pub lambda: Option<Vec<f64>>,
    pub solve: SolveReport,
}

/// Builds, assembles and solves one level. Failures carry the stage.
pub fn solve_level<Obs: Observer>(
    config: &StudyConfig,
    level: u32,
    obs: &mut Obs,
) -> core::result::Result<LevelSolution, StageFailure> {
    let fail = |stage| move |error| StageFailure { level, stage, error };
    let problem = SphereProblem;
    obs.stage(level, Stage::Discretize);
    let disc = Discretization::build(&Sphere::default(), default_box(), level, config.setup).map_err(fail(Stage::Discretize))?;
    obs.stage(level, Stage::Assemble);
    let mut sys = build_system(&disc, &config.params, |x| problem.f_ext(x)).map_err(fail(Stage::Assemble))?;
    obs.stage(level, Stage::Solve);
    let t0 = obs.seconds();
    let n = sys.matrix.nrows;
    let maxit = config.solver.maxit.unwrap_or_else(|| default_maxit(n));
    let tol = config.solver.tol;
    let (x, mut report) = match sys.method {
        Method::P1 | Method::P2 => {
            let nodal = || NodalBlockJacobi::new(&sys.matrix, sys.n_u, Vec::new());
            match config.solver.kind {
                SolverKind::Cg => nodal().and_then(|p| cg(&sys.matrix, &sys.rhs, &p, tol, maxit)),
                SolverKind::Minres => nodal().and_then(|p| minres(&sys.matrix, &sys.rhs, &p, tol, maxit)),
                SolverKind::Direct => direct(&sys.matrix, &sys.rhs, tol, Factorization::Cholesky),
            }
            .map_err(fail(Stage::Solve))?
        }
        Method::Lagrange => {
            let (md, sd) = sys.multiplier_diag.as_ref().expect("multiplier diagonals");
            let (inv, pinned) = block_preconditioner(&sys.a_diag, md, sd).map_err(fail(Stage::Solve))?;
            if !pinned.is_empty() {
                log::warn!("level {level}: pinned {} isolated multiplier dofs", pinned.len());
            }
            pin_dofs(&mut sys.matrix, &mut sys.rhs, &pinned);
            let (x, mut r) = match config.solver.kind {
                SolverKind::Direct => direct(&sys.matrix, &sys.rhs, tol, Factorization::Saddle { n_u: sys.n_u }),
                _ => NodalBlockJacobi::new(&sys.matrix, sys.n_u, inv[sys.n_u..].to_vec())
                    .and_then(|p| minres(&sys.matrix, &sys.rhs, &p, tol, maxit)),
            }
            .map_err(fail(Stage::Solve))?;
            r.pinned = pinned.len();
            (x, r)
        }
    };
    report.seconds = obs.seconds() - t0;
    let (u, lambda) = if sys.n_lambda > 0 {
        (x[..sys.n_u].to_vec(), Some(x[sys.n_u..].to_vec()))
    } else {
        (x, None)
    };
    Ok(LevelSolution { disc, params: sys.params, u, lambda, solve: report })
}

/// Runs all levels in order. A failing level is reported and skipped; the
/// orders of later levels refer to the last successful one.
pub fn run_study<Obs: Observer>(config: &StudyConfig, obs: &mut Obs) -> Result<Vec<LevelOutcome>> {
    config.validate()?;
    let problem = SphereProblem;
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64, Option<f64>)> = None;
    for &level in &config.levels {
        let start = obs.seconds();
        let outcome = match solve_level(config, level, obs) {
            Err(f) => LevelOutcome::Failed(f),
            Ok(sol) => {
                obs.stage(level, Stage::Errors);
                match error_report(&sol.disc, &sol.params, &problem, &sol.u, sol.lambda.as_deref()) {
                    Err(error) => LevelOutcome::Failed(StageFailure { level, stage: Stage::Errors, error }),
                    Ok(errors) => {
                        obs.solved(&sol, &errors);
                        let h = sol.disc.h();
                        let eoc_energy = eoc_pair(prev.map(|p| (p.0, p.1)), (errors.energy, h));
                        let eoc_m = match (prev.and_then(|p| p.2.map(|m| (m, p.1))), errors.m) {
                            (Some(pm), Some(m)) => Some(eoc(&[pm.0, m], &[pm.1, h]).map(|v| v[0]).unwrap_or(f64::NAN)),
                            _ => None,
                        };
                        prev = Some((errors.energy, h, errors.m));
                        LevelOutcome::Done(StudyRecord {
                            level,
                            h,
                            ndof_u: sol.disc.velocity.n_dofs(),
                            ndof_lambda: sol.disc.multiplier.as_ref().map_or(0, FeSpace::n_dofs),
                            errors,
                            eoc_energy,
                            eoc_m,
                            solve: sol.solve,
                            seconds: 0.0,
                        })
                    }
                }
            }
        };
        let outcome = match outcome {
            LevelOutcome::Done(mut r) => {
                r.seconds = obs.seconds() - start;
                LevelOutcome::Done(r)
            }
            f => f,
        };
        obs.level_done(&outcome);
        out.push(outcome);
    }
    Ok(out)
}
