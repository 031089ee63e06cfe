//! Discrete forms on `Γ_h` and `Ω_Θ^Γ`, load vector and the linear systems of
//! the two penalty methods and the Lagrange multiplier method.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cut::{extract_cut, interpolate_levelset, CutTopology, VertexValues};
use crate::deform::{
    build_theta, penalty_normal, weingarten_h, GeometrySource, MeshDeformation, PenaltyNormal, SurfQuadPoint, VolQuadPoint,
    WeingartenField,
};
use crate::error::{Error, Result};
use crate::fem::{FeSpace, Tabulation, MAX_LOCAL};
use crate::geometry::LevelSetOracle;
use crate::linalg::{self, Mat3, Vec3};
use crate::mesh::{BackgroundMesh, BoundingBox};
use crate::quadrature::{TetRule, TriangleRule};
use crate::sparse::{coupling_pattern, CsrMatrix};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Inconsistent penalty: `a_h + s_h + k_h`.
    P1,
    /// Consistent penalty: `a_{T,h} + s_h + k_h`.
    P2,
    /// Lagrange multiplier: `[[a_h + s_h, Bᵀ], [B, 0]]`.
    Lagrange,
}

/// A parameter `c · h^{-e}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub c: f64,
    pub e: f64,
}

impl Scaling {
    pub const fn new(c: f64, e: f64) -> Self {
        Scaling { c, e }
    }

    pub fn resolve(&self, h: f64) -> f64 {
        self.c * h.powf(-self.e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormParams {
    pub eta: Option<Scaling>,
    pub rho: Scaling,
    pub rho_tilde: Option<Scaling>,
}

/// Parameters resolved at a nominal mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    pub eta: f64,
    pub rho: f64,
    pub rho_tilde: f64,
}

impl FormParams {
    pub fn resolve(&self, method: Method, h: f64) -> Result<Resolved> {
        let eta = match (method, self.eta) {
            (Method::Lagrange, _) => 0.0,
            (_, Some(s)) => s.resolve(h),
            (_, None) => return Err(Error::Config("penalty methods need the parameter eta".into())),
        };
        let rho_tilde = match (method, self.rho_tilde) {
            (Method::Lagrange, Some(s)) => s.resolve(h),
            (Method::Lagrange, None) => return Err(Error::Config("the multiplier method needs rho_tilde".into())),
            _ => 0.0,
        };
        let rho = self.rho.resolve(h);
        if method != Method::Lagrange && !(eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        for (name, v) in [("rho", rho), ("rho_tilde", rho_tilde)] {
            if v != 0.0 && (v < 0.1 * h || v > 10.0 / h) {
                log::warn!("{name} = {v} is outside the recommended range h <= {name} <= 1/h");
            }
        }
        Ok(Resolved { eta, rho, rho_tilde })
    }
}

/// Polynomial degrees and geometry options of a discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteSetup {
    pub method: Method,
    pub k: usize,
    pub kg: usize,
    /// Degree of the penalty normal (penalty methods).
    pub kp: usize,
    /// Degree of the multiplier space (multiplier method).
    pub kl: usize,
    pub source: GeometrySource,
}

impl DiscreteSetup {
    /// Two above the polynomial degree of the integrands on flat geometry,
    /// so that the rational geometric factors are resolved as well.
    pub fn surface_degree(&self) -> usize {
        2 * self.k + 4
    }

    pub fn volume_degree(&self) -> usize {
        2 * self.k + 2
    }
}

/// Everything geometric and discrete needed on one refinement level.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub setup: DiscreteSetup,
    pub mesh: BackgroundMesh,
    pub cut: CutTopology,
    pub deformation: MeshDeformation,
    pub velocity: FeSpace,
    pub multiplier: Option<FeSpace>,
    pub penalty_normal: Option<PenaltyNormal>,
    pub weingarten: Option<WeingartenField>,
    pub surface_rule: TriangleRule,
    pub volume_rule: TetRule,
}

/// Bounding box of the background mesh used for the sphere.
pub fn default_box() -> BoundingBox {
    BoundingBox::cube(1.5)
}

impl Discretization {
    pub fn build<O: LevelSetOracle>(oracle: &O, bbox: BoundingBox, level: u32, setup: DiscreteSetup) -> Result<Self> {
        let mesh = BackgroundMesh::new(bbox, level)?;
        let cut = extract_cut(&mesh, &VertexValues::sample(&mesh, oracle))?;
        if cut.n_active() == 0 {
            return Err(Error::Geometry("the level set does not cut the background mesh".into()));
        }
        cut.check_tube(oracle)?;
        let phi_h = interpolate_levelset(&mesh, &cut, oracle, setup.kg)?;
        let deformation = build_theta(&mesh, &cut, &phi_h, oracle, setup.source)?;
        let tets = cut.active_tets();
        let velocity = FeSpace::new(&mesh, &tets, setup.k)?;
        let (multiplier, pn, wf) = match setup.method {
            Method::Lagrange => {
                if setup.kl < 1 || setup.kl > setup.k {
                    return Err(Error::Config(format!("multiplier degree {} must lie in 1..={}", setup.kl, setup.k)));
                }
                (Some(FeSpace::new(&mesh, &tets, setup.kl)?), None, None)
            }
            Method::P1 => (None, Some(penalty_normal(&mesh, &deformation, oracle, setup.kp)?), None),
            Method::P2 => (
                None,
                Some(penalty_normal(&mesh, &deformation, oracle, setup.kp)?),
                Some(weingarten_h(&deformation)?),
            ),
        };
        Ok(Discretization {
            surface_rule: TriangleRule::new(setup.surface_degree()),
            volume_rule: TetRule::new(setup.volume_degree()),
            setup,
            mesh,
            cut,
            deformation,
            velocity,
            multiplier,
            penalty_normal: pn,
            weingarten: wf,
        })
    }

    pub fn h(&self) -> f64 {
        self.mesh.cube_edge
    }

    pub fn n_elements(&self) -> usize {
        self.cut.n_active()
    }

    /// Replaces the quadrature rules (used for saturation checks).
    pub fn with_degrees(mut self, surface: usize, volume: usize) -> Self {
        self.surface_rule = TriangleRule::new(surface);
        self.volume_rule = TetRule::new(volume);
        self
    }

    pub fn surface_points(&self, e: usize, out: &mut Vec<SurfQuadPoint>) -> Result<()> {
        out.clear();
        self.deformation.surface_points(&self.cut, e, &self.surface_rule, out)
    }

    pub fn volume_points(&self, e: usize, out: &mut Vec<VolQuadPoint>) -> Result<()> {
        out.clear();
        self.deformation.volume_points(e, &self.volume_rule, out)
    }

    pub fn surface_area(&self) -> Result<f64> {
        let mut pts = Vec::new();
        let mut a = 0.0;
        for e in 0..self.n_elements() {
            self.surface_points(e, &mut pts)?;
            a += pts.iter().map(|q| q.w).sum::<f64>();
        }
        Ok(a)
    }
}

/// `E_h = ½(P_h ∇u P_h + (P_h ∇u P_h)ᵀ)` with `grad[i][j] = ∂u_i/∂x_j`.
pub fn strain_h(grad: &Mat3, n_h: Vec3) -> Mat3 {
    let p = linalg::projector(n_h);
    linalg::sym(&linalg::mat_mul(&p, &linalg::mat_mul(grad, &p)))
}

/// `E_{T,h} = E_h − (u · n_h) H_h`.
pub fn strain_th(grad: &Mat3, value: Vec3, n_h: Vec3, h_h: &Mat3) -> Mat3 {
    linalg::mat_sub(&strain_h(grad, n_h), &linalg::mat_scale(linalg::dot(value, n_h), h_h))
}

/// Weights of the velocity forms combined in one assembly pass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FormWeights {
    /// Strain term, `E_h : E_h` or `E_{T,h} : E_{T,h}`.
    pub strain: f64,
    /// Zero-order term, `u · v` or `P_h u · P_h v`.
    pub mass: f64,
    /// Use the tangential variants of the two terms above.
    pub tangential: bool,
    /// `η` of `k_h`.
    pub penalty: f64,
    /// `ρ` of `s_h`.
    pub stabilization: f64,
}

impl FormWeights {
    pub fn a_h() -> Self {
        FormWeights { strain: 1.0, mass: 1.0, ..Default::default() }
    }

    pub fn a_th() -> Self {
        FormWeights { strain: 1.0, mass: 1.0, tangential: true, ..Default::default() }
    }

    pub fn k_h(eta: f64) -> Self {
        FormWeights { penalty: eta, ..Default::default() }
    }

    pub fn s_h(rho: f64) -> Self {
        FormWeights { stabilization: rho, ..Default::default() }
    }

    pub fn for_method(method: Method, p: &Resolved) -> Self {
        match method {
            Method::P1 => FormWeights { strain: 1.0, mass: 1.0, tangential: false, penalty: p.eta, stabilization: p.rho },
            Method::P2 => FormWeights { strain: 1.0, mass: 1.0, tangential: true, penalty: p.eta, stabilization: p.rho },
            Method::Lagrange => FormWeights { strain: 1.0, mass: 1.0, tangential: false, penalty: 0.0, stabilization: p.rho },
        }
    }
}

/// Physical gradients of a tabulated basis.
#[inline]
fn physical_grads(tab: &Tabulation, finv_t: &Mat3, out: &mut [Vec3; MAX_LOCAL]) {
    for i in 0..tab.n {
        out[i] = linalg::mat_vec(finv_t, tab.grads[i]);
    }
}

/// Adds a dense local block to interleaved rows and columns.
fn scatter_vector_block(m: &mut CsrMatrix, dofs: &[u32], local: &[f64]) {
    let n = 3 * dofs.len();
    for (a, &da) in dofs.iter().enumerate() {
        let row0 = 3 * da as usize;
        for (b, &db) in dofs.iter().enumerate() {
            let p0 = m.position(row0, 3 * db as usize).expect("element coupling in pattern");
            let off = p0 - m.row_ptr[row0];
            for c in 0..3 {
                let base = m.row_ptr[row0 + c] + off;
                let lrow = (3 * a + c) * n + 3 * b;
                for d in 0..3 {
                    m.values[base + d] += local[lrow + d];
                }
            }
        }
    }
}

/// Assembles a weighted sum of the velocity forms.
pub fn assemble_forms(disc: &Discretization, w: &FormWeights) -> Result<CsrMatrix> {
    let space = &disc.velocity;
    let mut m = CsrMatrix::from_block_pattern(&space.adjacency(), space.n_dofs(), 3, 3);
    let nl = space.n_local();
    let n = 3 * nl;
    let mut local = vec![0.0; n * n];
    let mut spts = Vec::new();
    let mut vpts = Vec::new();
    let mut g = [[0.0; 3]; MAX_LOCAL];
    let mut b = [[0.0; 3]; MAX_LOCAL];
    let mut s = [[0.0; 3]; MAX_LOCAL];
    let use_surface = w.strain != 0.0 || w.mass != 0.0 || w.penalty != 0.0;
    if w.penalty != 0.0 && disc.penalty_normal.is_none() {
        return Err(Error::Config("the penalty term needs a penalty normal".into()));
    }
    if w.tangential && disc.weingarten.is_none() {
        return Err(Error::Config("the tangential strain needs the discrete Weingarten map".into()));
    }
    for e in 0..disc.n_elements() {
        local.iter_mut().for_each(|v| *v = 0.0);
        if use_surface {
            disc.surface_points(e, &mut spts)?;
            for q in &spts {
                let tab = space.basis().tabulate(q.xi);
                physical_grads(&tab, &q.finv_t, &mut g);
                let nh = q.n_h;
                let p = linalg::projector(nh);
                for i in 0..nl {
                    b[i] = linalg::mat_vec(&p, g[i]);
                }
                // s[i][c] = E(N_i e_c) : H_h
                let hh = if w.tangential {
                    let hm = disc.weingarten.as_ref().unwrap().eval(e, q.xi, &q.finv_t);
                    let hs = linalg::add_mat(&hm, &linalg::transpose(&hm));
                    for i in 0..nl {
                        s[i] = linalg::scale(0.5, linalg::mat_vec(&p, linalg::mat_vec(&hs, b[i])));
                    }
                    linalg::ddot(&hm, &hm)
                } else {
                    0.0
                };
                let nt = match &disc.penalty_normal {
                    Some(pn) if w.penalty != 0.0 => pn.eval(e, q.xi, &q.finv_t)?,
                    _ => [0.0; 3],
                };
                let wq = q.w;
                for i in 0..nl {
                    let ni = tab.vals[i];
                    for j in 0..nl {
                        let nj = tab.vals[j];
                        let bij = linalg::dot(b[i], b[j]);
                        for c in 0..3 {
                            let row = (3 * i + c) * n + 3 * j;
                            for d in 0..3 {
                                let mut v = 0.0;
                                if w.strain != 0.0 {
                                    let mut ee = 0.5 * (p[c][d] * bij + b[j][c] * b[i][d]);
                                    if w.tangential {
                                        ee += -nj * nh[d] * s[i][c] - ni * nh[c] * s[j][d] + ni * nj * nh[c] * nh[d] * hh;
                                    }
                                    v += w.strain * ee;
                                }
                                if w.mass != 0.0 {
                                    let pm = if w.tangential { p[c][d] } else if c == d { 1.0 } else { 0.0 };
                                    v += w.mass * ni * nj * pm;
                                }
                                if w.penalty != 0.0 {
                                    v += w.penalty * ni * nj * nt[c] * nt[d];
                                }
                                local[row + d] += wq * v;
                            }
                        }
                    }
                }
            }
        }
        if w.stabilization != 0.0 {
            disc.volume_points(e, &mut vpts)?;
            for q in &vpts {
                let tab = space.basis().tabulate(q.xi);
                physical_grads(&tab, &q.finv_t, &mut g);
                let mut gn = [0.0; MAX_LOCAL];
                for i in 0..nl {
                    gn[i] = linalg::dot(g[i], q.n_h);
                }
                let wq = q.w * w.stabilization;
                for i in 0..nl {
                    for j in 0..nl {
                        let v = wq * gn[i] * gn[j];
                        for c in 0..3 {
                            local[(3 * i + c) * n + 3 * j + c] += v;
                        }
                    }
                }
            }
        }
        scatter_vector_block(&mut m, space.element_dofs(e), &local);
    }
    Ok(m)
}

/// Coupling matrix of `b_h` (rows: multiplier dofs, columns: interleaved
/// velocity dofs) together with the diagonals of the multiplier surface mass
/// matrix and of `ρ̃ ∫ (n_h · ∇μ)²`, which feed the preconditioner.
pub struct Coupling {
    pub b: CsrMatrix,
    pub mass_diag: Vec<f64>,
    pub stab_diag: Vec<f64>,
}

pub fn assemble_b(disc: &Discretization, rho_tilde: f64) -> Result<Coupling> {
    let vel = &disc.velocity;
    let mul = disc.multiplier.as_ref().ok_or_else(|| Error::Config("no multiplier space".into()))?;
    let pattern = coupling_pattern(mul.n_dofs(), disc.n_elements(), |e| mul.element_dofs(e), |e| vel.element_dofs(e));
    let mut bm = CsrMatrix::from_block_pattern(&pattern, vel.n_dofs(), 1, 3);
    let mut mass_diag = vec![0.0; mul.n_dofs()];
    let mut stab_diag = vec![0.0; mul.n_dofs()];
    let nl = vel.n_local();
    let ml = mul.n_local();
    let n = 3 * nl;
    let mut local = vec![0.0; ml * n];
    let mut spts = Vec::new();
    let mut vpts = Vec::new();
    let mut g = [[0.0; 3]; MAX_LOCAL];
    let mut gm = [[0.0; 3]; MAX_LOCAL];
    for e in 0..disc.n_elements() {
        local.iter_mut().for_each(|v| *v = 0.0);
        let mdofs = mul.element_dofs(e);
        disc.surface_points(e, &mut spts)?;
        for q in &spts {
            let tu = vel.basis().tabulate(q.xi);
            let tm = mul.basis().tabulate(q.xi);
            for m in 0..ml {
                mass_diag[mdofs[m] as usize] += q.w * tm.vals[m] * tm.vals[m];
                for i in 0..nl {
                    let v = q.w * tm.vals[m] * tu.vals[i];
                    for c in 0..3 {
                        local[m * n + 3 * i + c] += v * q.n_h[c];
                    }
                }
            }
        }
        if rho_tilde != 0.0 {
            disc.volume_points(e, &mut vpts)?;
            for q in &vpts {
                let tu = vel.basis().tabulate(q.xi);
                let tm = mul.basis().tabulate(q.xi);
                physical_grads(&tu, &q.finv_t, &mut g);
                physical_grads(&tm, &q.finv_t, &mut gm);
                for m in 0..ml {
                    let mn = linalg::dot(gm[m], q.n_h);
                    stab_diag[mdofs[m] as usize] += rho_tilde * q.w * mn * mn;
                    for i in 0..nl {
                        let v = rho_tilde * q.w * mn * linalg::dot(g[i], q.n_h);
                        for c in 0..3 {
                            local[m * n + 3 * i + c] += v * q.n_h[c];
                        }
                    }
                }
            }
        }
        let vdofs = vel.element_dofs(e);
        for (m, &dm) in mdofs.iter().enumerate() {
            let row = dm as usize;
            for (i, &di) in vdofs.iter().enumerate() {
                let p = bm.position(row, 3 * di as usize).expect("element coupling in pattern");
                for c in 0..3 {
                    bm.values[p + c] += local[m * n + 3 * i + c];
                }
            }
        }
    }
    Ok(Coupling { b: bm, mass_diag, stab_diag })
}

/// `(f_h, v)` with `f_h` a field evaluated at the points of `Γ_h`.
pub fn assemble_rhs<F>(disc: &Discretization, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(Vec3) -> Result<Vec3>,
{
    let space = &disc.velocity;
    let mut rhs = vec![0.0; 3 * space.n_dofs()];
    let mut spts = Vec::new();
    for e in 0..disc.n_elements() {
        disc.surface_points(e, &mut spts)?;
        let dofs = space.element_dofs(e);
        for q in &spts {
            let fv = f(q.x)?;
            let tab = space.basis().tabulate(q.xi);
            for (i, &d) in dofs.iter().enumerate() {
                for c in 0..3 {
                    rhs[3 * d as usize + c] += q.w * tab.vals[i] * fv[c];
                }
            }
        }
    }
    Ok(rhs)
}

/// Assembled system of one method.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub method: Method,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub n_u: usize,
    pub n_lambda: usize,
    /// Diagonal of the velocity block.
    pub a_diag: Vec<f64>,
    /// Multiplier surface mass and stabilization diagonals.
    pub multiplier_diag: Option<(Vec<f64>, Vec<f64>)>,
    pub params: Resolved,
}

pub fn build_system<F>(disc: &Discretization, params: &FormParams, f: F) -> Result<LinearSystem>
where
    F: FnMut(Vec3) -> Result<Vec3>,
{
    let method = disc.setup.method;
    let resolved = params.resolve(method, disc.h())?;
    let a = assemble_forms(disc, &FormWeights::for_method(method, &resolved))?;
    let rhs_u = assemble_rhs(disc, f)?;
    let n_u = a.nrows;
    let a_diag = a.diagonal();
    match method {
        Method::P1 | Method::P2 => Ok(LinearSystem {
            method,
            matrix: a,
            rhs: rhs_u,
            n_u,
            n_lambda: 0,
            a_diag,
            multiplier_diag: None,
            params: resolved,
        }),
        Method::Lagrange => {
            let cp = assemble_b(disc, resolved.rho_tilde)?;
            let n_lambda = cp.b.nrows;
            let matrix = CsrMatrix::saddle(&a, &cp.b)?;
            drop(a);
            let mut rhs = rhs_u;
            rhs.resize(n_u + n_lambda, 0.0);
            Ok(LinearSystem {
                method,
                matrix,
                rhs,
                n_u,
                n_lambda,
                a_diag,
                multiplier_diag: Some((cp.mass_diag, cp.stab_diag)),
                params: resolved,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Sphere;
    use crate::manufactured::SphereProblem;
    use crate::sparse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(method: Method, k: usize, kg: usize) -> DiscreteSetup {
        DiscreteSetup { method, k, kg, kp: kg.max(2), kl: 1, source: GeometrySource::Discrete }
    }

    fn disc(level: u32, s: DiscreteSetup) -> Discretization {
        Discretization::build(&Sphere::default(), default_box(), level, s).unwrap()
    }

    fn constant_field(n: usize, c: Vec3) -> Vec<f64> {
        (0..3 * n).map(|i| c[i % 3]).collect()
    }

    #[test]
    fn strain_examples() {
        let n = linalg::normalize([0.3, -0.2, 0.9]).unwrap();
        assert_eq!(strain_h(&linalg::ZERO3, n), linalg::ZERO3);
        let p = linalg::projector(n);
        assert!(linalg::frobenius(&linalg::mat_sub(&strain_h(&linalg::IDENTITY, n), &p)) < 1e-15);
        let a = linalg::mat_vec(&p, [1.0, 2.0, 3.0]);
        assert!(linalg::frobenius(&strain_h(&linalg::outer(n, a), n)) < 1e-15);
        let hm = linalg::mat_scale(2.0, &p);
        let t = linalg::mat_vec(&p, [0.5, 0.1, 0.0]);
        let d = linalg::mat_sub(&strain_th(&linalg::IDENTITY, t, n, &hm), &strain_h(&linalg::IDENTITY, n));
        assert!(linalg::frobenius(&d) < 1e-15);
        let neg = strain_th(&linalg::ZERO3, n, n, &hm);
        assert!(linalg::frobenius(&linalg::add_mat(&neg, &hm)) < 1e-15);
    }

    #[test]
    fn constant_fields() {
        let d = disc(1, setup(Method::P2, 1, 2));
        let area = d.surface_area().unwrap();
        let c = [0.3, -1.0, 2.0];
        let x = constant_field(d.velocity.n_dofs(), c);
        let a = assemble_forms(&d, &FormWeights::a_h()).unwrap();
        let v = a.bilinear(&x, &x);
        assert!((v - linalg::dot(c, c) * area).abs() < 1e-10 * v);
        let s = assemble_forms(&d, &FormWeights::s_h(1.0)).unwrap();
        assert!(s.bilinear(&x, &x).abs() < 1e-12);
        let k = assemble_forms(&d, &FormWeights::k_h(1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let y: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(k.bilinear(&y, &y) >= 0.0);
        }
    }

    #[test]
    fn forms_are_symmetric_and_linear() {
        let d = disc(1, setup(Method::P2, 2, 2));
        for w in [FormWeights::a_h(), FormWeights::a_th(), FormWeights::k_h(1.0), FormWeights::s_h(1.0)] {
            let m = assemble_forms(&d, &w).unwrap();
            assert!(m.symmetry_defect() <= 1e-10 * m.max_abs());
        }
        let k1 = assemble_forms(&d, &FormWeights::k_h(1.0)).unwrap();
        let k3 = assemble_forms(&d, &FormWeights::k_h(3.0)).unwrap();
        let scale = k3.max_abs();
        for (a, b) in k1.values.iter().zip(&k3.values) {
            assert!((3.0 * a - b).abs() <= 1e-13 * scale);
        }
        // the combined pass equals the sum of the separate forms
        let params = Resolved { eta: 4.0, rho: 2.0, rho_tilde: 0.0 };
        let all = assemble_forms(&d, &FormWeights::for_method(Method::P2, &params)).unwrap();
        let mut sum = assemble_forms(&d, &FormWeights::a_th()).unwrap();
        sum.add_scaled(4.0, &k1).unwrap();
        sum.add_scaled(1.0, &assemble_forms(&d, &FormWeights::s_h(2.0)).unwrap()).unwrap();
        let diff = all.values.iter().zip(&sum.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-11 * all.max_abs());
    }

    #[test]
    fn penalty_matrices_share_k_and_s_blocks() {
        let d1 = disc(1, setup(Method::P1, 1, 1));
        let mut d2s = setup(Method::P2, 1, 1);
        d2s.kp = d1.setup.kp;
        let d2 = disc(1, d2s);
        let params = FormParams { eta: Some(Scaling::new(1.0, 2.0)), rho: Scaling::new(1.0, 1.0), rho_tilde: None };
        let f = |x: Vec3| SphereProblem.f_ext(x);
        let s1 = build_system(&d1, &params, f).unwrap();
        let s2 = build_system(&d2, &params, f).unwrap();
        let mut diff1 = s1.matrix.clone();
        diff1.add_scaled(-1.0, &assemble_forms(&d1, &FormWeights::a_h()).unwrap()).unwrap();
        let mut diff2 = s2.matrix.clone();
        diff2.add_scaled(-1.0, &assemble_forms(&d2, &FormWeights::a_th()).unwrap()).unwrap();
        let m = diff1.values.iter().zip(&diff2.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(m < 1e-10 * diff1.max_abs());
        assert_eq!(s1.rhs, s2.rhs);
    }

    #[test]
    fn quadrature_saturation() {
        let d = disc(2, setup(Method::P2, 1, 2));
        let params = Resolved { eta: 16.0 * 16.0, rho: 16.0, rho_tilde: 0.0 };
        let w = FormWeights::for_method(Method::P2, &params);
        let a = assemble_forms(&d, &w).unwrap();
        let sd = d.setup.surface_degree();
        let vd = d.setup.volume_degree();
        let fine = d.clone().with_degrees(sd + 2, vd + 2);
        let b = assemble_forms(&fine, &w).unwrap();
        let scale = a.max_abs();
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8 * scale, "relative change {}", diff / scale);
        let r1 = assemble_rhs(&d, |x| SphereProblem.f_ext(x)).unwrap();
        let d4 = d.clone().with_degrees(sd + 2, vd);
        let r2 = assemble_rhs(&d4, |x| SphereProblem.f_ext(x)).unwrap();
        let dr: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a - b).collect();
        assert!(sparse::norm(&dr) < 1e-8 * sparse::norm(&r1));
    }

    #[test]
    fn zero_load_and_coupling_structure() {
        let mut s = setup(Method::Lagrange, 1, 2);
        s.kl = 1;
        let d = disc(1, s);
        let r = assemble_rhs(&d, |_| Ok([0.0; 3])).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let params = FormParams { eta: None, rho: Scaling::new(1.0, 1.0), rho_tilde: Some(Scaling::new(1.0, 1.0)) };
        let sys = build_system(&d, &params, |x| SphereProblem.f_ext(x)).unwrap();
        let nu = sys.n_u;
        let lower = sys.matrix.block(nu, nu + sys.n_lambda, nu, nu + sys.n_lambda);
        assert!(lower.values.iter().all(|&v| v == 0.0));
        assert!(sys.matrix.symmetry_defect() <= 1e-10 * sys.matrix.max_abs());
        // constant multiplier: b_h(u, 1) = ∫ u·n_h
        let cp = assemble_b(&d, 1.0).unwrap();
        let ones = vec![1.0; cp.b.nrows];
        let x = constant_field(d.velocity.n_dofs(), [0.0, 0.0, 1.0]);
        let pair = sparse::dot(&ones, &cp.b.mul(&x));
        let mut pts = Vec::new();
        let mut exact = 0.0;
        for e in 0..d.n_elements() {
            d.surface_points(e, &mut pts).unwrap();
            exact += pts.iter().map(|q| q.w * q.n_h[2]).sum::<f64>();
        }
        assert!((pair - exact).abs() < 1e-12);
    }

    #[test]
    fn missing_parameters_rejected() {
        let p = FormParams { eta: None, rho: Scaling::new(1.0, 1.0), rho_tilde: None };
        assert!(matches!(p.resolve(Method::P1, 0.1), Err(Error::Config(_))));
        assert!(matches!(p.resolve(Method::Lagrange, 0.1), Err(Error::Config(_))));
        let r = FormParams { eta: Some(Scaling::new(1.0, 2.0)), ..p }.resolve(Method::P2, 0.5).unwrap();
        assert_eq!(r.eta, 4.0);
        assert_eq!(r.rho, 2.0);
    }
}
