//! Parametric mesh deformation `Θ_h` and the discrete geometric fields on the
//! deformed interface `Γ_h = Θ_h(Γ^lin)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cut::{CutTopology, DiscreteLevelSet};
use crate::error::{Error, Result};
use crate::fem::{ElementMapping, FeSpace, Tabulation};
use crate::geometry::LevelSetOracle;
use crate::linalg::{self, Mat3, Vec3};
use crate::mesh::BackgroundMesh;
use crate::quadrature::{TetRule, TriangleRule};

/// Source of the level-set values the deformation is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometrySource {
    /// Element-local polynomial `φ_h`.
    Discrete,
    /// Exact level set `φ`.
    Exact,
}

/// Smallest root `t ∈ [-2h, 2h]` of `source(x + t G) = target`, by Newton's
/// method safeguarded with bisection. `source` returns the value and the
/// gradient at a point.
pub fn find_dtilde<F>(x: Vec3, g: Vec3, mut source: F, target: f64, h: f64) -> Result<f64>
where
    F: FnMut(Vec3) -> Result<(f64, Vec3)>,
{
    let mut eval = |t: f64| -> Result<(f64, f64)> {
        let (v, grad) = source(linalg::axpy(t, g, x))?;
        Ok((v - target, linalg::dot(grad, g)))
    };
    let (r0, d0) = eval(0.0)?;
    if r0.abs() <= 1e-14 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-2.0 * h, 2.0 * h);
    let (rlo, _) = eval(lo)?;
    let (rhi, _) = eval(hi)?;
    if rlo * rhi > 0.0 {
        return Err(Error::RootFind(format!(
            "no sign change of the level-set residual at {x:?} along {g:?}: r({lo}) = {rlo}, r({hi}) = {rhi}"
        )));
    }
    // keep r(lo) <= 0 <= r(hi)
    if rlo > 0.0 {
        core::mem::swap(&mut lo, &mut hi);
    }
    let (mut t, mut r, mut dr) = (0.0, r0, d0);
    for _ in 0..50 {
        if r.abs() <= 1e-14 {
            return Ok(t);
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let newton = if dr != 0.0 { t - r / dr } else { f64::NAN };
        t = if newton > a && newton < b { newton } else { 0.5 * (lo + hi) };
        (r, dr) = eval(t)?;
        if (b - a) < 1e-15 * h {
            break;
        }
    }
    if r.abs() <= 1e-12 {
        Ok(t)
    } else {
        Err(Error::RootFind(format!("root search at {x:?} stalled with residual {r}")))
    }
}

/// Geometry of the deformed element map at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct PointGeometry {
    pub x: Vec3,
    /// Jacobian `F` of the composite map from the reference element.
    pub f: Mat3,
    /// `F^{-T}`: maps reference gradients to physical ones.
    pub finv_t: Mat3,
    /// `DΘ_h = F J_T^{-1}`.
    pub dtheta: Mat3,
    pub det_dtheta: f64,
    /// `DΘ_h^{-T}`.
    pub dtheta_inv_t: Mat3,
}

#[derive(Debug, Clone, Copy)]
pub struct SurfQuadPoint {
    pub element: usize,
    pub xi: Vec3,
    pub x_lin: Vec3,
    pub x: Vec3,
    pub w: f64,
    pub n_lin: Vec3,
    pub n_h: Vec3,
    pub finv_t: Mat3,
}

#[derive(Debug, Clone, Copy)]
pub struct VolQuadPoint {
    pub element: usize,
    pub xi: Vec3,
    pub x: Vec3,
    pub w: f64,
    pub n_h: Vec3,
    pub finv_t: Mat3,
}

/// `Θ_h = id + Σ d_i N_i` on the active mesh, with `d` a continuous vector
/// field of degree `k_g`.
#[derive(Debug, Clone)]
pub struct MeshDeformation {
    pub space: FeSpace,
    pub kg: usize,
    pub source: Option<GeometrySource>,
    /// Interleaved displacement coefficients.
    pub disp: Vec<f64>,
    origin: Vec<Vec3>,
    jac: Vec<Mat3>,
    jac_inv: Vec<Mat3>,
    n_lin: Vec<Vec3>,
}

impl MeshDeformation {
    /// The identity deformation on the active mesh.
    pub fn identity(mesh: &BackgroundMesh, cut: &CutTopology) -> Result<Self> {
        let space = FeSpace::new(mesh, &cut.active_tets(), 1)?;
        Ok(Self::with_space(space, cut, None))
    }

    fn with_space(space: FeSpace, cut: &CutTopology, source: Option<GeometrySource>) -> Self {
        let n = space.n_dofs();
        MeshDeformation {
            kg: space.degree(),
            space,
            source,
            disp: vec![0.0; 3 * n],
            origin: cut.elements.iter().map(|e| e.coords[0]).collect(),
            jac: cut.elements.iter().map(|e| e.jac).collect(),
            jac_inv: cut.elements.iter().map(|e| e.jac_inv).collect(),
            n_lin: cut.elements.iter().map(|e| e.n_lin).collect(),
        }
    }

    pub fn n_elements(&self) -> usize {
        self.origin.len()
    }

    pub fn is_identity(&self) -> bool {
        self.source.is_none()
    }

    pub fn n_lin(&self, e: usize) -> Vec3 {
        self.n_lin[e]
    }

    pub fn affine_jacobian(&self, e: usize) -> &Mat3 {
        &self.jac[e]
    }

    /// Largest nodal displacement.
    pub fn max_displacement(&self) -> f64 {
        self.disp.chunks(3).map(|d| linalg::norm([d[0], d[1], d[2]])).fold(0.0, f64::max)
    }

    /// Point and composite Jacobian given a tabulation of the `k_g` basis.
    fn map_tab(&self, e: usize, xi: Vec3, tab: &Tabulation) -> (Vec3, Mat3) {
        let mut x = linalg::add(self.origin[e], linalg::mat_vec(&self.jac[e], xi));
        let mut f = self.jac[e];
        if self.is_identity() {
            return (x, f);
        }
        for (i, &dof) in self.space.element_dofs(e).iter().enumerate() {
            let d = &self.disp[3 * dof as usize..3 * dof as usize + 3];
            for c in 0..3 {
                x[c] += d[c] * tab.vals[i];
                for j in 0..3 {
                    f[c][j] += d[c] * tab.grads[i][j];
                }
            }
        }
        (x, f)
    }

    /// Full local geometry at a reference point of element `e`.
    pub fn geometry(&self, e: usize, xi: Vec3) -> Result<PointGeometry> {
        let (x, f) = if self.is_identity() {
            (linalg::add(self.origin[e], linalg::mat_vec(&self.jac[e], xi)), self.jac[e])
        } else {
            let tab = self.space.basis().tabulate(xi);
            self.map_tab(e, xi, &tab)
        };
        let finv = linalg::inverse(&f).ok_or_else(|| Error::Geometry(format!("singular deformed map on element {e}")))?;
        let dtheta = linalg::mat_mul(&f, &self.jac_inv[e]);
        let det_dtheta = linalg::det(&dtheta);
        if !(det_dtheta > 0.0) {
            return Err(Error::Geometry(format!("nonpositive Jacobian {det_dtheta} of the mesh deformation on element {e}")));
        }
        let dtheta_inv_t = linalg::mat_mul(&linalg::transpose(&finv), &linalg::transpose(&self.jac[e]));
        Ok(PointGeometry { x, f, finv_t: linalg::transpose(&finv), dtheta, det_dtheta, dtheta_inv_t })
    }

    /// Mapped quadrature on the interface triangles of element `e`, appended to `out`.
    pub fn surface_points(&self, cut: &CutTopology, e: usize, rule: &TriangleRule, out: &mut Vec<SurfQuadPoint>) -> Result<()> {
        let ce = &cut.elements[e];
        let n_lin = self.n_lin[e];
        for tri in ce.triangles() {
            let [a, b, c] = tri.points;
            let ab = linalg::sub(b, a);
            let ac = linalg::sub(c, a);
            let area2 = linalg::norm(linalg::cross(ab, ac));
            for (p, &w) in rule.points.iter().zip(&rule.weights) {
                let x_lin = linalg::add(a, linalg::add(linalg::scale(p[0], ab), linalg::scale(p[1], ac)));
                let xi = ce.to_reference(x_lin);
                let g = self.geometry(e, xi)?;
                let m = linalg::mat_vec(&g.dtheta_inv_t, n_lin);
                let mn = linalg::norm(m);
                out.push(SurfQuadPoint {
                    element: e,
                    xi,
                    x_lin,
                    x: g.x,
                    w: w * area2 * g.det_dtheta * mn,
                    n_lin,
                    n_h: linalg::scale(1.0 / mn, m),
                    finv_t: g.finv_t,
                });
            }
        }
        Ok(())
    }

    /// Mapped quadrature on the deformed element `e`, appended to `out`.
    pub fn volume_points(&self, e: usize, rule: &TetRule, out: &mut Vec<VolQuadPoint>) -> Result<()> {
        let det_j = linalg::det(&self.jac[e]);
        let n_lin = self.n_lin[e];
        for (xi, &w) in rule.points.iter().zip(&rule.weights) {
            let g = self.geometry(e, *xi)?;
            let m = linalg::mat_vec(&g.dtheta_inv_t, n_lin);
            out.push(VolQuadPoint {
                element: e,
                xi: *xi,
                x: g.x,
                w: w * det_j * g.det_dtheta,
                n_h: linalg::scale(1.0 / linalg::norm(m), m),
                finv_t: g.finv_t,
            });
        }
        Ok(())
    }

    pub fn surface_quadrature(&self, cut: &CutTopology, degree: usize) -> Result<Vec<SurfQuadPoint>> {
        let rule = TriangleRule::new(degree);
        let mut out = Vec::new();
        for e in 0..self.n_elements() {
            self.surface_points(cut, e, &rule, &mut out)?;
        }
        Ok(out)
    }

    pub fn volume_quadrature(&self, degree: usize) -> Result<Vec<VolQuadPoint>> {
        let rule = TetRule::new(degree);
        let mut out = Vec::new();
        for e in 0..self.n_elements() {
            self.volume_points(e, &rule, &mut out)?;
        }
        Ok(out)
    }

    /// Area of `Γ_h`.
    pub fn surface_area(&self, cut: &CutTopology, degree: usize) -> Result<f64> {
        Ok(self.surface_quadrature(cut, degree)?.iter().map(|q| q.w).sum())
    }
}

impl ElementMapping for MeshDeformation {
    fn map(&self, e: usize, xi: Vec3) -> (Vec3, Mat3) {
        if self.is_identity() {
            return (linalg::add(self.origin[e], linalg::mat_vec(&self.jac[e], xi)), self.jac[e]);
        }
        let tab = self.space.basis().tabulate(xi);
        self.map_tab(e, xi, &tab)
    }
}

/// Builds `Θ_h`. For `k_g = 1` this is the identity; otherwise every Lagrange
/// node `ξ` of every active element is moved to `ξ + d̃ G_T` with
/// `G_T = ∇φ̂_h|_T / ‖·‖` and `d̃` the root of `source(ξ + d̃ G_T) = φ̂_h(ξ)`.
/// Element-wise values are averaged at shared nodes.
pub fn build_theta<O: LevelSetOracle>(
    mesh: &BackgroundMesh,
    cut: &CutTopology,
    phi_h: &DiscreteLevelSet,
    oracle: &O,
    source: GeometrySource,
) -> Result<MeshDeformation> {
    let kg = phi_h.space.degree();
    if kg == 1 {
        return MeshDeformation::identity(mesh, cut);
    }
    let space = phi_h.space.clone();
    let mut def = MeshDeformation::with_space(space, cut, Some(source));
    let n = def.space.n_dofs();
    let mut sum = vec![0.0; 3 * n];
    let mut count = vec![0u32; n];
    let h = cut.h;
    for (e, ce) in cut.elements.iter().enumerate() {
        let g = ce.n_lin;
        let dofs = def.space.element_dofs(e);
        for (i, &dof) in dofs.iter().enumerate() {
            let xi = def.space.basis().ref_node(i);
            let x = ce.from_reference(xi);
            let target = ce.phi_lin_at(xi);
            let t = match source {
                GeometrySource::Exact => find_dtilde(x, g, |y| Ok((oracle.phi(y)?, oracle.grad_phi(y)?)), target, h),
                GeometrySource::Discrete => find_dtilde(
                    x,
                    g,
                    |y| {
                        let (v, gr) = phi_h.eval_local(e, ce.to_reference(y));
                        Ok((v, linalg::mat_t_vec(&ce.jac_inv, gr)))
                    },
                    target,
                    h,
                ),
            }
            .map_err(|err| Error::RootFind(format!("element {}: {err}", ce.tet)))?;
            let d = dof as usize;
            for c in 0..3 {
                sum[3 * d + c] += t * g[c];
            }
            count[d] += 1;
        }
    }
    for d in 0..n {
        for c in 0..3 {
            def.disp[3 * d + c] = sum[3 * d + c] / count[d] as f64;
        }
    }
    Ok(def)
}

/// `ñ_h = ∇φ̃_h / ‖∇φ̃_h‖` with `φ̃_h` the parametric interpolant of degree
/// `k_p` of the exact level set.
#[derive(Debug, Clone)]
pub struct PenaltyNormal {
    pub space: FeSpace,
    pub values: Vec<f64>,
}

impl PenaltyNormal {
    pub fn eval(&self, e: usize, xi: Vec3, finv_t: &Mat3) -> Result<Vec3> {
        let tab = self.space.basis().tabulate(xi);
        let mut g = [0.0; 3];
        for (i, &d) in self.space.element_dofs(e).iter().enumerate() {
            g = linalg::axpy(self.values[d as usize], tab.grads[i], g);
        }
        let g = linalg::mat_vec(finv_t, g);
        linalg::normalize(g).ok_or_else(|| Error::Geometry(format!("vanishing gradient of the penalty level set on element {e}")))
    }
}

pub fn penalty_normal<O: LevelSetOracle>(
    mesh: &BackgroundMesh,
    deformation: &MeshDeformation,
    oracle: &O,
    kp: usize,
) -> Result<PenaltyNormal> {
    if kp < deformation.kg {
        return Err(Error::Config(format!("penalty normal degree {kp} is below the geometry degree {}", deformation.kg)));
    }
    let tets: Vec<usize> = (0..deformation.space.n_elements()).map(|e| deformation.space.tet_id(e)).collect();
    let space = FeSpace::new(mesh, &tets, kp)?;
    let f = crate::fem::interpolate_parametric(&space, deformation, 1, |x| Ok(vec![oracle.phi(x)?]))?;
    let values = f.coeffs;
    Ok(PenaltyNormal { space, values })
}

/// `H_h = ∇ I_Θ^{k_g}(n_h)`: the gradient of the parametric interpolant of
/// the discrete normal, with nodal normals averaged over adjacent elements.
#[derive(Debug, Clone)]
pub struct WeingartenField {
    pub space: FeSpace,
    /// Interleaved nodal normals.
    pub normals: Vec<f64>,
}

impl WeingartenField {
    /// `H[c][j] = ∂(n_h)_c / ∂x_j`.
    pub fn eval(&self, e: usize, xi: Vec3, finv_t: &Mat3) -> Mat3 {
        let tab = self.space.basis().tabulate(xi);
        let mut hm = linalg::ZERO3;
        for (i, &d) in self.space.element_dofs(e).iter().enumerate() {
            let g = linalg::mat_vec(finv_t, tab.grads[i]);
            let nv = &self.normals[3 * d as usize..3 * d as usize + 3];
            for c in 0..3 {
                for j in 0..3 {
                    hm[c][j] += nv[c] * g[j];
                }
            }
        }
        hm
    }
}

pub fn weingarten_h(deformation: &MeshDeformation) -> Result<WeingartenField> {
    let space = deformation.space.clone();
    let n = space.n_dofs();
    let mut sum = vec![0.0; 3 * n];
    let mut count = vec![0u32; n];
    for e in 0..space.n_elements() {
        for (i, &d) in space.element_dofs(e).iter().enumerate() {
            let g = deformation.geometry(e, space.basis().ref_node(i))?;
            let m = linalg::mat_vec(&g.dtheta_inv_t, deformation.n_lin(e));
            let nh = linalg::scale(1.0 / linalg::norm(m), m);
            for c in 0..3 {
                sum[3 * d as usize + c] += nh[c];
            }
            count[d as usize] += 1;
        }
    }
    for d in 0..n {
        for c in 0..3 {
            sum[3 * d + c] /= count[d] as f64;
        }
    }
    Ok(WeingartenField { space, normals: sum })
}
