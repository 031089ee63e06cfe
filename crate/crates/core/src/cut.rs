//! Level-set interpolation, the piecewise planar interface `Γ^lin` and the
//! active mesh of tetrahedra it intersects.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::geometry::LevelSetOracle;
use crate::linalg::{self, Mat3, Vec3};
use crate::mesh::BackgroundMesh;

/// Vertex values of the level set on the whole background mesh. Because
/// `φ_h` interpolates `φ` at the Lagrange nodes, these are also the values of
/// the piecewise linear reduction `φ̂_h = I¹ φ_h`.
#[derive(Debug, Clone)]
pub struct VertexValues {
    /// `NaN` where the oracle is undefined.
    pub values: Vec<f64>,
}

impl VertexValues {
    pub fn sample<O: LevelSetOracle>(mesh: &BackgroundMesh, oracle: &O) -> Self {
        let values = (0..mesh.n_vertices()).map(|v| oracle.phi(mesh.vertex(v)).unwrap_or(f64::NAN)).collect();
        VertexValues { values }
    }
}

/// Identity of a point of `Γ^lin`: either a background vertex where the level
/// set vanishes exactly, or the crossing on a background edge (sorted ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CutPoint {
    Vertex(usize),
    Edge(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutTriangle {
    pub points: [Vec3; 3],
    pub ids: [CutPoint; 3],
}

impl CutTriangle {
    pub fn area(&self) -> f64 {
        0.5 * linalg::norm(linalg::cross(
            linalg::sub(self.points[1], self.points[0]),
            linalg::sub(self.points[2], self.points[0]),
        ))
    }
}

/// One tetrahedron of the active mesh `T_h^Γ`.
#[derive(Debug, Clone)]
pub struct CutElement {
    pub tet: usize,
    pub vertices: [usize; 4],
    pub coords: [Vec3; 4],
    /// Values of `φ̂_h` at the vertices.
    pub phi_lin: [f64; 4],
    /// Bit `i` set when vertex `i` is classified negative.
    pub signs: u8,
    /// Constant gradient of `φ̂_h` on the element.
    pub grad_lin: Vec3,
    pub n_lin: Vec3,
    /// Affine map Jacobian (columns `v_i − v_0`) and its inverse.
    pub jac: Mat3,
    pub jac_inv: Mat3,
    pub triangles: [CutTriangle; 2],
    pub n_triangles: u8,
}

impl CutElement {
    pub fn triangles(&self) -> &[CutTriangle] {
        &self.triangles[..self.n_triangles as usize]
    }

    /// Reference coordinates of a physical point of the undeformed element.
    pub fn to_reference(&self, x: Vec3) -> Vec3 {
        linalg::mat_vec(&self.jac_inv, linalg::sub(x, self.coords[0]))
    }

    pub fn from_reference(&self, xi: Vec3) -> Vec3 {
        linalg::add(self.coords[0], linalg::mat_vec(&self.jac, xi))
    }

    pub fn volume(&self) -> f64 {
        linalg::det(&self.jac) / 6.0
    }

    /// Value of `φ̂_h` at a reference point (affine extension outside).
    pub fn phi_lin_at(&self, xi: Vec3) -> f64 {
        let lam = [1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]];
        (0..4).map(|i| lam[i] * self.phi_lin[i]).sum()
    }
}

/// Active mesh and the planar interface triangles inside each active element.
#[derive(Debug, Clone)]
pub struct CutTopology {
    pub h: f64,
    /// Ordered by background tet id.
    pub elements: Vec<CutElement>,
    /// Triangles dropped because their area fell below `1e-14 h²`.
    pub degenerate_dropped: usize,
}

impl CutTopology {
    pub fn active_tets(&self) -> Vec<usize> {
        self.elements.iter().map(|e| e.tet).collect()
    }

    pub fn n_active(&self) -> usize {
        self.elements.len()
    }

    pub fn triangles(&self) -> impl Iterator<Item = &CutTriangle> {
        self.elements.iter().flat_map(|e| e.triangles().iter())
    }

    /// Edge incidence of the interface triangulation, keyed by sorted point ids.
    pub fn edge_incidence(&self) -> BTreeMap<(CutPoint, CutPoint), u32> {
        let mut edges = BTreeMap::new();
        for t in self.triangles() {
            for i in 0..3 {
                let a = t.ids[i];
                let b = t.ids[(i + 1) % 3];
                let key = if a < b { (a, b) } else { (b, a) };
                *edges.entry(key).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn is_watertight(&self) -> bool {
        self.edge_incidence().values().all(|&c| c == 2)
    }

    /// Checks that every active vertex lies in the tube of the oracle.
    pub fn check_tube<O: LevelSetOracle>(&self, oracle: &O) -> Result<()> {
        for e in &self.elements {
            for c in &e.coords {
                if !oracle.in_tube(*c) {
                    return Err(Error::Domain(format!("active element {} reaches outside the level-set tube at {c:?}", e.tet)));
                }
            }
        }
        Ok(())
    }
}

/// Total area of `Γ^lin`.
pub fn gamma_lin_area(cut: &CutTopology) -> f64 {
    cut.triangles().map(|t| t.area()).sum()
}

#[inline]
fn is_negative(v: f64) -> bool {
    // exact zeros count as positive
    v < 0.0
}

fn crossing(mesh: &BackgroundMesh, a: usize, b: usize, fa: f64, fb: f64) -> (Vec3, CutPoint) {
    if fa == 0.0 {
        return (mesh.vertex(a), CutPoint::Vertex(a));
    }
    if fb == 0.0 {
        return (mesh.vertex(b), CutPoint::Vertex(b));
    }
    // canonical orientation so both neighbours compute identical points
    let (lo, hi, flo, fhi) = if a < b { (a, b, fa, fb) } else { (b, a, fb, fa) };
    let t = flo / (flo - fhi);
    let xl = mesh.vertex(lo);
    let xh = mesh.vertex(hi);
    (linalg::add(xl, linalg::scale(t, linalg::sub(xh, xl))), CutPoint::Edge(lo, hi))
}

/// Marching-tetrahedra triangles of one element, oriented so that their
/// normal points towards positive level-set values. Returns `None` when the
/// element is not cut.
pub fn marching_tet(
    mesh: &BackgroundMesh,
    verts: [usize; 4],
    vals: [f64; 4],
    grad: Vec3,
) -> Option<([CutTriangle; 2], usize, u8)> {
    let mut signs = 0u8;
    for (i, &v) in vals.iter().enumerate() {
        if is_negative(v) {
            signs |= 1 << i;
        }
    }
    let n_neg = signs.count_ones();
    if n_neg == 0 || n_neg == 4 {
        return None;
    }
    let neg: Vec<usize> = (0..4).filter(|i| signs & (1 << i) != 0).collect();
    let pos: Vec<usize> = (0..4).filter(|i| signs & (1 << i) == 0).collect();
    let cross = |i: usize, j: usize| crossing(mesh, verts[i], verts[j], vals[i], vals[j]);
    let mut raw: [[(Vec3, CutPoint); 3]; 2] = [[([0.0; 3], CutPoint::Vertex(0)); 3]; 2];
    let count;
    if n_neg == 1 || n_neg == 3 {
        let (single, others) = if n_neg == 1 { (neg[0], &pos) } else { (pos[0], &neg) };
        raw[0] = [cross(single, others[0]), cross(single, others[1]), cross(single, others[2])];
        count = 1;
    } else {
        let (a, b) = (neg[0], neg[1]);
        let (c, d) = (pos[0], pos[1]);
        // quad in cyclic order ac, ad, bd, bc
        let q = [cross(a, c), cross(a, d), cross(b, d), cross(b, c)];
        let d02 = linalg::norm(linalg::sub(q[0].0, q[2].0));
        let d13 = linalg::norm(linalg::sub(q[1].0, q[3].0));
        if d02 <= d13 {
            raw[0] = [q[0], q[1], q[2]];
            raw[1] = [q[0], q[2], q[3]];
        } else {
            raw[0] = [q[0], q[1], q[3]];
            raw[1] = [q[1], q[2], q[3]];
        }
        count = 2;
    }
    let mut tris = [CutTriangle { points: [[0.0; 3]; 3], ids: [CutPoint::Vertex(0); 3] }; 2];
    for k in 0..count {
        let r = raw[k];
        let mut t = CutTriangle { points: [r[0].0, r[1].0, r[2].0], ids: [r[0].1, r[1].1, r[2].1] };
        let nrm = linalg::cross(linalg::sub(t.points[1], t.points[0]), linalg::sub(t.points[2], t.points[0]));
        if linalg::dot(nrm, grad) < 0.0 {
            t.points.swap(1, 2);
            t.ids.swap(1, 2);
        }
        tris[k] = t;
    }
    Some((tris, count, signs))
}

fn element_gradient(coords: &[Vec3; 4], vals: &[f64; 4]) -> Option<(Mat3, Mat3, Vec3)> {
    let jac = linalg::from_columns(
        linalg::sub(coords[1], coords[0]),
        linalg::sub(coords[2], coords[0]),
        linalg::sub(coords[3], coords[0]),
    );
    let jac_inv = linalg::inverse(&jac)?;
    let dref = [vals[1] - vals[0], vals[2] - vals[0], vals[3] - vals[0]];
    Some((jac, jac_inv, linalg::mat_t_vec(&jac_inv, dref)))
}

/// Builds `Γ^lin` and the active mesh by marching tetrahedra over the
/// background mesh. Exact zero vertex values are classified as positive;
/// the corresponding crossings collapse onto the vertex. Triangles with
/// area below `1e-14 h²` are dropped and counted, and elements left without
/// triangles are not active.
pub fn extract_cut(mesh: &BackgroundMesh, phi_lin: &VertexValues) -> Result<CutTopology> {
    let h = mesh.cube_edge;
    let min_area = 1e-14 * h * h;
    let mut elements = Vec::new();
    let mut dropped = 0usize;
    for cube in 0..mesh.n_cubes() {
        let corners = mesh.cube_corners(cube);
        let mut n_neg = 0;
        let mut any_nan = false;
        for &c in &corners {
            let v = phi_lin.values[c];
            if v.is_nan() {
                any_nan = true;
            } else if is_negative(v) {
                n_neg += 1;
            }
        }
        if !any_nan && (n_neg == 0 || n_neg == 8) {
            continue;
        }
        for local in 0..6 {
            let t = cube * 6 + local;
            let verts = mesh.tet(t);
            let vals = [
                phi_lin.values[verts[0]],
                phi_lin.values[verts[1]],
                phi_lin.values[verts[2]],
                phi_lin.values[verts[3]],
            ];
            if vals.iter().any(|v| v.is_nan()) {
                let finite: Vec<f64> = vals.iter().copied().filter(|v| !v.is_nan()).collect();
                if finite.iter().any(|&v| is_negative(v)) && finite.iter().any(|&v| !is_negative(v)) {
                    return Err(Error::Domain(format!("level set undefined at a vertex of cut element {t}")));
                }
                continue;
            }
            let coords = mesh.tet_coords(t);
            let Some((jac, jac_inv, grad)) = element_gradient(&coords, &vals) else {
                return Err(Error::Geometry(format!("degenerate background element {t}")));
            };
            let Some((tris, count, signs)) = marching_tet(mesh, verts, vals, grad) else {
                continue;
            };
            let mut kept = [tris[0]; 2];
            let mut n_kept = 0;
            for tri in &tris[..count] {
                if tri.area() < min_area {
                    dropped += 1;
                } else {
                    kept[n_kept] = *tri;
                    n_kept += 1;
                }
            }
            if n_kept == 0 {
                continue;
            }
            let Some(n_lin) = linalg::normalize(grad) else {
                return Err(Error::Geometry(format!("vanishing level-set gradient on cut element {t}")));
            };
            elements.push(CutElement {
                tet: t,
                vertices: verts,
                coords,
                phi_lin: vals,
                signs,
                grad_lin: grad,
                n_lin,
                jac,
                jac_inv,
                triangles: kept,
                n_triangles: n_kept as u8,
            });
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} degenerate interface triangles");
    }
    Ok(CutTopology { h, elements, degenerate_dropped: dropped })
}

/// Level-set approximation `φ_h ∈ V_h^{k_g}` restricted to the active mesh.
#[derive(Debug, Clone)]
pub struct DiscreteLevelSet {
    pub space: FeSpace,
    pub values: Vec<f64>,
}

impl DiscreteLevelSet {
    /// Coefficients of element `e` in local node order.
    pub fn element_values(&self, e: usize) -> Vec<f64> {
        self.space.element_dofs(e).iter().map(|&d| self.values[d as usize]).collect()
    }

    /// Value and reference gradient of the element polynomial at `xi`
    /// (extended beyond the element when `xi` lies outside).
    pub fn eval_local(&self, e: usize, xi: Vec3) -> (f64, Vec3) {
        let nl = self.space.n_local();
        let mut vals = [0.0; 35];
        let mut grads = [[0.0; 3]; 35];
        self.space.basis().eval_into(xi, &mut vals[..nl], &mut grads[..nl]);
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for (i, &d) in self.space.element_dofs(e).iter().enumerate() {
            let c = self.values[d as usize];
            v += c * vals[i];
            g = linalg::axpy(c, grads[i], g);
        }
        (v, g)
    }
}

/// Nodal interpolation of the exact level set at all Lagrange nodes of
/// degree `k_g` of the active elements.
pub fn interpolate_levelset<O: LevelSetOracle>(
    mesh: &BackgroundMesh,
    cut: &CutTopology,
    oracle: &O,
    kg: usize,
) -> Result<DiscreteLevelSet> {
    let space = FeSpace::new(mesh, &cut.active_tets(), kg)?;
    let mut values = Vec::with_capacity(space.n_dofs());
    for dof in 0..space.n_dofs() {
        let x = space.node_coord(dof);
        if !oracle.in_tube(x) {
            return Err(Error::Domain(format!("Lagrange node {x:?} of the cut band lies outside the level-set tube")));
        }
        values.push(oracle.phi(x)?);
    }
    Ok(DiscreteLevelSet { space, values })
}

/// Piecewise linear nodal interpolation `φ̂_h = I¹ φ_h`: vertex values are
/// kept, higher-order nodes dropped.
pub fn linearize(mesh: &BackgroundMesh, phi_h: &DiscreteLevelSet) -> Result<DiscreteLevelSet> {
    let tets: Vec<usize> = (0..phi_h.space.n_elements()).map(|e| phi_h.space.tet_id(e)).collect();
    let space = FeSpace::new(mesh, &tets, 1)?;
    let mut values = alloc::vec![0.0; space.n_dofs()];
    for e in 0..space.n_elements() {
        let src = phi_h.space.element_dofs(e);
        for (i, &d) in space.element_dofs(e).iter().enumerate() {
            // the first four local nodes of every degree are the vertices
            values[d as usize] = phi_h.values[src[i] as usize];
        }
    }
    Ok(DiscreteLevelSet { space, values })
}
