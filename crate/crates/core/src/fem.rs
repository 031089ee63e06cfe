//! Continuous Lagrange spaces on the active part of the background mesh.
//!
//! Shape functions are the equispaced Lagrange polynomials on the reference
//! tetrahedron written in barycentric form. Global degrees of freedom are
//! identified through the exact lattice position of each Lagrange node
//! (integer coordinates in units of `h / k`), so shared vertices, edges and
//! faces automatically share dofs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};
use crate::mesh::BackgroundMesh;

/// Highest polynomial degree supported by the basis.
pub const MAX_DEGREE: usize = 4;

/// Local nodes of the highest-degree element.
pub const MAX_LOCAL: usize = 35;

/// Stack-allocated basis values and reference gradients at one point.
#[derive(Debug, Clone, Copy)]
pub struct Tabulation {
    pub n: usize,
    pub vals: [f64; MAX_LOCAL],
    pub grads: [Vec3; MAX_LOCAL],
}

#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    degree: usize,
    /// Barycentric multi-indices, vertices first.
    multi: Vec<[u8; 4]>,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::Config(format!("Lagrange degree {degree} is not supported (1..={MAX_DEGREE})")));
        }
        let k = degree as u8;
        let mut multi: Vec<[u8; 4]> = (0..4)
            .map(|v| {
                let mut m = [0u8; 4];
                m[v] = k;
                m
            })
            .collect();
        for a in 0..=k {
            for b in 0..=(k - a) {
                for c in 0..=(k - a - b) {
                    let d = k - a - b - c;
                    let m = [d, a, b, c];
                    if m.iter().all(|&i| i != k) {
                        multi.push(m);
                    }
                }
            }
        }
        Ok(LagrangeBasis { degree, multi })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_local(&self) -> usize {
        self.multi.len()
    }

    pub fn multi_index(&self, i: usize) -> [u8; 4] {
        self.multi[i]
    }

    /// Reference coordinates of local node `i`.
    pub fn ref_node(&self, i: usize) -> Vec3 {
        let m = self.multi[i];
        let k = self.degree as f64;
        [m[1] as f64 / k, m[2] as f64 / k, m[3] as f64 / k]
    }

    /// Values and reference gradients at `x`, with no check that `x` lies in
    /// the reference element (polynomials extend naturally).
    pub fn eval_into(&self, x: Vec3, vals: &mut [f64], grads: &mut [Vec3]) {
        let k = self.degree;
        let kf = k as f64;
        let lam = [1.0 - x[0] - x[1] - x[2], x[0], x[1], x[2]];
        // l[j][m] = prod_{r<m} (k λ_j − r)/(r+1), dl its derivative in λ_j
        let mut l = [[0.0f64; MAX_DEGREE + 1]; 4];
        let mut dl = [[0.0f64; MAX_DEGREE + 1]; 4];
        for j in 0..4 {
            l[j][0] = 1.0;
            dl[j][0] = 0.0;
            for m in 1..=k {
                let mf = m as f64;
                let f = (kf * lam[j] - (mf - 1.0)) / mf;
                l[j][m] = l[j][m - 1] * f;
                dl[j][m] = dl[j][m - 1] * f + l[j][m - 1] * kf / mf;
            }
        }
        for (i, mi) in self.multi.iter().enumerate() {
            let f = [l[0][mi[0] as usize], l[1][mi[1] as usize], l[2][mi[2] as usize], l[3][mi[3] as usize]];
            let df = [dl[0][mi[0] as usize], dl[1][mi[1] as usize], dl[2][mi[2] as usize], dl[3][mi[3] as usize]];
            vals[i] = f[0] * f[1] * f[2] * f[3];
            let dlam = [
                df[0] * f[1] * f[2] * f[3],
                f[0] * df[1] * f[2] * f[3],
                f[0] * f[1] * df[2] * f[3],
                f[0] * f[1] * f[2] * df[3],
            ];
            grads[i] = [dlam[1] - dlam[0], dlam[2] - dlam[0], dlam[3] - dlam[0]];
        }
    }

    pub fn tabulate(&self, x: Vec3) -> Tabulation {
        let n = self.n_local();
        let mut t = Tabulation { n, vals: [0.0; MAX_LOCAL], grads: [[0.0; 3]; MAX_LOCAL] };
        self.eval_into(x, &mut t.vals[..n], &mut t.grads[..n]);
        t
    }

    /// Checked evaluation: `x` must lie in the reference tetrahedron up to a
    /// barycentric tolerance of `1e-10`.
    pub fn eval(&self, x: Vec3) -> Result<(Vec<f64>, Vec<Vec3>)> {
        let lam = [1.0 - x[0] - x[1] - x[2], x[0], x[1], x[2]];
        if lam.iter().any(|&l| !(-1e-10..=1.0 + 1e-10).contains(&l)) {
            return Err(Error::Lookup(format!("point {x:?} is outside the reference tetrahedron")));
        }
        let n = self.n_local();
        let mut vals = vec![0.0; n];
        let mut grads = vec![[0.0; 3]; n];
        self.eval_into(x, &mut vals, &mut grads);
        Ok((vals, grads))
    }
}

/// Free function form of basis evaluation for a given degree.
pub fn eval_basis(k: usize, x: Vec3) -> Result<(Vec<f64>, Vec<Vec3>)> {
    LagrangeBasis::new(k)?.eval(x)
}

/// Continuous scalar Lagrange space of degree `k` on a list of background
/// tetrahedra. Vector-valued functions use three independent copies,
/// interleaved as `3 · dof + component`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    basis: LagrangeBasis,
    /// Background tet id of each element.
    tets: Vec<usize>,
    dof_map: Vec<u32>,
    n_dofs: usize,
    /// Undeformed physical position of every dof.
    node_coords: Vec<Vec3>,
    /// First (element, local node) at which each dof appears.
    first_owner: Vec<(u32, u8)>,
}

impl FeSpace {
    pub fn new(mesh: &BackgroundMesh, tets: &[usize], degree: usize) -> Result<Self> {
        let basis = LagrangeBasis::new(degree)?;
        let nl = basis.n_local();
        let mut keys: BTreeMap<[i64; 3], u32> = BTreeMap::new();
        let mut dof_map = Vec::with_capacity(tets.len() * nl);
        let mut node_coords = Vec::new();
        let mut first_owner = Vec::new();
        for (e, &t) in tets.iter().enumerate() {
            let verts = mesh.tet(t);
            let lat: [[i64; 3]; 4] = [
                mesh.vertex_lattice(verts[0]),
                mesh.vertex_lattice(verts[1]),
                mesh.vertex_lattice(verts[2]),
                mesh.vertex_lattice(verts[3]),
            ];
            for i in 0..nl {
                let m = basis.multi_index(i);
                let mut key = [0i64; 3];
                for j in 0..4 {
                    for c in 0..3 {
                        key[c] += m[j] as i64 * lat[j][c];
                    }
                }
                let next = node_coords.len() as u32;
                let dof = *keys.entry(key).or_insert_with(|| {
                    node_coords.push(mesh.lattice_point(key, degree));
                    first_owner.push((e as u32, i as u8));
                    next
                });
                dof_map.push(dof);
            }
        }
        let n_dofs = node_coords.len();
        Ok(FeSpace { basis, tets: tets.to_vec(), dof_map, n_dofs, node_coords, first_owner })
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_elements(&self) -> usize {
        self.tets.len()
    }

    pub fn n_local(&self) -> usize {
        self.basis.n_local()
    }

    pub fn tet_id(&self, e: usize) -> usize {
        self.tets[e]
    }

    #[inline]
    pub fn element_dofs(&self, e: usize) -> &[u32] {
        let nl = self.n_local();
        &self.dof_map[e * nl..(e + 1) * nl]
    }

    pub fn node_coord(&self, dof: usize) -> Vec3 {
        self.node_coords[dof]
    }

    /// An (element, local node) pair carrying the dof.
    pub fn owner(&self, dof: usize) -> (usize, usize) {
        let (e, i) = self.first_owner[dof];
        (e as usize, i as usize)
    }

    /// Sparsity graph: for every dof the sorted list of dofs sharing an element.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); self.n_dofs];
        for e in 0..self.n_elements() {
            let d = self.element_dofs(e);
            for &i in d {
                adj[i as usize].extend_from_slice(d);
            }
        }
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }
}

/// Maps reference coordinates of an element to physical space. Implemented by
/// the parametric mesh deformation.
pub trait ElementMapping {
    /// Physical point and Jacobian `F = ∂x/∂ξ` of the map of element `e`.
    fn map(&self, e: usize, xi: Vec3) -> (Vec3, Mat3);
}

/// Affine element maps of the undeformed active mesh.
#[derive(Debug, Clone)]
pub struct AffineMapping {
    origin: Vec<Vec3>,
    jac: Vec<Mat3>,
}

impl AffineMapping {
    pub fn new(mesh: &BackgroundMesh, tets: &[usize]) -> Self {
        let mut origin = Vec::with_capacity(tets.len());
        let mut jac = Vec::with_capacity(tets.len());
        for &t in tets {
            let c = mesh.tet_coords(t);
            origin.push(c[0]);
            jac.push(linalg::from_columns(linalg::sub(c[1], c[0]), linalg::sub(c[2], c[0]), linalg::sub(c[3], c[0])));
        }
        AffineMapping { origin, jac }
    }
}

impl ElementMapping for AffineMapping {
    fn map(&self, e: usize, xi: Vec3) -> (Vec3, Mat3) {
        (linalg::add(self.origin[e], linalg::mat_vec(&self.jac[e], xi)), self.jac[e])
    }
}

/// Coefficient vector of a scalar (`components == 1`) or vector
/// (`components == 3`) function in an [`FeSpace`].
#[derive(Debug, Clone)]
pub struct FeFunction<'s> {
    pub space: &'s FeSpace,
    pub components: usize,
    pub coeffs: Vec<f64>,
}

/// Value and physical gradient (`grad[c][j] = ∂u_c/∂x_j`) of a function.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEval {
    pub value: Vec<f64>,
    pub grad: Vec<Vec3>,
}

impl<'s> FeFunction<'s> {
    pub fn zeros(space: &'s FeSpace, components: usize) -> Self {
        FeFunction { space, components, coeffs: vec![0.0; components * space.n_dofs()] }
    }

    pub fn from_coeffs(space: &'s FeSpace, components: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != components * space.n_dofs() {
            return Err(Error::Assembly(format!(
                "coefficient length {} does not match {} x {} dofs",
                coeffs.len(),
                components,
                space.n_dofs()
            )));
        }
        Ok(FeFunction { space, components, coeffs })
    }

    /// Evaluates on element `e` at reference point `xi` given the Jacobian
    /// inverse-transpose `finv_t` of the element map at that point.
    pub fn eval_reference(&self, e: usize, xi: Vec3, finv_t: &Mat3) -> PointEval {
        let nl = self.space.n_local();
        let mut vals = vec![0.0; nl];
        let mut grads = vec![[0.0; 3]; nl];
        self.space.basis().eval_into(xi, &mut vals, &mut grads);
        let dofs = self.space.element_dofs(e);
        let nc = self.components;
        let mut value = vec![0.0; nc];
        let mut grad = vec![[0.0; 3]; nc];
        for i in 0..nl {
            let g = linalg::mat_vec(finv_t, grads[i]);
            let base = dofs[i] as usize * nc;
            for c in 0..nc {
                let a = self.coeffs[base + c];
                value[c] += a * vals[i];
                for j in 0..3 {
                    grad[c][j] += a * g[j];
                }
            }
        }
        PointEval { value, grad }
    }

    /// Evaluates at a physical point of the mapped element `e`.
    pub fn eval_physical<M: ElementMapping>(&self, mapping: &M, e: usize, x: Vec3) -> Result<PointEval> {
        let xi = locate(mapping, e, x)?;
        let (_, f) = mapping.map(e, xi);
        let finv = linalg::inverse(&f).ok_or_else(|| Error::Geometry(format!("singular element map on element {e}")))?;
        Ok(self.eval_reference(e, xi, &linalg::transpose(&finv)))
    }
}

/// Inverts the element map with Newton's method; fails if the point is not
/// inside the mapped element.
pub fn locate<M: ElementMapping>(mapping: &M, e: usize, x: Vec3) -> Result<Vec3> {
    let mut xi = [0.25; 3];
    for _ in 0..50 {
        let (y, f) = mapping.map(e, xi);
        let r = linalg::sub(x, y);
        let finv = linalg::inverse(&f).ok_or_else(|| Error::Geometry(format!("singular element map on element {e}")))?;
        let dxi = linalg::mat_vec(&finv, r);
        xi = linalg::add(xi, dxi);
        if linalg::norm(dxi) < 1e-14 {
            break;
        }
    }
    let (y, _) = mapping.map(e, xi);
    let scale = linalg::norm(x).max(1.0);
    let lam = [1.0 - xi[0] - xi[1] - xi[2], xi[0], xi[1], xi[2]];
    if linalg::norm(linalg::sub(y, x)) > 1e-10 * scale || lam.iter().any(|&l| l < -1e-10) {
        return Err(Error::Lookup(format!("point {x:?} is not inside mapped element {e}")));
    }
    Ok(xi)
}

/// Parametric interpolation `I_Θ^k`: the coefficient at node `ξ` is the field
/// evaluated at the mapped node `Θ_h(ξ)`.
pub fn interpolate_parametric<'s, M, F>(space: &'s FeSpace, mapping: &M, components: usize, mut field: F) -> Result<FeFunction<'s>>
where
    M: ElementMapping,
    F: FnMut(Vec3) -> Result<Vec<f64>>,
{
    let mut coeffs = vec![0.0; components * space.n_dofs()];
    for dof in 0..space.n_dofs() {
        let (e, i) = space.owner(dof);
        let (x, _) = mapping.map(e, space.basis().ref_node(i));
        let v = field(x)?;
        if v.len() != components {
            return Err(Error::Config(format!("field returned {} components, expected {components}", v.len())));
        }
        coeffs[dof * components..(dof + 1) * components].copy_from_slice(&v);
    }
    FeFunction::from_coeffs(space, components, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundingBox;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ref_point(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let p = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            if p[0] + p[1] + p[2] <= 1.0 {
                return p;
            }
        }
    }

    #[test]
    fn local_counts() {
        for (k, n) in [(1, 4), (2, 10), (3, 20), (4, 35)] {
            assert_eq!(LagrangeBasis::new(k).unwrap().n_local(), n);
        }
        assert!(matches!(LagrangeBasis::new(0), Err(Error::Config(_))));
        assert!(matches!(LagrangeBasis::new(5), Err(Error::Config(_))));
    }

    #[test]
    fn p1_at_barycenter() {
        let (v, _) = eval_basis(1, [0.25; 3]).unwrap();
        assert!(v.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=MAX_DEGREE {
            let b = LagrangeBasis::new(k).unwrap();
            for _ in 0..100 {
                let (v, g) = b.eval(random_ref_point(&mut rng)).unwrap();
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let gs = g.iter().fold([0.0; 3], |a, &x| linalg::add(a, x));
                assert!(linalg::norm(gs) < 1e-11);
            }
        }
    }

    #[test]
    fn nodal_property() {
        for k in 1..=MAX_DEGREE {
            let b = LagrangeBasis::new(k).unwrap();
            for i in 0..b.n_local() {
                let (v, _) = b.eval(b.ref_node(i)).unwrap();
                for (j, &x) in v.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((x - e).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn reference_gradients_match_differences() {
        let b = LagrangeBasis::new(3).unwrap();
        let x = [0.2, 0.3, 0.1];
        let (_, g) = b.eval(x).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (vp, _) = b.eval(xp).unwrap();
            let (vm, _) = b.eval(xm).unwrap();
            for i in 0..b.n_local() {
                assert!(((vp[i] - vm[i]) / (2.0 * h) - g[i][j]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn outside_point_rejected() {
        assert!(matches!(eval_basis(2, [0.6, 0.6, 0.0]), Err(Error::Lookup(_))));
    }

    fn small_space(k: usize) -> (BackgroundMesh, FeSpace) {
        let mesh = BackgroundMesh::new(BoundingBox::new([0.0; 3], [1.0; 3]), 1).unwrap();
        let tets: Vec<usize> = (0..mesh.n_tets()).collect();
        let space = FeSpace::new(&mesh, &tets, k).unwrap();
        (mesh, space)
    }

    #[test]
    fn dof_counts_on_full_cube_grid() {
        // 4x4x4 cubes: P_k nodes form a (4k+1)^3 lattice
        for k in 1..=3 {
            let (_, s) = small_space(k);
            assert_eq!(s.n_dofs(), (4 * k + 1).pow(3));
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials_and_continuity() {
        let (mesh, space) = small_space(2);
        let tets: Vec<usize> = (0..mesh.n_tets()).collect();
        let map = AffineMapping::new(&mesh, &tets);
        let poly = |x: Vec3| x[0] * x[0] - 2.0 * x[1] * x[2] + x[2] + 0.5;
        let f = interpolate_parametric(&space, &map, 1, |x| Ok(vec![poly(x)])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for e in 0..space.n_elements() {
            let xi = random_ref_point(&mut rng);
            let (x, jac) = map.map(e, xi);
            let ft = linalg::transpose(&linalg::inverse(&jac).unwrap());
            let ev = f.eval_reference(e, xi, &ft);
            assert!((ev.value[0] - poly(x)).abs() < 1e-12);
            let exact = [2.0 * x[0], -2.0 * x[2], -2.0 * x[1] + 1.0];
            assert!(linalg::norm(linalg::sub(ev.grad[0], exact)) < 1e-11);
        }
        // a shared face point evaluated from both sides
        let faces = crate::mesh::face_incidence(tets.iter().map(|&t| mesh.tet(t)));
        let mut checked = 0;
        let g = interpolate_parametric(&space, &map, 1, |x| Ok(vec![(3.0 * x[0]).sin() * x[1]])).unwrap();
        for (face, &count) in faces.iter().filter(|(_, &c)| c == 2).take(20) {
            assert_eq!(count, 2);
            let pts: Vec<Vec3> = face.iter().map(|&v| mesh.vertex(v)).collect();
            let x = linalg::add(linalg::scale(0.2, pts[0]), linalg::add(linalg::scale(0.3, pts[1]), linalg::scale(0.5, pts[2])));
            let owners: Vec<usize> =
                (0..tets.len()).filter(|&e| { let v = mesh.tet(tets[e]); face.iter().all(|f| v.contains(f)) }).collect();
            let a = g.eval_physical(&map, owners[0], x).unwrap().value[0];
            let b = g.eval_physical(&map, owners[1], x).unwrap().value[0];
            assert!((a - b).abs() < 1e-12);
            checked += 1;
        }
        assert_eq!(checked, 20);
    }

    #[test]
    fn vector_coefficients_triple_the_scalar_count() {
        let (_, space) = small_space(1);
        let u = FeFunction::zeros(&space, 3);
        assert_eq!(u.coeffs.len(), 3 * space.n_dofs());
        assert!(FeFunction::from_coeffs(&space, 3, vec![0.0; 5]).is_err());
    }
}
