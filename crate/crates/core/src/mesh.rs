//! Structured background tetrahedral mesh of an axis-aligned box.
//!
//! The box is covered by a uniform cube grid with edge `0.5 · 2^{-level}` and
//! each cube is split into six Kuhn (Freudenthal) tetrahedra sharing the main
//! diagonal. The mesh is implicit: vertex coordinates and tetrahedra are
//! computed from integer indices on demand, so only the cut band of a fine
//! level is ever touched.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Vec3};
#[allow(unused_imports)]
use num_traits::Float;

/// Finest refinement level accepted by [`BackgroundMesh::new`].
pub const MAX_LEVEL: u32 = 7;

/// Cube edge at level 0.
pub const BASE_EDGE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoundingBox {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        BoundingBox { min, max }
    }

    /// `[-a, a]^3`
    pub fn cube(a: f64) -> Self {
        BoundingBox { min: [-a; 3], max: [a; 3] }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| self.max[i] - self.min[i]).product()
    }
}

/// The six Kuhn simplices of the unit cube, as corner-bit paths from corner 0
/// to corner 7 (bit `i` set means +1 along axis `i`).
const KUHN_PATHS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

#[derive(Debug, Clone)]
pub struct BackgroundMesh {
    pub bbox: BoundingBox,
    pub level: u32,
    /// Nominal mesh size `h` (cube edge).
    pub cube_edge: f64,
    /// Cubes per axis.
    pub cells: [usize; 3],
    /// Local vertex order per Kuhn simplex, fixed so every tet is positively oriented.
    kuhn: [[usize; 4]; 6],
}

impl BackgroundMesh {
    pub fn new(bbox: BoundingBox, level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Resource(format!("refinement level {level} exceeds the limit {MAX_LEVEL}")));
        }
        let edge = BASE_EDGE * 0.5f64.powi(level as i32);
        let mut cells = [0usize; 3];
        for i in 0..3 {
            let extent = bbox.max[i] - bbox.min[i];
            if !(extent > 0.0) {
                return Err(Error::Config(format!("empty bounding box along axis {i}")));
            }
            let n = (extent / edge).round();
            if n < 1.0 || ((n * edge - extent).abs() > 1e-9 * extent) {
                return Err(Error::Config(format!(
                    "box extent {extent} along axis {i} is not a multiple of the cube edge {edge}"
                )));
            }
            cells[i] = n as usize;
        }
        let mut kuhn = KUHN_PATHS;
        for path in kuhn.iter_mut() {
            let c: Vec<Vec3> = path.iter().map(|&b| corner_offset(b)).collect();
            let vol = linalg::det(&linalg::from_columns(
                linalg::sub(c[1], c[0]),
                linalg::sub(c[2], c[0]),
                linalg::sub(c[3], c[0]),
            ));
            if vol < 0.0 {
                path.swap(2, 3);
            }
        }
        Ok(BackgroundMesh { bbox, level, cube_edge: edge, cells, kuhn })
    }

    pub fn n_cubes(&self) -> usize {
        self.cells[0] * self.cells[1] * self.cells[2]
    }

    pub fn n_tets(&self) -> usize {
        6 * self.n_cubes()
    }

    pub fn n_vertices(&self) -> usize {
        (self.cells[0] + 1) * (self.cells[1] + 1) * (self.cells[2] + 1)
    }

    /// Integer grid coordinates of a vertex.
    #[inline]
    pub fn vertex_lattice(&self, v: usize) -> [i64; 3] {
        let nx = self.cells[0] + 1;
        let ny = self.cells[1] + 1;
        [(v % nx) as i64, ((v / nx) % ny) as i64, (v / (nx * ny)) as i64]
    }

    #[inline]
    pub fn vertex_id(&self, lattice: [usize; 3]) -> usize {
        let nx = self.cells[0] + 1;
        let ny = self.cells[1] + 1;
        lattice[0] + nx * (lattice[1] + ny * lattice[2])
    }

    #[inline]
    pub fn vertex(&self, v: usize) -> Vec3 {
        self.lattice_point(self.vertex_lattice(v), 1)
    }

    /// Physical point of a lattice coordinate measured in units of `h / denom`.
    #[inline]
    pub fn lattice_point(&self, l: [i64; 3], denom: usize) -> Vec3 {
        let s = self.cube_edge / denom as f64;
        [
            self.bbox.min[0] + l[0] as f64 * s,
            self.bbox.min[1] + l[1] as f64 * s,
            self.bbox.min[2] + l[2] as f64 * s,
        ]
    }

    /// Vertex ids of tetrahedron `t` (positively oriented).
    #[inline]
    pub fn tet(&self, t: usize) -> [usize; 4] {
        let cube = t / 6;
        let nx = self.cells[0];
        let ny = self.cells[1];
        let base = [cube % nx, (cube / nx) % ny, cube / (nx * ny)];
        let path = &self.kuhn[t % 6];
        let mut out = [0usize; 4];
        for (o, &bits) in out.iter_mut().zip(path) {
            out_vertex(o, self, base, bits);
        }
        out
    }

    pub fn tet_coords(&self, t: usize) -> [Vec3; 4] {
        let v = self.tet(t);
        [self.vertex(v[0]), self.vertex(v[1]), self.vertex(v[2]), self.vertex(v[3])]
    }

    /// The eight corner vertex ids of a cube, indexed by corner bits.
    pub fn cube_corners(&self, cube: usize) -> [usize; 8] {
        let nx = self.cells[0];
        let ny = self.cells[1];
        let base = [cube % nx, (cube / nx) % ny, cube / (nx * ny)];
        let mut out = [0usize; 8];
        for (bits, o) in out.iter_mut().enumerate() {
            out_vertex(o, self, base, bits);
        }
        out
    }

    /// Materialized vertex coordinates. Only sensible for coarse levels.
    pub fn vertices(&self) -> Vec<Vec3> {
        (0..self.n_vertices()).map(|v| self.vertex(v)).collect()
    }

    /// Materialized connectivity. Only sensible for coarse levels.
    pub fn tets(&self) -> Vec<[usize; 4]> {
        (0..self.n_tets()).map(|t| self.tet(t)).collect()
    }

    /// Face-to-tet incidence counts of the whole mesh.
    pub fn face_adjacency(&self) -> BTreeMap<[usize; 3], u32> {
        face_incidence((0..self.n_tets()).map(|t| self.tet(t)))
    }
}

#[inline]
fn corner_offset(bits: usize) -> Vec3 {
    [(bits & 1) as f64, ((bits >> 1) & 1) as f64, ((bits >> 2) & 1) as f64]
}

#[inline]
fn out_vertex(o: &mut usize, mesh: &BackgroundMesh, base: [usize; 3], bits: usize) {
    *o = mesh.vertex_id([base[0] + (bits & 1), base[1] + ((bits >> 1) & 1), base[2] + ((bits >> 2) & 1)]);
}

/// Signed volume of a tetrahedron.
pub fn signed_volume(c: &[Vec3; 4]) -> f64 {
    linalg::det(&linalg::from_columns(linalg::sub(c[1], c[0]), linalg::sub(c[2], c[0]), linalg::sub(c[3], c[0]))) / 6.0
}

/// Counts how many tetrahedra share each face, keyed by sorted vertex triple.
pub fn face_incidence<I>(tets: I) -> BTreeMap<[usize; 3], u32>
where
    I: IntoIterator<Item = [usize; 4]>,
{
    let mut faces = BTreeMap::new();
    for t in tets {
        for skip in 0..4 {
            let mut f = [0usize; 3];
            let mut k = 0;
            for (i, &v) in t.iter().enumerate() {
                if i != skip {
                    f[k] = v;
                    k += 1;
                }
            }
            f.sort_unstable();
            *faces.entry(f).or_insert(0) += 1;
        }
    }
    faces
}

/// Longest edge over inscribed-sphere radius.
pub fn aspect_ratio(c: &[Vec3; 4]) -> f64 {
    let mut diam: f64 = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            diam = diam.max(linalg::norm(linalg::sub(c[i], c[j])));
        }
    }
    let vol = signed_volume(c).abs();
    let mut area = 0.0;
    for skip in 0..4 {
        let f: Vec<Vec3> = (0..4).filter(|&i| i != skip).map(|i| c[i]).collect();
        area += 0.5 * linalg::norm(linalg::cross(linalg::sub(f[1], f[0]), linalg::sub(f[2], f[0])));
    }
    diam / (3.0 * vol / area)
}
