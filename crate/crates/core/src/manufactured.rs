//! Manufactured tangential solution on the unit sphere, the right-hand side of
//! the strong vector-Laplace equation and the corresponding multiplier.
//!
//! Derivatives of the closed form are taken with forward-mode duals; the
//! second derivatives in `f` come from nesting them.

use alloc::format;

use crate::dual::{seed, Dual3, Scalar};
use crate::error::{Error, Result};
use crate::geometry::Sphere;
use crate::linalg::{Mat3, Vec3};

fn dot3<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn projector<T: Scalar>(x: [T; 3]) -> [[T; 3]; 3] {
    let r2 = dot3(x, x);
    let mut p = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let id = if i == j { T::one() } else { T::zero() };
            p[i][j] = id - x[i] * x[j] / r2;
        }
    }
    p
}

/// `u*(x) = P(x) (−x₃²/r², x₂/r, x₁/r)`, homogeneous of degree zero.
pub fn u_star_generic<T: Scalar>(x: [T; 3]) -> [T; 3] {
    let r2 = dot3(x, x);
    let r = r2.sqrt();
    let w = [-(x[2] * x[2]) / r2, x[1] / r, x[0] / r];
    let xw = dot3(x, w) / r2;
    [w[0] - x[0] * xw, w[1] - x[1] * xw, w[2] - x[2] * xw]
}

fn grad_u_star<T: Scalar>(x: [T; 3]) -> [[T; 3]; 3] {
    let u = u_star_generic(seed(x));
    [u[0].d, u[1].d, u[2].d]
}

/// `E = ½(P ∇u* P + (P ∇u* P)ᵀ)`, evaluated with the projector of `x` (a
/// smooth extension of the surface strain off `Γ`).
pub fn strain_generic<T: Scalar>(x: [T; 3]) -> [[T; 3]; 3] {
    let g = grad_u_star(x);
    let p = projector(x);
    let mut pg = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = T::zero();
            for a in 0..3 {
                for b in 0..3 {
                    s = s + p[i][a] * g[a][b] * p[b][j];
                }
            }
            pg[i][j] = s;
        }
    }
    let mut e = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = T::cst(0.5) * (pg[i][j] + pg[j][i]);
        }
    }
    e
}

/// `λ = −tr(E(u*) H)` with `H = P / r`.
pub fn lambda_generic<T: Scalar>(x: [T; 3]) -> T {
    let e = strain_generic(x);
    let p = projector(x);
    let r = dot3(x, x).sqrt();
    let mut s = T::zero();
    for a in 0..3 {
        for b in 0..3 {
            s = s + e[a][b] * p[b][a];
        }
    }
    -(s / r)
}

fn re3(v: [Dual3<f64>; 3]) -> Vec3 {
    [v[0].v, v[1].v, v[2].v]
}

/// Exact data of the sphere test problem. Surface fields are extended to the
/// tube by composition with the closest point map.
#[derive(Debug, Clone, Copy, Default)]
pub struct SphereProblem;

impl SphereProblem {
    fn check(x: Vec3) -> Result<()> {
        if x == [0.0; 3] || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("the manufactured solution is undefined at {x:?}")));
        }
        Ok(())
    }

    pub fn u_star(&self, x: Vec3) -> Result<Vec3> {
        Self::check(x)?;
        Ok(u_star_generic(x))
    }

    /// Value and gradient `∂u_i/∂x_j` of the extension `u* ∘ p`.
    pub fn u_ext(&self, x: Vec3) -> Result<(Vec3, Mat3)> {
        Self::check(x)?;
        let u = u_star_generic(Sphere::project(seed(x)));
        Ok((re3(u), [u[0].d, u[1].d, u[2].d]))
    }

    /// `f = −P div_Γ E(u*) + u*` at a point of the sphere.
    pub fn f_on_surface(&self, x: Vec3) -> Result<Vec3> {
        Self::check(x)?;
        let e = strain_generic(seed(x));
        let p = projector(x);
        let mut div = [0.0; 3];
        for (i, di) in div.iter_mut().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    *di += p[a][b] * e[i][b].d[a];
                }
            }
        }
        let u = u_star_generic(x);
        let mut f = [0.0; 3];
        for i in 0..3 {
            let pd: f64 = (0..3).map(|j| p[i][j] * div[j]).sum();
            f[i] = -pd + u[i];
        }
        Ok(f)
    }

    /// `f ∘ p`
    pub fn f_ext(&self, x: Vec3) -> Result<Vec3> {
        Self::check(x)?;
        self.f_on_surface(Sphere::project(x))
    }

    pub fn lambda(&self, x: Vec3) -> Result<f64> {
        Self::check(x)?;
        Ok(lambda_generic(x))
    }

    /// Value and gradient of `λ ∘ p`.
    pub fn lambda_ext(&self, x: Vec3) -> Result<(f64, Vec3)> {
        Self::check(x)?;
        let l = lambda_generic(Sphere::project(seed(x)));
        Ok((l.v, l.d))
    }
}
