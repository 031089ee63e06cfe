//! Exact level-set description of the test surface.

use alloc::format;

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// Exact surface data evaluated at a point of the tubular neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    /// Unit normal `∇d`.
    pub n: Vec3,
    /// Tangential projector `I − n nᵀ`.
    pub p: Mat3,
    /// Weingarten map `∇²d`.
    pub h: Mat3,
    /// Signed distance, negative inside.
    pub d: f64,
    /// Closest point on the surface.
    pub closest: Vec3,
}

/// A smooth level-set function `φ` with zero set `Γ`, together with the
/// distance-based quantities that live on the tube `|d| < δ`.
pub trait LevelSetOracle {
    fn phi(&self, x: Vec3) -> Result<f64>;
    fn grad_phi(&self, x: Vec3) -> Result<Vec3>;
    fn hess_phi(&self, x: Vec3) -> Result<Mat3>;
    /// Half width `δ` of the tube on which the closest point map is unique.
    fn tube_halfwidth(&self) -> f64;
    fn frame_at(&self, x: Vec3) -> Result<SurfaceFrame>;
    fn closest_point(&self, x: Vec3) -> Result<Vec3> {
        Ok(self.frame_at(x)?.closest)
    }
    fn in_tube(&self, x: Vec3) -> bool {
        self.frame_at(x).is_ok()
    }
}

/// Unit sphere centred at the origin, described by its signed distance
/// `φ(x) = ‖x‖ − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub delta: f64,
}

impl Default for Sphere {
    fn default() -> Self {
        Sphere { delta: 0.9 }
    }
}

impl Sphere {
    fn radius_of(x: Vec3) -> Result<f64> {
        let r = linalg::norm(x);
        if r == 0.0 {
            return Err(Error::Domain("the sphere normal is undefined at the origin".into()));
        }
        Ok(r)
    }

    /// Closest point projection `x / ‖x‖` for any scalar type (used for
    /// forward-mode differentiation of extended fields).
    pub fn project<T: Scalar>(x: [T; 3]) -> [T; 3] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        [x[0] / r, x[1] / r, x[2] / r]
    }
}

impl LevelSetOracle for Sphere {
    fn phi(&self, x: Vec3) -> Result<f64> {
        Ok(Sphere::radius_of(x)? - 1.0)
    }

    fn grad_phi(&self, x: Vec3) -> Result<Vec3> {
        let r = Sphere::radius_of(x)?;
        Ok(linalg::scale(1.0 / r, x))
    }

    fn hess_phi(&self, x: Vec3) -> Result<Mat3> {
        let r = Sphere::radius_of(x)?;
        Ok(linalg::mat_scale(1.0 / r, &linalg::projector(linalg::scale(1.0 / r, x))))
    }

    fn tube_halfwidth(&self) -> f64 {
        self.delta
    }

    fn frame_at(&self, x: Vec3) -> Result<SurfaceFrame> {
        let r = Sphere::radius_of(x)?;
        let d = r - 1.0;
        if d.abs() >= self.delta {
            return Err(Error::Domain(format!("point {x:?} lies outside the tube (|d| = {} ≥ {})", d.abs(), self.delta)));
        }
        let n = linalg::scale(1.0 / r, x);
        let p = linalg::projector(n);
        Ok(SurfaceFrame { n, p, h: linalg::mat_scale(1.0 / r, &p), d, closest: n })
    }

    fn closest_point(&self, x: Vec3) -> Result<Vec3> {
        let r = Sphere::radius_of(x)?;
        Ok(linalg::scale(1.0 / r, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tube_point(rng: &mut ChaCha8Rng) -> Vec3 {
        loop {
            let x = [rng.gen_range(-1.8..1.8), rng.gen_range(-1.8..1.8), rng.gen_range(-1.8..1.8)];
            let r = linalg::norm(x);
            if (r - 1.0).abs() < 0.85 && r > 0.1 {
                return x;
            }
        }
    }

    #[test]
    fn phi_values() {
        let s = Sphere::default();
        assert_eq!(s.phi([0.0, 0.0, 0.5]).unwrap(), -0.5);
        assert_eq!(s.phi([1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(s.phi([0.0, 2.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(s.phi([0.0; 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn closest_point_examples() {
        let s = Sphere::default();
        assert_eq!(s.closest_point([2.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(s.closest_point([0.0, 0.5, 0.0]).unwrap(), [0.0, 1.0, 0.0]);
        let on = linalg::normalize([0.3, -0.4, 0.5]).unwrap();
        let p = s.closest_point(on).unwrap();
        assert!(linalg::norm(linalg::sub(p, on)) < 1e-15);
        assert!(s.closest_point([0.0; 3]).is_err());
    }

    #[test]
    fn frame_examples() {
        let s = Sphere::default();
        let f = s.frame_at([0.0, 0.0, 2.0]).unwrap_err();
        assert!(matches!(f, Error::Domain(_)));
        let s_wide = Sphere { delta: 1.5 };
        let f = s_wide.frame_at([0.0, 0.0, 2.0]).unwrap();
        assert_eq!(f.d, 1.0);
        assert_eq!(f.n, [0.0, 0.0, 1.0]);
        let f = s.frame_at([1.0, 0.0, 0.0]).unwrap();
        let expected = [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(linalg::frobenius(&linalg::mat_sub(&f.h, &expected)) < 1e-15);
    }

    #[test]
    fn weingarten_matches_normal_differences() {
        let s = Sphere::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-5;
        for _ in 0..100 {
            let x = random_tube_point(&mut rng);
            let f = s.frame_at(x).unwrap();
            for j in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += step;
                xm[j] -= step;
                let np = s.frame_at(xp).unwrap().n;
                let nm = s.frame_at(xm).unwrap().n;
                for i in 0..3 {
                    let fd = (np[i] - nm[i]) / (2.0 * step);
                    assert!((fd - f.h[i][j]).abs() < 1e-8);
                }
            }
            assert!(linalg::norm(linalg::mat_vec(&f.p, f.n)) < 1e-14);
            assert!(linalg::norm(linalg::mat_vec(&f.h, f.n)) < 1e-12);
            let pp = linalg::mat_mul(&f.p, &f.p);
            assert!(linalg::frobenius(&linalg::mat_sub(&pp, &f.p)) < 1e-14);
            assert!((linalg::norm(s.grad_phi(x).unwrap()) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let s = Sphere::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = random_tube_point(&mut rng);
            let p = s.closest_point(x).unwrap();
            let pp = s.closest_point(p).unwrap();
            assert!(linalg::norm(linalg::sub(p, pp)) < 1e-14);
            assert!(s.phi(p).unwrap().abs() < 1e-14);
        }
    }
}
