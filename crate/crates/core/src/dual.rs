//! Forward-mode differentiation with three directional components.
//!
//! [`Dual3<T>`] carries a value and its gradient with respect to the three
//! space coordinates. Nesting `Dual3<Dual3<f64>>` yields second derivatives,
//! which is how the manufactured right-hand side and multiplier are built.

use core::ops::{Add, Div, Mul, Neg, Sub};
use num_traits::Float;

/// Arithmetic needed by the closed-form fields.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sqrt(self) -> Self;
    /// Underlying real value with all derivative parts dropped.
    fn re(self) -> f64;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn sqrt(self) -> Self {
        Float::sqrt(self)
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual3<T> {
    pub v: T,
    pub d: [T; 3],
}

impl<T: Scalar> Dual3<T> {
    pub fn constant(v: T) -> Self {
        Dual3 { v, d: [T::zero(); 3] }
    }

    /// Seeds coordinate `i` with value `v`.
    pub fn variable(v: T, i: usize) -> Self {
        let mut d = [T::zero(); 3];
        d[i] = T::one();
        Dual3 { v, d }
    }
}

/// Lifts a point into seeded dual coordinates.
pub fn seed<T: Scalar>(x: [T; 3]) -> [Dual3<T>; 3] {
    [Dual3::variable(x[0], 0), Dual3::variable(x[1], 1), Dual3::variable(x[2], 2)]
}

impl<T: Scalar> Add for Dual3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual3 { v: self.v + o.v, d: [self.d[0] + o.d[0], self.d[1] + o.d[1], self.d[2] + o.d[2]] }
    }
}

impl<T: Scalar> Sub for Dual3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual3 { v: self.v - o.v, d: [self.d[0] - o.d[0], self.d[1] - o.d[1], self.d[2] - o.d[2]] }
    }
}

impl<T: Scalar> Mul for Dual3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual3 {
            v: self.v * o.v,
            d: [
                self.d[0] * o.v + self.v * o.d[0],
                self.d[1] * o.v + self.v * o.d[1],
                self.d[2] * o.v + self.v * o.d[2],
            ],
        }
    }
}

impl<T: Scalar> Div for Dual3<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.v;
        let q = self.v * inv;
        Dual3 {
            v: q,
            d: [
                (self.d[0] - q * o.d[0]) * inv,
                (self.d[1] - q * o.d[1]) * inv,
                (self.d[2] - q * o.d[2]) * inv,
            ],
        }
    }
}

impl<T: Scalar> Neg for Dual3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual3 { v: -self.v, d: [-self.d[0], -self.d[1], -self.d[2]] }
    }
}

impl<T: Scalar> Scalar for Dual3<T> {
    fn cst(v: f64) -> Self {
        Dual3::constant(T::cst(v))
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let f = T::cst(0.5) / s;
        Dual3 { v: s, d: [self.d[0] * f, self.d[1] * f, self.d[2] * f] }
    }
    fn re(self) -> f64 {
        self.v.re()
    }
}

/// Value and Jacobian `J[i][j] = ∂f_i/∂x_j` of a vector field at `x`.
pub fn jacobian<F>(f: F, x: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3])
where
    F: Fn([Dual3<f64>; 3]) -> [Dual3<f64>; 3],
{
    let out = f(seed(x));
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        jac[i] = out[i].d;
    }
    ([out[0].v, out[1].v, out[2].v], jac)
}

/// Value and gradient of a scalar field at `x`.
pub fn gradient<F>(f: F, x: [f64; 3]) -> (f64, [f64; 3])
where
    F: Fn([Dual3<f64>; 3]) -> Dual3<f64>,
{
    let out = f(seed(x));
    (out.v, out.d)
}
