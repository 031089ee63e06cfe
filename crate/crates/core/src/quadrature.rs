//! Gauss rules on the reference triangle and tetrahedron built as collapsed
//! (conical) products of Gauss–Jacobi rules, exact for any requested degree.

use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

/// Nodes and weights of the `n`-point Gauss–Jacobi rule on `[-1, 1]` for the
/// weight `(1 - x)^alpha`, computed with the Golub–Welsch eigenvalue method.
pub fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let beta = 0.0;
    let ab = alpha + beta;
    // symmetric tridiagonal Jacobi matrix
    let mut m = vec![vec![0.0; n]; n];
    for j in 0..n {
        let jf = j as f64;
        let denom = (2.0 * jf + ab) * (2.0 * jf + ab + 2.0);
        m[j][j] = if denom == 0.0 { (beta - alpha) / (ab + 2.0) } else { (beta * beta - alpha * alpha) / denom };
        if j + 1 < n {
            let k = jf + 1.0;
            let s = 2.0 * k + ab;
            let b = (4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt();
            m[j][j + 1] = b;
            m[j + 1][j] = b;
        }
    }
    let (vals, vecs) = symmetric_eigen(m);
    let mu0 = 2.0.powf(alpha + 1.0) / (alpha + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (vals[i], mu0 * vecs[0][i] * vecs[0][i])).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Cyclic Jacobi rotations; returns eigenvalues and eigenvectors as columns.
fn symmetric_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-32 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Points per collapsed direction so that polynomials of total degree
/// `degree` are integrated exactly.
fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Quadrature on the reference triangle `{(s,t): s,t ≥ 0, s+t ≤ 1}`;
/// weights sum to 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn new(degree: usize) -> Self {
        let n = points_for(degree);
        let (xa, wa) = gauss_jacobi(n, 0.0);
        let (xb, wb) = gauss_jacobi(n, 1.0);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (i, &b) in xb.iter().enumerate() {
            let t = 0.5 * (1.0 + b);
            for (j, &a) in xa.iter().enumerate() {
                let u = 0.5 * (1.0 + a);
                points.push([u * (1.0 - t), t]);
                // 1/2 from each affine map, 1/2 from (1 - t) = (1 - b)/2
                weights.push(wa[j] * wb[i] * 0.125);
            }
        }
        TriangleRule { degree, points, weights }
    }
}

/// Quadrature on the reference tetrahedron with vertices `0, e1, e2, e3`;
/// weights sum to 1/6.
#[derive(Debug, Clone)]
pub struct TetRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TetRule {
    pub fn new(degree: usize) -> Self {
        let n = points_for(degree);
        let (xa, wa) = gauss_jacobi(n, 0.0);
        let (xb, wb) = gauss_jacobi(n, 1.0);
        let (xc, wc) = gauss_jacobi(n, 2.0);
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for (k, &c) in xc.iter().enumerate() {
            let w3 = 0.5 * (1.0 + c);
            for (i, &b) in xb.iter().enumerate() {
                let v = 0.5 * (1.0 + b);
                for (j, &a) in xa.iter().enumerate() {
                    let u = 0.5 * (1.0 + a);
                    points.push([u * (1.0 - v) * (1.0 - w3), v * (1.0 - w3), w3]);
                    // (1/2)^3 from the affine maps, (1/2) and (1/2)^2 from the Jacobi weights
                    weights.push(wa[j] * wb[i] * wc[k] / 64.0);
                }
            }
        }
        TetRule { degree, points, weights }
    }
}
