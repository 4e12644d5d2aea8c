//! Collapsed (conical product) Gauss rules on the reference simplices.
//!
//! The reference tetrahedron is mapped from the unit cube by
//! `x = a`, `y = b (1 - a)`, `z = c (1 - a)(1 - b)` whose Jacobian is
//! `(1 - a)^2 (1 - b)`; Gauss-Legendre factors in each direction give rules
//! with strictly positive weights for any polynomial degree.

use crate::error::{invalid, Result};

/// Gauss-Legendre points and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess, then Newton on P_n.
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { t } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (t * p - pm1) / (t * t - 1.0);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let weight = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = 0.5 * (1.0 - t);
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[i] = 0.5 * weight;
        w[n - 1 - i] = 0.5 * weight;
    }
    (x, w)
}

/// Quadrature rule on the reference tetrahedron with barycentric points.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(l0, l1, l2, l3)`.
    pub points: Vec<[f64; 4]>,
    /// Weights summing to the reference volume `1/6`.
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

/// Quadrature rule on the reference triangle with barycentric points.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    /// Weights summing to the reference area `1/2`.
    pub weights: Vec<f64>,
    pub degree: usize,
}

const MAX_DEGREE: usize = 30;

impl QuadratureRule {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn tetrahedron(degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(invalid(format!("quadrature degree {degree} exceeds {MAX_DEGREE}")));
        }
        // Degree p in (x,y,z) becomes degree p+2 in `a` after the collapse.
        let n = (degree + 3).div_ceil(2).max(1);
        let (g, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for (a, wa) in g.iter().zip(&w) {
            for (b, wb) in g.iter().zip(&w) {
                for (c, wc) in g.iter().zip(&w) {
                    let x = *a;
                    let y = b * (1.0 - a);
                    let z = c * (1.0 - a) * (1.0 - b);
                    points.push([1.0 - x - y - z, x, y, z]);
                    weights.push(wa * wb * wc * (1.0 - a) * (1.0 - a) * (1.0 - b));
                }
            }
        }
        Ok(Self { points, weights, degree })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

impl TriangleRule {
    pub fn triangle(degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(invalid(format!("quadrature degree {degree} exceeds {MAX_DEGREE}")));
        }
        let n = (degree + 2).div_ceil(2).max(1);
        let (g, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (a, wa) in g.iter().zip(&w) {
            for (b, wb) in g.iter().zip(&w) {
                let x = *a;
                let y = b * (1.0 - a);
                points.push([1.0 - x - y, x, y]);
                weights.push(wa * wb * (1.0 - a));
            }
        }
        Ok(Self { points, weights, degree })
    }
}
