//! Element matrices against an independent implementation: Grundmann-Möller
//! simplex quadrature, shape functions written out in barycentrics, and
//! barycentric gradients from a dense inverse.

mod common;

use common::rng;
use mefem::fem::{
    element_coupling, element_elastic, element_magnetic, element_scalar_grams, element_strain_gram, Degree, TET_EDGES,
};
use mefem::material::{check_minimal_positivity, Matrix6x3};
use mefem::mesh::Point;
use nalgebra::{DMatrix, Matrix3, Matrix4, Matrix6};
use rand::Rng;

/// Grundmann-Möller rule on the 3-simplex, exact to degree `2s + 1`.
/// Returns barycentric points and weights that sum to one.
fn grundmann_moller(s: usize) -> Vec<([f64; 4], f64)> {
    let n = 3;
    let d = 2 * s + 1;
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let mut rule = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let w = (-1f64).powi(i as i32) * ((d + n - 2 * i) as f64).powi(d as i32) / (fact(i) * fact(d + n - i));
        let total = s - i;
        for b0 in 0..=total {
            for b1 in 0..=total - b0 {
                for b2 in 0..=total - b0 - b1 {
                    let b3 = total - b0 - b1 - b2;
                    let l = [b0, b1, b2, b3].map(|b| (2 * b + 1) as f64 / denom);
                    rule.push((l, w));
                }
            }
        }
    }
    let sum: f64 = rule.iter().map(|(_, w)| w).sum();
    rule.into_iter().map(|(l, w)| (l, w / sum)).collect()
}

fn random_tet(r: &mut impl Rng) -> [Point; 4] {
    loop {
        let p: [Point; 4] = std::array::from_fn(|_| std::array::from_fn(|_| r.random_range(-1.0..1.0)));
        let v = volume(&p);
        if v.abs() > 0.02 {
            return p;
        }
    }
}

fn volume(p: &[Point; 4]) -> f64 {
    let m = Matrix3::from_fn(|i, j| p[j + 1][i] - p[0][i]);
    m.determinant() / 6.0
}

/// Rows: gradients of the four barycentric coordinates.
fn bary_gradients(p: &[Point; 4]) -> [[f64; 3]; 4] {
    // l = M^{-1} (1, x, y, z)
    let m = Matrix4::from_fn(|i, j| if i == 0 { 1.0 } else { p[j][i - 1] });
    let inv = m.try_inverse().unwrap();
    std::array::from_fn(|a| std::array::from_fn(|d| inv[(a, d + 1)]))
}

fn shape(degree: Degree, l: &[f64; 4], g: &[[f64; 3]; 4]) -> (Vec<f64>, Vec<[f64; 3]>) {
    match degree {
        Degree::P1 => (l.to_vec(), g.to_vec()),
        Degree::P2 => {
            let mut v = Vec::new();
            let mut dv = Vec::new();
            for a in 0..4 {
                v.push(l[a] * (2.0 * l[a] - 1.0));
                dv.push(g[a].map(|x| (4.0 * l[a] - 1.0) * x));
            }
            for [a, b] in TET_EDGES {
                v.push(4.0 * l[a] * l[b]);
                dv.push(std::array::from_fn(|d| 4.0 * (l[a] * g[b][d] + l[b] * g[a][d])));
            }
            (v, dv)
        }
    }
}

fn strain(g: &[f64; 3], c: usize) -> [f64; 6] {
    let mut du = [[0.0; 3]; 3];
    du[c] = *g;
    [du[0][0], du[1][1], du[2][2], du[1][2] + du[2][1], du[0][2] + du[2][0], du[0][1] + du[1][0]]
}

struct Oracle {
    elastic: DMatrix<f64>,
    magnetic: DMatrix<f64>,
    coupling: DMatrix<f64>,
    mass: DMatrix<f64>,
    laplace: DMatrix<f64>,
}

fn oracle(p: &[Point; 4], degree: Degree, cs: &Matrix6<f64>, e: &Matrix6x3, mu: &Matrix3<f64>) -> Oracle {
    let g = bary_gradients(p);
    let vol = volume(p).abs();
    let n = if degree == Degree::P1 { 4 } else { 10 };
    let mut o = Oracle {
        elastic: DMatrix::zeros(3 * n, 3 * n),
        magnetic: DMatrix::zeros(n, n),
        coupling: DMatrix::zeros(3 * n, n),
        mass: DMatrix::zeros(n, n),
        laplace: DMatrix::zeros(n, n),
    };
    for (l, w) in grundmann_moller(3) {
        let (v, dv) = shape(degree, &l, &g);
        let s = w * vol;
        for i in 0..n {
            let gi = nalgebra::Vector3::from(dv[i]);
            for j in 0..n {
                let gj = nalgebra::Vector3::from(dv[j]);
                o.mass[(i, j)] += s * v[i] * v[j];
                o.laplace[(i, j)] += s * gi.dot(&gj);
                o.magnetic[(i, j)] += s * gi.dot(&(mu * gj));
                let egj = e * gj;
                for a in 0..3 {
                    let ea = nalgebra::Vector6::from(strain(&dv[i], a));
                    o.coupling[(3 * i + a, j)] += 0.5 * s * ea.dot(&egj);
                    for b in 0..3 {
                        let eb = nalgebra::Vector6::from(strain(&dv[j], b));
                        o.elastic[(3 * i + a, 3 * j + b)] += s * ea.dot(&(cs * eb));
                    }
                }
            }
        }
    }
    o
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}

fn random_material(r: &mut impl Rng) -> (Matrix6<f64>, Matrix6x3, Matrix3<f64>) {
    let g = Matrix6::from_fn(|_, _| r.random_range(-1.0..1.0));
    let cs = g * g.transpose() + Matrix6::identity();
    let e = Matrix6x3::from_fn(|_, _| r.random_range(-1.0..1.0));
    let h = Matrix3::from_fn(|_, _| r.random_range(-1.0..1.0));
    let mu = h * h.transpose() + Matrix3::identity();
    (cs, e, mu)
}

#[test]
fn grundmann_moller_integrates_monomials() {
    // ∫ l^alpha / V = 3! alpha! / (3 + |alpha|)!
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let rule = grundmann_moller(3);
    for a in 0..=3u32 {
        for b in 0..=(7 - a).min(3) {
            for c in 0..=(7 - a - b).min(2) {
                let q: f64 = rule.iter().map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)).sum();
                let exact = 6.0 * fact(a) * fact(b) * fact(c) / fact(3 + a + b + c);
                assert!((q - exact).abs() < 1e-14, "{a} {b} {c}: {q} vs {exact}");
            }
        }
    }
}

#[test]
fn element_matrices_match_oracle() {
    let mut r = rng(101);
    for _ in 0..5 {
        let p = random_tet(&mut r);
        let (cs, e, mu) = random_material(&mut r);
        for degree in [Degree::P1, Degree::P2] {
            let o = oracle(&p, degree, &cs, &e, &mu);
            assert!(rel(&element_elastic(&p, degree, &cs).unwrap(), &o.elastic) < 1e-12);
            assert!(rel(&element_magnetic(&p, degree, &mu).unwrap(), &o.magnetic) < 1e-12);
            assert!(rel(&element_coupling(&p, degree, &e).unwrap(), &o.coupling) < 1e-12);
            let grams = element_scalar_grams(&p, degree).unwrap();
            assert!(rel(&grams.mass, &o.mass) < 1e-12);
            assert!(rel(&grams.laplace, &o.laplace) < 1e-12);
        }
    }
}

#[test]
fn p1_scalar_grams_by_hand() {
    let mut r = rng(102);
    let p = random_tet(&mut r);
    let v = volume(&p).abs();
    let g = bary_gradients(&p);
    let grams = element_scalar_grams(&p, Degree::P1).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let mass = v / 20.0 * if i == j { 2.0 } else { 1.0 };
            let lap = v * (0..3).map(|d| g[i][d] * g[j][d]).sum::<f64>();
            assert!((grams.mass[(i, j)] - mass).abs() < 1e-14);
            assert!((grams.laplace[(i, j)] - lap).abs() < 1e-12 * lap.abs().max(1.0));
        }
    }
}

#[test]
fn strain_gram_uses_tensor_contraction() {
    // For u = (y, 0, 0): eps12 = eps21 = 1/2, so eps:eps = 1/2 per unit volume.
    let p: [Point; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let m = element_strain_gram(&p, Degree::P1).unwrap();
    let mut u = nalgebra::DVector::zeros(12);
    for (a, x) in p.iter().enumerate() {
        u[3 * a] = x[1];
    }
    assert!((u.dot(&(&m * &u)) - 0.5 / 6.0).abs() < 1e-15);
}

#[test]
fn vertex_permutation_permutes_p1_matrices() {
    let mut r = rng(103);
    let p = random_tet(&mut r);
    let (cs, e, mu) = random_material(&mut r);
    let perms = [[1, 2, 0, 3], [3, 0, 1, 2], [1, 0, 2, 3]];
    let a = element_elastic(&p, Degree::P1, &cs).unwrap();
    let b = element_magnetic(&p, Degree::P1, &mu).unwrap();
    let c = element_coupling(&p, Degree::P1, &e).unwrap();
    for perm in perms {
        let q: [Point; 4] = perm.map(|i| p[i]);
        let ap = element_elastic(&q, Degree::P1, &cs).unwrap();
        let bp = element_magnetic(&q, Degree::P1, &mu).unwrap();
        let cp = element_coupling(&q, Degree::P1, &e).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((bp[(i, j)] - b[(perm[i], perm[j])]).abs() < 1e-12);
                for x in 0..3 {
                    assert!((cp[(3 * i + x, j)] - c[(3 * perm[i] + x, perm[j])]).abs() < 1e-12);
                    for y in 0..3 {
                        assert!((ap[(3 * i + x, 3 * j + y)] - a[(3 * perm[i] + x, 3 * perm[j] + y)]).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

/// With v = (psi, psi, psi) the coupling collapses to a quadratic form in
/// grad psi whose coefficients are the minimal positivity quantities:
/// `1/2 ∫ 2 Â1 p1² + 2 Â2 p2² + 2 Â3 p3² + 2 Â4 p1 p2 + 2 Â5 p1 p3 + 2 Â6 p2 p3`.
#[test]
fn substitution_identity_per_element() {
    let mut r = rng(104);
    for _ in 0..5 {
        let p = random_tet(&mut r);
        let e = Matrix6x3::from_fn(|_, _| r.random_range(-1.0..1.0));
        let a_hat = check_minimal_positivity(&e).unwrap().a_hat;
        let g = bary_gradients(&p);
        let vol = volume(&p).abs();
        for degree in [Degree::P1, Degree::P2] {
            let c = element_coupling(&p, degree, &e).unwrap();
            let n = c.ncols();
            let psi = nalgebra::DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
            let v = nalgebra::DVector::from_fn(3 * n, |i, _| psi[i / 3]);
            let discrete = v.dot(&(&c * &psi));
            let mut direct = 0.0;
            for (l, w) in grundmann_moller(3) {
                let (_, dv) = shape(degree, &l, &g);
                let d: [f64; 3] = std::array::from_fn(|k| (0..n).map(|i| psi[i] * dv[i][k]).sum());
                let form = 2.0 * (a_hat[0] * d[0] * d[0] + a_hat[1] * d[1] * d[1] + a_hat[2] * d[2] * d[2])
                    + 2.0 * (a_hat[3] * d[0] * d[1] + a_hat[4] * d[0] * d[2] + a_hat[5] * d[1] * d[2]);
                direct += 0.5 * w * vol * form;
            }
            assert!((discrete - direct).abs() <= 1e-12 * direct.abs().max(1e-3), "{discrete} vs {direct}");
        }
    }
}
