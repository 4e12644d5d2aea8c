//! Element-level restriction of the bilinear forms
//!
//! ```text
//! a(u, v)   = ∫ (C^H eps(u)) · eps(v)
//! b(psi, p) = ∫ grad(p) · (mu grad(psi))
//! c(v, psi) = 1/2 ∫ eps(v) · (e grad(psi))
//! ```
//!
//! and of the Neumann/volume load functionals, on affine tetrahedra with
//! Lagrange P1/P2 shape functions. Strains use the engineering-shear Voigt
//! vector of the material module. Vector DOFs are interleaved: local vector
//! DOF `3 * a + c` is component `c` of scalar shape function `a`.

mod element;
mod quadrature;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6};

use crate::error::Result;
use crate::material::Matrix6x3;
use crate::mesh::Point;

pub use element::{
    triangle_values, Degree, ReferenceElement, TetGeometry, TriangleGeometry, TET_EDGES, TRI_EDGES,
};
pub use quadrature::{gauss_legendre, QuadratureRule, TriangleRule};

/// Surface data on the Neumann boundary, evaluated at a point with the
/// outward unit normal.
pub trait NeumannData: Sync {
    fn traction(&self, x: &Point, normal: &[f64; 3]) -> [f64; 3];
    fn flux(&self, x: &Point, normal: &[f64; 3]) -> f64;
}

/// Volumetric source terms (zero in the homogeneous problem).
pub trait SourceData: Sync {
    fn body_force(&self, x: &Point) -> [f64; 3];
    fn magnetic_source(&self, x: &Point) -> f64;
}

/// Spatially constant traction and normal flux.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantNeumann {
    pub traction: [f64; 3],
    pub flux: f64,
}

impl NeumannData for ConstantNeumann {
    fn traction(&self, _: &Point, _: &[f64; 3]) -> [f64; 3] {
        self.traction
    }

    fn flux(&self, _: &Point, _: &[f64; 3]) -> f64 {
        self.flux
    }
}

/// Spatially constant volumetric sources.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantSources {
    pub body_force: [f64; 3],
    pub magnetic_source: f64,
}

impl SourceData for ConstantSources {
    fn body_force(&self, _: &Point) -> [f64; 3] {
        self.body_force
    }

    fn magnetic_source(&self, _: &Point) -> f64 {
        self.magnetic_source
    }
}

/// Engineering Voigt strain `[e11, e22, e33, g23, g13, g12]` of the vector
/// field `N e_comp` with `grad N = g`.
#[inline]
pub fn voigt_strain(g: &[f64; 3], comp: usize) -> [f64; 6] {
    match comp {
        0 => [g[0], 0.0, 0.0, 0.0, g[2], g[1]],
        1 => [0.0, g[1], 0.0, g[2], 0.0, g[0]],
        _ => [0.0, 0.0, g[2], g[1], g[0], 0.0],
    }
}

/// Engineering Voigt strain of a displacement gradient `du[c][d] = d u_c / d x_d`.
pub fn voigt_strain_of_gradient(du: &[[f64; 3]; 3]) -> [f64; 6] {
    [
        du[0][0],
        du[1][1],
        du[2][2],
        du[1][2] + du[2][1],
        du[0][2] + du[2][0],
        du[0][1] + du[1][0],
    ]
}

fn stiffness_rule(degree: Degree) -> QuadratureRule {
    QuadratureRule::tetrahedron(2 * degree.order()).expect("fixed quadrature degree")
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Elastic block `A_e`, size `3n x 3n`.
pub fn element_elastic(tet: &[Point; 4], degree: Degree, stiffness: &Matrix6<f64>) -> Result<DMatrix<f64>> {
    let geo = TetGeometry::new(tet)?;
    let elem = ReferenceElement::new(degree);
    let rule = stiffness_rule(degree);
    let nv = 3 * elem.num_dofs();
    let mut a = DMatrix::zeros(nv, nv);
    let mut strains = vec![[0.0; 6]; nv];
    let mut stresses = vec![[0.0; 6]; nv];
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let grads = geo.shape_gradients(&elem, l);
        for (i, g) in grads.iter().enumerate() {
            for c in 0..3 {
                let eps = voigt_strain(g, c);
                strains[3 * i + c] = eps;
                stresses[3 * i + c] = std::array::from_fn(|r| (0..6).map(|s| stiffness[(r, s)] * eps[s]).sum());
            }
        }
        let scale = w * 6.0 * geo.volume;
        for i in 0..nv {
            for j in i..nv {
                let v: f64 = (0..6).map(|r| strains[i][r] * stresses[j][r]).sum();
                a[(i, j)] += scale * v;
            }
        }
    }
    mirror_upper(&mut a);
    Ok(a)
}

/// Magnetic block `B_e`, size `n x n`.
pub fn element_magnetic(tet: &[Point; 4], degree: Degree, permeability: &Matrix3<f64>) -> Result<DMatrix<f64>> {
    let geo = TetGeometry::new(tet)?;
    let elem = ReferenceElement::new(degree);
    let rule = stiffness_rule(degree);
    let n = elem.num_dofs();
    let mut b = DMatrix::zeros(n, n);
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let grads = geo.shape_gradients(&elem, l);
        let flux: Vec<[f64; 3]> = grads
            .iter()
            .map(|g| std::array::from_fn(|r| (0..3).map(|s| permeability[(r, s)] * g[s]).sum()))
            .collect();
        let scale = w * 6.0 * geo.volume;
        for i in 0..n {
            for j in i..n {
                b[(i, j)] += scale * (0..3).map(|d| grads[i][d] * flux[j][d]).sum::<f64>();
            }
        }
    }
    mirror_upper(&mut b);
    Ok(b)
}

/// Coupling block `C_e[I, j] = 1/2 ∫ eps(N_I) · (e grad N_j)`, size `3n x n`.
pub fn element_coupling(tet: &[Point; 4], degree: Degree, coupling: &Matrix6x3) -> Result<DMatrix<f64>> {
    let geo = TetGeometry::new(tet)?;
    let elem = ReferenceElement::new(degree);
    let rule = stiffness_rule(degree);
    let n = elem.num_dofs();
    let mut c = DMatrix::zeros(3 * n, n);
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let grads = geo.shape_gradients(&elem, l);
        let field: Vec<[f64; 6]> = grads
            .iter()
            .map(|g| std::array::from_fn(|r| (0..3).map(|s| coupling[(r, s)] * g[s]).sum()))
            .collect();
        let scale = 0.5 * w * 6.0 * geo.volume;
        for (a, g) in grads.iter().enumerate() {
            for comp in 0..3 {
                let eps = voigt_strain(g, comp);
                for j in 0..n {
                    c[(3 * a + comp, j)] += scale * (0..6).map(|r| eps[r] * field[j][r]).sum::<f64>();
                }
            }
        }
    }
    Ok(c)
}

/// Same block as [`element_coupling`], integrated from the potential side:
/// `1/2 ∫ grad N_j · (e^T eps(N_I))`.
pub fn element_coupling_potential_form(
    tet: &[Point; 4],
    degree: Degree,
    coupling: &Matrix6x3,
) -> Result<DMatrix<f64>> {
    let geo = TetGeometry::new(tet)?;
    let elem = ReferenceElement::new(degree);
    let rule = stiffness_rule(degree);
    let n = elem.num_dofs();
    let mut c = DMatrix::zeros(3 * n, n);
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let grads = geo.shape_gradients(&elem, l);
        let scale = 0.5 * w * 6.0 * geo.volume;
        for (a, g) in grads.iter().enumerate() {
            for comp in 0..3 {
                let eps = voigt_strain(g, comp);
                let et_eps: [f64; 3] = std::array::from_fn(|s| (0..6).map(|r| coupling[(r, s)] * eps[r]).sum());
                for (j, gj) in grads.iter().enumerate() {
                    c[(3 * a + comp, j)] += scale * (0..3).map(|d| gj[d] * et_eps[d]).sum::<f64>();
                }
            }
        }
    }
    Ok(c)
}

/// Scalar element matrices used for norm Gram matrices.
#[derive(Debug, Clone)]
pub struct ScalarElementMatrices {
    /// `∫ N_i N_j`
    pub mass: DMatrix<f64>,
    /// `∫ grad N_i · grad N_j`
    pub laplace: DMatrix<f64>,
}

pub fn element_scalar_grams(tet: &[Point; 4], degree: Degree) -> Result<ScalarElementMatrices> {
    let geo = TetGeometry::new(tet)?;
    let elem = ReferenceElement::new(degree);
    let rule = stiffness_rule(degree);
    let n = elem.num_dofs();
    let mut mass = DMatrix::zeros(n, n);
    let mut laplace = DMatrix::zeros(n, n);
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let vals = elem.values(l);
        let grads = geo.shape_gradients(&elem, l);
        let scale = w * 6.0 * geo.volume;
        for i in 0..n {
            for j in i..n {
                mass[(i, j)] += scale * vals[i] * vals[j];
                laplace[(i, j)] += scale * (0..3).map(|d| grads[i][d] * grads[j][d]).sum::<f64>();
            }
        }
    }
    mirror_upper(&mut mass);
    mirror_upper(&mut laplace);
    Ok(ScalarElementMatrices { mass, laplace })
}

/// Strain Gram `∫ eps(u) : eps(v)` (tensor contraction, so shear entries
/// enter with weight 1/2 in engineering Voigt form), size `3n x 3n`.
pub fn element_strain_gram(tet: &[Point; 4], degree: Degree) -> Result<DMatrix<f64>> {
    let mut weights = Matrix6::identity();
    for r in 3..6 {
        weights[(r, r)] = 0.5;
    }
    element_elastic(tet, degree, &weights)
}

/// Neumann loads on one boundary facet: `(∫ N_i tau, ∫ N_i flux)` with the
/// traction load interleaved by component. Triangle quadrature degree `2k`.
pub fn element_neumann_loads(
    facet: &[Point; 3],
    normal: &[f64; 3],
    degree: Degree,
    data: &dyn NeumannData,
) -> Result<(DVector<f64>, DVector<f64>)> {
    element_neumann_loads_with(facet, normal, degree, data, 2 * degree.order())
}

pub fn element_neumann_loads_with(
    facet: &[Point; 3],
    normal: &[f64; 3],
    degree: Degree,
    data: &dyn NeumannData,
    quadrature_degree: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let geo = TriangleGeometry::new(facet)?;
    let rule = TriangleRule::triangle(quadrature_degree)?;
    let n = degree.facet_dofs();
    let mut traction = DVector::zeros(3 * n);
    let mut flux = DVector::zeros(n);
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let x = geo.point(l);
        let tau = data.traction(&x, normal);
        let bt = data.flux(&x, normal);
        let scale = w * 2.0 * geo.area;
        for (i, v) in triangle_values(degree, l).iter().enumerate() {
            for c in 0..3 {
                traction[3 * i + c] += scale * v * tau[c];
            }
            flux[i] += scale * v * bt;
        }
    }
    Ok((traction, flux))
}

/// Volume loads `(∫ N_i f, ∫ N_i g)`, quadrature degree `2k`.
pub fn element_source_loads(
    tet: &[Point; 4],
    degree: Degree,
    data: &dyn SourceData,
) -> Result<(DVector<f64>, DVector<f64>)> {
    element_source_loads_with(tet, degree, data, 2 * degree.order())
}

pub fn element_source_loads_with(
    tet: &[Point; 4],
    degree: Degree,
    data: &dyn SourceData,
    quadrature_degree: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let geo = TetGeometry::new(tet)?;
    let elem = ReferenceElement::new(degree);
    let rule = QuadratureRule::tetrahedron(quadrature_degree)?;
    let n = elem.num_dofs();
    let mut body = DVector::zeros(3 * n);
    let mut magnetic = DVector::zeros(n);
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let x = geo.point(l);
        let f = data.body_force(&x);
        let g = data.magnetic_source(&x);
        let scale = w * 6.0 * geo.volume;
        for (i, v) in elem.values(l).iter().enumerate() {
            for c in 0..3 {
                body[3 * i + c] += scale * v * f[c];
            }
            magnetic[i] += scale * v * g;
        }
    }
    Ok((body, magnetic))
}
