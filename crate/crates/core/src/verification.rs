//! Manufactured solutions, error norms, convergence tables and energies.
//!
//! A manufactured case fixes smooth exact fields `(u, psi)` vanishing on the
//! `x = 0` face, and derives the volume sources and Neumann data that make
//! them solve the coupled problem:
//!
//! ```text
//! f = -Div(C eps(u) + 1/2 e grad psi)        tau = (C eps(u) + 1/2 e grad psi) n
//! g = -Div(1/2 e^T eps(u) - mu grad psi)     B~  = (1/2 e^T eps(u) - mu grad psi) . n
//! ```
//!
//! Sources are a verification-only extension of the homogeneous problem.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DVector, Vector3, Vector6};

use crate::analysis::mesh_size;
use crate::assembly::{assemble_system, build_spaces, integrate_fields, AssemblyOptions, FunctionSpacePair};
use crate::error::{invalid, Result};
use crate::fem::{triangle_values, voigt_strain_of_gradient, Degree, NeumannData, SourceData, TriangleGeometry, TriangleRule};
use crate::material::MaterialLaw;
use crate::mesh::{generate_unit_cube_mesh, BoundaryClass, CubeFace, FaceSet, Point};
use crate::solver::{solve_direct, SaddleSolution};

/// Smooth scalar field with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarField {
    /// `c + g . x + 1/2 x^T H x` with symmetric `H`.
    Quadratic { c: f64, g: [f64; 3], h: [[f64; 3]; 3] },
    /// `amp * prod_d sin(k_d x_d + phase_d)`.
    SineProduct { amp: f64, k: [f64; 3], phase: [f64; 3] },
}

impl ScalarField {
    pub fn value(&self, x: &Point) -> f64 {
        match *self {
            ScalarField::Quadratic { c, g, h } => {
                let mut v = c;
                for i in 0..3 {
                    v += g[i] * x[i];
                    for j in 0..3 {
                        v += 0.5 * h[i][j] * x[i] * x[j];
                    }
                }
                v
            }
            ScalarField::SineProduct { amp, k, phase } => {
                amp * (0..3).map(|d| (k[d] * x[d] + phase[d]).sin()).product::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: &Point) -> [f64; 3] {
        match *self {
            ScalarField::Quadratic { g, h, .. } => {
                std::array::from_fn(|i| g[i] + (0..3).map(|j| h[i][j] * x[j]).sum::<f64>())
            }
            ScalarField::SineProduct { amp, k, phase } => {
                let s: [f64; 3] = std::array::from_fn(|d| (k[d] * x[d] + phase[d]).sin());
                let c: [f64; 3] = std::array::from_fn(|d| k[d] * (k[d] * x[d] + phase[d]).cos());
                [amp * c[0] * s[1] * s[2], amp * s[0] * c[1] * s[2], amp * s[0] * s[1] * c[2]]
            }
        }
    }

    pub fn hessian(&self, x: &Point) -> [[f64; 3]; 3] {
        match *self {
            ScalarField::Quadratic { h, .. } => h,
            ScalarField::SineProduct { amp, k, phase } => {
                let s: [f64; 3] = std::array::from_fn(|d| (k[d] * x[d] + phase[d]).sin());
                let c: [f64; 3] = std::array::from_fn(|d| k[d] * (k[d] * x[d] + phase[d]).cos());
                let mut out = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        let mut v = amp;
                        for d in 0..3 {
                            v *= match (d == i, d == j) {
                                (true, true) => -k[d] * k[d] * s[d],
                                (true, false) | (false, true) => c[d],
                                (false, false) => s[d],
                            };
                        }
                        out[i][j] = v;
                    }
                }
                out
            }
        }
    }
}

/// Exact fields of a manufactured solution together with the material.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub u: [ScalarField; 3],
    pub psi: ScalarField,
    pub law: MaterialLaw,
}

pub const CASE_IDS: [&str; 2] = ["polynomial-quadratic", "trigonometric"];

/// `x * (a + b . x)`, which vanishes on `x = 0`.
fn x_times_linear(a: f64, b: [f64; 3]) -> ScalarField {
    let mut h = [[0.0; 3]; 3];
    h[0][0] = 2.0 * b[0];
    h[0][1] = b[1];
    h[1][0] = b[1];
    h[0][2] = b[2];
    h[2][0] = b[2];
    ScalarField::Quadratic { c: 0.0, g: [a, 0.0, 0.0], h }
}

fn sines(amp: f64, k: [f64; 3], phase: [f64; 3]) -> ScalarField {
    ScalarField::SineProduct { amp, k, phase }
}

pub fn make_manufactured_case(id: &str, law: &MaterialLaw) -> Result<ManufacturedCase> {
    let (name, u, psi) = match id {
        "polynomial-quadratic" => (
            CASE_IDS[0],
            [
                x_times_linear(0.3, [0.2, -0.1, 0.4]),
                x_times_linear(-0.2, [0.1, 0.3, -0.2]),
                x_times_linear(0.1, [-0.3, 0.2, 0.1]),
            ],
            x_times_linear(0.5, [-0.2, 0.1, 0.3]),
        ),
        "trigonometric" => (
            CASE_IDS[1],
            [
                sines(0.2, [0.5 * PI, 0.8, 1.1], [0.0, 0.4, 0.9]),
                sines(-0.15, [0.7 * PI, 1.2, 0.6], [0.0, 1.1, 0.3]),
                sines(0.1, [0.6 * PI, 0.9, 1.3], [0.0, 0.7, 0.5]),
            ],
            sines(0.3, [0.5 * PI, 1.0, 0.8], [0.0, 0.6, 1.2]),
        ),
        other => {
            return Err(invalid(format!(
                "unknown manufactured case '{other}' (expected one of {})",
                CASE_IDS.join(", ")
            )))
        }
    };
    Ok(ManufacturedCase { name, u, psi, law: law.clone() })
}

impl ManufacturedCase {
    pub fn displacement(&self, x: &Point) -> [f64; 3] {
        self.u.map(|f| f.value(x))
    }

    pub fn displacement_gradient(&self, x: &Point) -> [[f64; 3]; 3] {
        self.u.map(|f| f.gradient(x))
    }

    pub fn potential(&self, x: &Point) -> f64 {
        self.psi.value(x)
    }

    pub fn potential_gradient(&self, x: &Point) -> [f64; 3] {
        self.psi.gradient(x)
    }

    fn strain(&self, x: &Point) -> Vector6<f64> {
        Vector6::from(voigt_strain_of_gradient(&self.displacement_gradient(x)))
    }

    /// `C eps(u) + 1/2 e grad psi`.
    pub fn stress(&self, x: &Point) -> Vector6<f64> {
        self.law.stiffness * self.strain(x) + self.law.coupling * Vector3::from(self.potential_gradient(x)) * 0.5
    }

    /// `1/2 e^T eps(u) - mu grad psi`.
    pub fn flux_density(&self, x: &Point) -> Vector3<f64> {
        self.law.coupling.transpose() * self.strain(x) * 0.5
            - self.law.permeability * Vector3::from(self.potential_gradient(x))
    }

    /// `d eps(u) / d x_j` in Voigt form.
    fn strain_derivative(&self, x: &Point, j: usize) -> Vector6<f64> {
        let h = self.u.map(|f| f.hessian(x));
        Vector6::new(
            h[0][0][j],
            h[1][1][j],
            h[2][2][j],
            h[1][2][j] + h[2][1][j],
            h[0][2][j] + h[2][0][j],
            h[0][1][j] + h[1][0][j],
        )
    }

    fn stress_derivative(&self, x: &Point, j: usize) -> Vector6<f64> {
        let hp = self.psi.hessian(x);
        self.law.stiffness * self.strain_derivative(x, j)
            + self.law.coupling * Vector3::new(hp[0][j], hp[1][j], hp[2][j]) * 0.5
    }
}

impl SourceData for ManufacturedCase {
    fn body_force(&self, x: &Point) -> [f64; 3] {
        let d: [Vector6<f64>; 3] = std::array::from_fn(|j| self.stress_derivative(x, j));
        [
            -(d[0][0] + d[1][5] + d[2][4]),
            -(d[0][5] + d[1][1] + d[2][3]),
            -(d[0][4] + d[1][3] + d[2][2]),
        ]
    }

    fn magnetic_source(&self, x: &Point) -> f64 {
        let hp = self.psi.hessian(x);
        let mut div = 0.0;
        for j in 0..3 {
            div += 0.5 * (self.law.coupling.transpose() * self.strain_derivative(x, j))[j];
            for i in 0..3 {
                div -= self.law.permeability[(j, i)] * hp[i][j];
            }
        }
        -div
    }
}

impl NeumannData for ManufacturedCase {
    fn traction(&self, x: &Point, n: &[f64; 3]) -> [f64; 3] {
        let s = self.stress(x);
        [
            s[0] * n[0] + s[5] * n[1] + s[4] * n[2],
            s[5] * n[0] + s[1] * n[1] + s[3] * n[2],
            s[4] * n[0] + s[3] * n[1] + s[2] * n[2],
        ]
    }

    fn flux(&self, x: &Point, n: &[f64; 3]) -> f64 {
        self.flux_density(x).dot(&Vector3::from(*n))
    }
}

/// Errors of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub h: f64,
    pub l2_u: f64,
    pub h1_u: f64,
    pub l2_psi: f64,
    pub h1_psi: f64,
}

/// Error norms per level and observed rates between consecutive levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: &'static str,
    pub degree: usize,
    pub rows: Vec<ErrorRow>,
    /// Relative error of every row at the solver floor.
    pub exact_reproduction: bool,
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
pub fn observed_rate(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

/// Relative error bound below which a level counts as reproducing the exact
/// solution.
pub const EXACT_REPRODUCTION_TOL: f64 = 1e-9;

impl ConvergenceTable {
    /// Rates `[rL2_u, rH1_u, rL2_psi, rH1_psi]` between rows `i` and `i + 1`.
    pub fn rates(&self) -> Vec<[f64; 4]> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                [
                    observed_rate(a.l2_u, b.l2_u, a.h, b.h),
                    observed_rate(a.h1_u, b.h1_u, a.h, b.h),
                    observed_rate(a.l2_psi, b.l2_psi, a.h, b.h),
                    observed_rate(a.h1_psi, b.h1_psi, a.h, b.h),
                ]
            })
            .collect()
    }

    /// Expected `(L2, H1)` rates for degree `k`, with a 10% allowance below
    /// the a-priori values `k + 1` and `k`.
    pub fn rate_thresholds(degree: usize) -> (f64, f64) {
        let k = degree as f64;
        (k + 0.8, k - 0.1)
    }

    /// Every observed rate reaches its threshold (or the levels reproduce the
    /// exact solution).
    pub fn meets_thresholds(&self) -> bool {
        if self.exact_reproduction {
            return true;
        }
        let (l2, h1) = Self::rate_thresholds(self.degree);
        let rates = self.rates();
        !rates.is_empty() && rates.iter().all(|r| r[0] >= l2 && r[1] >= h1 && r[2] >= l2 && r[3] >= h1)
    }

    /// CSV with header `h,eL2_u,eH1_u,eL2_psi,eH1_psi,rL2_u,rH1_u,rL2_psi,rH1_psi`;
    /// rates on the first row are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,eL2_u,eH1_u,eL2_psi,eH1_psi,rL2_u,rH1_u,rL2_psi,rH1_psi\n");
        let rates = self.rates();
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(out, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", r.h, r.l2_u, r.h1_u, r.l2_psi, r.h1_psi);
            match i.checked_sub(1).map(|j| rates[j]) {
                Some(q) => {
                    let _ = writeln!(out, ",{:.6},{:.6},{:.6},{:.6}", q[0], q[1], q[2], q[3]);
                }
                None => out.push_str(",,,,\n"),
            }
        }
        out
    }
}

/// Errors of a discrete solution against the exact fields of `case`, using
/// a tet rule of degree `2k + 3`. Returns the row and the exact `L2` norms of
/// `(u, psi)`.
pub fn solution_errors(
    spaces: &FunctionSpacePair,
    solution: &SaddleSolution,
    case: &ManufacturedCase,
) -> Result<(ErrorRow, f64, f64)> {
    check_dimensions(spaces, solution)?;
    let u = spaces.expand_displacement(&solution.u);
    let psi = spaces.expand_potential(&solution.psi);
    let q = 2 * spaces.degree().order() + 3;
    let sq = |v: f64| v * v;
    let l2_u = integrate_fields(spaces, &u, &psi, q, |x, uh, _, _, _| {
        let ue = case.displacement(x);
        (0..3).map(|c| sq(uh[c] - ue[c])).sum()
    })?;
    let semi_u = integrate_fields(spaces, &u, &psi, q, |x, _, du, _, _| {
        let de = case.displacement_gradient(x);
        (0..3).flat_map(|c| (0..3).map(move |d| (c, d))).map(|(c, d)| sq(du[c][d] - de[c][d])).sum()
    })?;
    let l2_p = integrate_fields(spaces, &u, &psi, q, |x, _, _, p, _| sq(p - case.potential(x)))?;
    let semi_p = integrate_fields(spaces, &u, &psi, q, |x, _, _, _, dp| {
        let de = case.potential_gradient(x);
        (0..3).map(|d| sq(dp[d] - de[d])).sum()
    })?;
    let norm_u = integrate_fields(spaces, &u, &psi, q, |x, _, _, _, _| {
        case.displacement(x).iter().map(|v| v * v).sum()
    })?;
    let norm_p = integrate_fields(spaces, &u, &psi, q, |x, _, _, _, _| sq(case.potential(x)))?;
    Ok((
        ErrorRow {
            h: mesh_size(spaces.mesh()),
            l2_u: l2_u.sqrt(),
            h1_u: (l2_u + semi_u).sqrt(),
            l2_psi: l2_p.sqrt(),
            h1_psi: (l2_p + semi_p).sqrt(),
        },
        norm_u.sqrt(),
        norm_p.sqrt(),
    ))
}

/// Solves `case` on unit cubes with `n` cells per edge for every `n` in
/// `levels` (ascending). Both fields are clamped on the `x = 0` face, all
/// other faces carry the manufactured Neumann data.
pub fn run_convergence_study(case: &ManufacturedCase, degree: Degree, levels: &[usize]) -> Result<ConvergenceTable> {
    if levels.is_empty() {
        return Err(invalid("convergence study needs at least one level"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(format!("levels must be strictly ascending, got {levels:?}")));
    }
    let clamp = FaceSet::single(CubeFace::XMin);
    let options = AssemblyOptions { load_quadrature_degree: Some(2 * degree.order() + 2), ..Default::default() };
    let mut rows = Vec::with_capacity(levels.len());
    let mut exact = true;
    for &n in levels {
        let mesh = generate_unit_cube_mesh(n, clamp, clamp)?;
        let spaces = build_spaces(&mesh, degree)?;
        let system = assemble_system(&spaces, &case.law, case, Some(case), &options)?;
        let solution = solve_direct(&system)?;
        let (row, norm_u, norm_p) = solution_errors(&spaces, &solution, case)?;
        exact &= row.l2_u <= EXACT_REPRODUCTION_TOL * norm_u && row.l2_psi <= EXACT_REPRODUCTION_TOL * norm_p;
        rows.push(row);
    }
    Ok(ConvergenceTable { case: case.name, degree: degree.order(), rows, exact_reproduction: exact })
}

/// Internal energies of a discrete state, split into volume and surface parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energies {
    /// `1/2 ∫ H . B`, with `H = -grad psi`, `B = e^T eps(u) - mu grad psi`.
    pub magnetic_volume: f64,
    /// `∫ psi B~` over magnetic Neumann facets.
    pub magnetic_surface: f64,
    /// `1/2 ∫ sigma : eps(u)`, with `sigma = C eps(u) + e grad psi`.
    pub elastic_volume: f64,
    /// `∫ u . tau` over elastic Neumann facets.
    pub elastic_surface: f64,
}

impl Energies {
    pub fn w_mag(&self) -> f64 {
        self.magnetic_volume - self.magnetic_surface
    }

    pub fn w_el(&self) -> f64 {
        self.elastic_volume - self.elastic_surface
    }
}

fn check_dimensions(spaces: &FunctionSpacePair, solution: &SaddleSolution) -> Result<()> {
    if solution.u.len() != spaces.num_free_displacement() || solution.psi.len() != spaces.num_free_potential() {
        return Err(invalid(format!(
            "solution has ({}, {}) unknowns but the spaces have ({}, {})",
            solution.u.len(),
            solution.psi.len(),
            spaces.num_free_displacement(),
            spaces.num_free_potential()
        )));
    }
    Ok(())
}

/// Evaluates the magnetic and mechanical energies of `(u, psi)` from the
/// constitutive laws by element and facet quadrature.
pub fn compute_energies(
    u: &DVector<f64>,
    psi: &DVector<f64>,
    spaces: &FunctionSpacePair,
    law: &MaterialLaw,
    neumann: &dyn NeumannData,
) -> Result<Energies> {
    if u.len() != spaces.num_free_displacement() || psi.len() != spaces.num_free_potential() {
        return Err(invalid(format!(
            "fields have ({}, {}) unknowns but the spaces have ({}, {})",
            u.len(),
            psi.len(),
            spaces.num_free_displacement(),
            spaces.num_free_potential()
        )));
    }
    let un = spaces.expand_displacement(u);
    let pn = spaces.expand_potential(psi);
    let q = 2 * spaces.degree().order();
    let magnetic_volume = integrate_fields(spaces, &un, &pn, q, |_, _, du, _, dp| {
        let eps = Vector6::from(voigt_strain_of_gradient(du));
        let g = Vector3::from(*dp);
        let b = law.coupling.transpose() * eps - law.permeability * g;
        0.5 * (-g).dot(&b)
    })?;
    let elastic_volume = integrate_fields(spaces, &un, &pn, q, |_, _, du, _, dp| {
        let eps = Vector6::from(voigt_strain_of_gradient(du));
        let sigma = law.stiffness * eps + law.coupling * Vector3::from(*dp);
        0.5 * sigma.dot(&eps)
    })?;

    let degree = spaces.degree();
    let rule = TriangleRule::triangle(2 * degree.order())?;
    let mesh = spaces.mesh();
    let (mut magnetic_surface, mut elastic_surface) = (0.0, 0.0);
    for (f, facet) in mesh.facets().iter().enumerate() {
        let elastic = facet.elastic == BoundaryClass::Neumann;
        let magnetic = facet.magnetic == BoundaryClass::Neumann;
        if !elastic && !magnetic {
            continue;
        }
        let geo = TriangleGeometry::new(&mesh.facet_coords(f))?;
        let normal = spaces.facet_normal(f);
        let dofs = spaces.facet_dofs(f);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.point(l);
            let vals = triangle_values(degree, l);
            let scale = w * 2.0 * geo.area;
            if elastic {
                let tau = neumann.traction(&x, &normal);
                for (i, &s) in dofs.iter().enumerate() {
                    elastic_surface += scale * vals[i] * (0..3).map(|c| un[s][c] * tau[c]).sum::<f64>();
                }
            }
            if magnetic {
                let bt = neumann.flux(&x, &normal);
                for (i, &s) in dofs.iter().enumerate() {
                    magnetic_surface += scale * vals[i] * pn[s] * bt;
                }
            }
        }
    }
    Ok(Energies { magnetic_volume, magnetic_surface, elastic_volume, elastic_surface })
}
