//! Numerical estimates of the stability constants of the coupled problem.
//!
//! Every constant is the smallest eigenvalue of a generalized symmetric
//! eigenproblem `K q = λ X q` with `X` an SPD Gram matrix. The problem is
//! reduced densely: `X = L L^T`, then `λ_min(L^{-1} K L^{-T})`. All norms are
//! the standard squared-sum `H^1` norms.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::assembly::{assemble_grams, assemble_system, build_spaces, AssemblyOptions, BlockSystem, GramMatrices};
use crate::error::{invalid, Error, Result};
use crate::fem::{ConstantNeumann, Degree};
use crate::material::{b_coercivity_constant, check_minimal_positivity, MaterialLaw};
use crate::mesh::{bounding_cube_side, Mesh};
use crate::sparse::CsrMatrix;

/// Largest dense dimension the estimators accept.
pub const DENSE_SIZE_LIMIT: usize = 5000;

fn check_size(n: usize) -> Result<()> {
    if n > DENSE_SIZE_LIMIT {
        Err(Error::SizeLimit { size: n, limit: DENSE_SIZE_LIMIT })
    } else {
        Ok(())
    }
}

fn dense_cholesky(x: &CsrMatrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    check_size(x.nrows())?;
    x.to_dense()
        .cholesky()
        .ok_or_else(|| Error::SingularSystem(format!("{what} Gram matrix is not positive definite")))
}

/// `L^{-1} K L^{-T}` for `X = L L^T`, symmetrized.
fn whiten(k: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    let l = chol.l_dirty();
    let mut y = k.clone();
    l.solve_lower_triangular_mut(&mut y);
    let mut z = y.transpose();
    l.solve_lower_triangular_mut(&mut z);
    (&z + z.transpose()) * 0.5
}

fn smallest_eigenvalue(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Smallest generalized eigenvalue of `K q = λ X q`.
pub fn generalized_min_eigenvalue(k: &CsrMatrix, x: &CsrMatrix) -> Result<f64> {
    if k.nrows() != x.nrows() || k.ncols() != x.ncols() || k.nrows() != k.ncols() {
        return Err(invalid("eigenproblem matrices must be square and of equal size"));
    }
    let chol = dense_cholesky(x, "norm")?;
    Ok(smallest_eigenvalue(whiten(&k.to_dense(), &chol)))
}

/// Discrete inf-sup constant of `c` in the `X_V`/`X_M` norms:
/// `sqrt(λ_min(C^T X_V^{-1} C, X_M))`, clamped at zero.
pub fn estimate_inf_sup(c: &CsrMatrix, x_v: &CsrMatrix, x_m: &CsrMatrix) -> Result<f64> {
    if c.nrows() != x_v.nrows() || c.ncols() != x_m.nrows() {
        return Err(invalid(format!(
            "coupling is {}x{} but Gram matrices are {} and {}",
            c.nrows(),
            c.ncols(),
            x_v.nrows(),
            x_m.nrows()
        )));
    }
    check_size(c.ncols())?;
    let chol_v = dense_cholesky(x_v, "displacement")?;
    let chol_m = dense_cholesky(x_m, "potential")?;
    let mut y = c.to_dense();
    chol_v.l_dirty().solve_lower_triangular_mut(&mut y);
    let g = y.transpose() * y;
    Ok(smallest_eigenvalue(whiten(&g, &chol_m)).max(0.0).sqrt())
}

/// `λ_min(K, X)`: `α_h` for `(A, X_V)`, `γ_h` for `(B, X_M)`.
pub fn estimate_coercivity(k: &CsrMatrix, x: &CsrMatrix) -> Result<f64> {
    generalized_min_eigenvalue(k, x)
}

/// `C' = λ_min(S_V + E_V, X_V)`. Needs a clamped displacement boundary.
pub fn estimate_korn_constant(grams: &GramMatrices) -> Result<f64> {
    if !grams.elastic_constrained {
        return Err(Error::AssumptionViolation(
            "Korn constant needs a non-empty elastic Dirichlet boundary".into(),
        ));
    }
    let sum: Vec<_> = grams.s_v.triplets().chain(grams.e_v.triplets()).collect();
    let k = CsrMatrix::from_triplets(grams.s_v.nrows(), grams.s_v.ncols(), sum);
    generalized_min_eigenvalue(&k, &grams.x_v)
}

/// Closed-form inf-sup lower bound `sqrt(3) M C' / (4 sqrt(s^2 + 1))`.
pub fn theoretical_beta(m: f64, c_prime: f64, s: f64) -> Result<f64> {
    for (name, v) in [("M", m), ("C'", c_prime), ("s", s)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(3f64.sqrt() * m * c_prime / (4.0 * (s * s + 1.0).sqrt()))
}

/// Longest tetrahedron edge.
pub fn mesh_size(mesh: &Mesh) -> f64 {
    let mut h = 0.0_f64;
    for t in 0..mesh.num_tets() {
        let x = mesh.tet_coords(t);
        for i in 0..4 {
            for j in i + 1..4 {
                let d: f64 = (0..3).map(|k| (x[i][k] - x[j][k]).powi(2)).sum();
                h = h.max(d.sqrt());
            }
        }
    }
    h
}

/// Stability constants of one discretization level.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub h: f64,
    pub degree: usize,
    /// Minimal-positivity value of the coupling.
    pub m: f64,
    /// Side of the bounding cube.
    pub s: f64,
    pub c_prime: f64,
    pub alpha_h: f64,
    pub gamma_h: f64,
    /// `min mu_ii / (s^2 + 1)`; `None` for non-diagonal permeability.
    pub gamma_formula: Option<f64>,
    pub beta_h: f64,
    /// `None` when `M <= 0`.
    pub beta_theory: Option<f64>,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    /// Flat `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.12e}"));
        let mut out = String::new();
        out += &format!("h = {:.12e}\n", self.h);
        out += &format!("degree = {}\n", self.degree);
        out += &format!("M = {:.12e}\n", self.m);
        out += &format!("s = {:.12e}\n", self.s);
        out += &format!("C_prime = {:.12e}\n", self.c_prime);
        out += &format!("alpha_h = {:.12e}\n", self.alpha_h);
        out += &format!("gamma_h = {:.12e}\n", self.gamma_h);
        out += &format!("gamma_formula = {}\n", opt(self.gamma_formula));
        out += &format!("beta_h = {:.12e}\n", self.beta_h);
        out += &format!("beta_theory = {}\n", opt(self.beta_theory));
        for (i, note) in self.notes.iter().enumerate() {
            out += &format!("note.{i} = {note}\n");
        }
        out
    }
}

/// All constants for `law` on `mesh` with degree `degree`.
pub fn analyze(mesh: &Mesh, degree: Degree, law: &MaterialLaw) -> Result<AnalysisReport> {
    let spaces = build_spaces(mesh, degree)?;
    let system = assemble_system(&spaces, law, &ConstantNeumann::default(), None, &AssemblyOptions::default())?;
    let grams = assemble_grams(&spaces)?;
    analyze_assembled(mesh, degree, law, &system, &grams)
}

pub fn analyze_assembled(
    mesh: &Mesh,
    degree: Degree,
    law: &MaterialLaw,
    system: &BlockSystem,
    grams: &GramMatrices,
) -> Result<AnalysisReport> {
    let m = check_minimal_positivity(&law.coupling)?.m;
    let s = bounding_cube_side(mesh)?;
    let c_prime = estimate_korn_constant(grams)?;
    let alpha_h = estimate_coercivity(&system.a, &grams.x_v)?;
    let gamma_h = estimate_coercivity(&system.b, &grams.x_m)?;
    let beta_h = estimate_inf_sup(&system.c, &grams.x_v, &grams.x_m)?;
    let mut notes = vec!["norms: standard H1, |v|^2 = |v|_0^2 + |grad v|_0^2".to_string()];
    let gamma_formula = match b_coercivity_constant(&law.permeability, s) {
        Ok(g) => Some(g),
        Err(Error::UnsupportedMaterial(msg)) => {
            notes.push(format!("gamma_formula: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let beta_theory = if m > 0.0 && c_prime > 0.0 {
        Some(theoretical_beta(m, c_prime, s)?)
    } else {
        notes.push("beta_theory: undefined without minimal positivity".into());
        None
    };
    notes.push("beta_theory: diagnostic only, not asserted as a bound on beta_h".into());
    Ok(AnalysisReport {
        h: mesh_size(mesh),
        degree: degree.order(),
        m,
        s,
        c_prime,
        alpha_h,
        gamma_h,
        gamma_formula,
        beta_h,
        beta_theory,
        notes,
    })
}

/// `beta_h` across a mesh family.
#[derive(Debug, Clone, PartialEq)]
pub struct InfSupStudy {
    pub levels: Vec<AnalysisReport>,
    /// `(max - min) / max` of `beta_h`; 0 when every value vanishes.
    pub spread: f64,
    /// Every `beta_h` is zero: the coupling does not act.
    pub coupling_absent: bool,
}

impl InfSupStudy {
    pub fn min_beta(&self) -> f64 {
        self.levels.iter().map(|r| r.beta_h).fold(f64::INFINITY, f64::min)
    }

    /// Spread at most `max_spread` and every `beta_h` positive.
    pub fn passes(&self, max_spread: f64) -> bool {
        !self.coupling_absent && self.min_beta() > 0.0 && self.spread <= max_spread
    }

    /// CSV with columns `h,beta_h,alpha_h,gamma_h,beta_theory,C_prime,M,s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,beta_h,alpha_h,gamma_h,beta_theory,C_prime,M,s\n");
        for r in &self.levels {
            out += &format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.h,
                r.beta_h,
                r.alpha_h,
                r.gamma_h,
                r.beta_theory.unwrap_or(f64::NAN),
                r.c_prime,
                r.m,
                r.s
            );
        }
        out
    }
}

/// Relative spread `(max - min) / max`.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

pub fn infsup_refinement_study(meshes: &[Mesh], degree: Degree, law: &MaterialLaw) -> Result<InfSupStudy> {
    if meshes.is_empty() {
        return Err(invalid("refinement study needs at least one mesh"));
    }
    let levels = meshes.iter().map(|m| analyze(m, degree, law)).collect::<Result<Vec<_>>>()?;
    let betas: Vec<f64> = levels.iter().map(|r| r.beta_h).collect();
    Ok(InfSupStudy {
        spread: relative_spread(&betas),
        coupling_absent: betas.iter().all(|&b| b == 0.0),
        levels,
    })
}

/// Outcome of the test choice `v = (psi, psi, psi)` for one potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubstitutionSample {
    /// `c(v, psi) = v^T C psi`.
    pub coupling: f64,
    /// `M/4 * psi^T S_M psi`.
    pub bound: f64,
}

impl SubstitutionSample {
    pub fn holds(&self, tol: f64) -> bool {
        self.coupling >= self.bound - tol
    }
}

/// Evaluates `c((psi, psi, psi), psi)` against `M/4 |psi|_1^2`.
pub fn substitution_sample(
    spaces: &crate::assembly::FunctionSpacePair,
    c: &CsrMatrix,
    s_m: &CsrMatrix,
    m: f64,
    psi: &nalgebra::DVector<f64>,
) -> Result<SubstitutionSample> {
    let v = spaces.stack_potential(psi)?;
    Ok(SubstitutionSample {
        coupling: v.dot(&c.mul_vec(psi)),
        bound: 0.25 * m * psi.dot(&s_m.mul_vec(psi)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::Matrix6x3;
    use crate::mesh::{generate_unit_cube_mesh, CubeFace, FaceSet};

    fn cube(n: usize) -> Mesh {
        let x0 = FaceSet::single(CubeFace::XMin);
        generate_unit_cube_mesh(n, x0, x0).unwrap()
    }

    fn law(coupling: f64) -> MaterialLaw {
        MaterialLaw::isotropic(1.0, 1.0, Matrix6x3::from_element(coupling), 1.0).unwrap()
    }

    /// Normal strains coupled to matching gradient components, shears to all.
    fn full_rank_coupling() -> Matrix6x3 {
        let mut e = Matrix6x3::from_element(1.0);
        e.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
        e
    }

    #[test]
    fn theoretical_beta_values() {
        let b = theoretical_beta(1.0, 1.0, 1.0).unwrap();
        assert!((b - 3f64.sqrt() / (4.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!((b - 0.30619).abs() < 1e-5);
        assert!((theoretical_beta(2.0, 1.0, 1.0).unwrap() - 2.0 * b).abs() < 1e-15);
        let mut last = b;
        for s in [2.0, 4.0, 8.0, 1e3] {
            let next = theoretical_beta(1.0, 1.0, s).unwrap();
            assert!(next < last);
            last = next;
        }
        assert!(theoretical_beta(0.0, 1.0, 1.0).is_err());
        assert!(theoretical_beta(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn zero_coupling_gives_zero_beta() {
        let study = infsup_refinement_study(&[cube(1), cube(2)], Degree::P1, &law(0.0)).unwrap();
        assert!(study.coupling_absent);
        assert!(study.levels.iter().all(|r| r.beta_h == 0.0));
        assert!(!study.passes(0.2));
    }

    #[test]
    fn beta_scales_with_coupling() {
        let base = MaterialLaw::isotropic(1.0, 1.0, full_rank_coupling(), 1.0).unwrap();
        let b1 = analyze(&cube(2), Degree::P1, &base).unwrap().beta_h;
        let b3 = analyze(&cube(2), Degree::P1, &base.with_coupling_scaled(3.0)).unwrap().beta_h;
        assert!(b1 > 0.0);
        assert!((b3 - 3.0 * b1).abs() <= 1e-10 * b3);
    }

    #[test]
    fn all_ones_coupling_has_a_kernel_on_kuhn_meshes() {
        // Every tet contains its cell's (1,1,1) diagonal, and all-ones coupling
        // only sees the derivative along that diagonal.
        let r = analyze(&cube(2), Degree::P1, &law(1.0)).unwrap();
        assert_eq!(r.m, 1.5);
        assert!(r.beta_h < 1e-7);
    }

    #[test]
    fn gamma_respects_formula_and_scales() {
        let r = analyze(&cube(2), Degree::P1, &law(1.0)).unwrap();
        assert!(r.gamma_h >= r.gamma_formula.unwrap() - 1e-9);
        let doubled = MaterialLaw::isotropic(1.0, 1.0, Matrix6x3::from_element(1.0), 2.0).unwrap();
        let r2 = analyze(&cube(2), Degree::P1, &doubled).unwrap();
        assert!((r2.gamma_h - 2.0 * r.gamma_h).abs() < 1e-12);
    }

    #[test]
    fn korn_needs_clamping() {
        let spaces = build_spaces(&cube(2), Degree::P1).unwrap().without_elastic_dirichlet();
        let grams = assemble_grams(&spaces).unwrap();
        assert!(matches!(estimate_korn_constant(&grams), Err(Error::AssumptionViolation(_))));
        let sys = assemble_system(&spaces, &law(1.0), &ConstantNeumann::default(), None, &AssemblyOptions::default())
            .unwrap();
        assert!(estimate_coercivity(&sys.a, &grams.x_v).unwrap().abs() < 1e-8);
    }

    #[test]
    fn size_limit() {
        let big = CsrMatrix::zeros(DENSE_SIZE_LIMIT + 1, DENSE_SIZE_LIMIT + 1);
        assert!(matches!(generalized_min_eigenvalue(&big, &big), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn spread_definition() {
        assert_eq!(relative_spread(&[1.0, 0.8, 0.9]), 0.19999999999999996);
        assert_eq!(relative_spread(&[0.0, 0.0]), 0.0);
    }
}
