//! Linear piezomagnetic constitutive law in Voigt form and its algebraic
//! diagnostics.
//!
//! Voigt ordering is `[11, 22, 33, 23, 13, 12]` with engineering shear
//! strains (`gamma_ij = 2 eps_ij`). Stress and flux density read
//!
//! ```text
//! sigma = C^H eps(u) + e grad(psi)
//! B     = e^T eps(u) - mu grad(psi)
//! ```
//!
//! with `C^H` the 6x6 stiffness at constant field (Pa), `e` the 6x3
//! magneto-elastic coupling (T) and `mu` the 3x3 permeability at constant
//! strain (H/m).

use nalgebra::{Matrix3, Matrix6, SMatrix};

use crate::error::{invalid, Error, Result};
use crate::report::ValidationReport;

pub type Matrix6x3 = SMatrix<f64, 6, 3>;

const FOUR_OVER_SQRT2: f64 = 4.0 / std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLaw {
    pub stiffness: Matrix6<f64>,
    pub coupling: Matrix6x3,
    pub permeability: Matrix3<f64>,
}

impl MaterialLaw {
    /// Builds a law and rejects it unless [`validate_material`] passes its
    /// symmetry, definiteness and finiteness checks. Minimal positivity of the
    /// coupling is *not* required here.
    pub fn new(
        stiffness: Matrix6<f64>,
        coupling: Matrix6x3,
        permeability: Matrix3<f64>,
    ) -> Result<Self> {
        let law = Self { stiffness, coupling, permeability };
        let report = validate_material(&law);
        if let Some(c) = report
            .checks
            .iter()
            .find(|c| !c.passed && c.name != "coupling minimal positivity")
        {
            return Err(Error::Validation(format!("material check '{}' failed", c.name)));
        }
        Ok(law)
    }

    /// Isotropic law with unit-magnitude defaults used throughout the tests:
    /// Lamé pair `(lambda, mu_shear)`, coupling `e`, isotropic permeability.
    pub fn isotropic(lambda: f64, shear: f64, coupling: Matrix6x3, permeability: f64) -> Result<Self> {
        Self::new(
            isotropic_stiffness(lambda, shear),
            coupling,
            Matrix3::from_diagonal_element(permeability),
        )
    }

    /// Same law with the coupling multiplied by `factor`.
    pub fn with_coupling_scaled(&self, factor: f64) -> Self {
        Self { coupling: self.coupling * factor, ..self.clone() }
    }
}

/// Voigt stiffness of an isotropic solid from its Lamé parameters.
///
/// `C = lambda * (1 1 1 0 0 0)^T (1 1 1 0 0 0) + mu * diag(2, 2, 2, 1, 1, 1)`
pub fn isotropic_stiffness(lambda: f64, shear: f64) -> Matrix6<f64> {
    let mut c = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            c[(i, j)] = lambda;
        }
        c[(i, i)] += 2.0 * shear;
        c[(i + 3, i + 3)] = shear;
    }
    c
}

/// Minimal positivity diagnostics of a 6x3 coupling matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalPositivityReport {
    /// `A_hat[k-1]` holds `Â_k`, `k = 1..6`.
    pub a_hat: [f64; 6],
    /// Smallest of the six values.
    pub m: f64,
    pub satisfied: bool,
}

/// 1-based `(row, column)` entries whose half-sum forms each `Â_k`.
const MINIMAL_POSITIVITY_TERMS: [&[(usize, usize)]; 6] = [
    &[(1, 1), (5, 1), (6, 1)],
    &[(2, 2), (4, 2), (6, 2)],
    &[(3, 3), (4, 3), (5, 3)],
    &[(1, 2), (2, 1), (4, 1), (5, 2), (6, 1), (6, 2)],
    &[(1, 3), (3, 1), (4, 1), (5, 1), (5, 3), (6, 3)],
    &[(2, 3), (3, 2), (4, 2), (4, 3), (5, 2), (6, 3)],
];

pub fn check_minimal_positivity(coupling: &Matrix6x3) -> Result<MinimalPositivityReport> {
    if coupling.iter().any(|x| !x.is_finite()) {
        return Err(invalid("coupling matrix has non-finite entries"));
    }
    let a_hat = MINIMAL_POSITIVITY_TERMS.map(|terms| {
        0.5 * terms.iter().map(|&(i, j)| coupling[(i - 1, j - 1)]).sum::<f64>()
    });
    let m = a_hat.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MinimalPositivityReport { a_hat, m, satisfied: m > 0.0 })
}

fn require_diagonal(permeability: &Matrix3<f64>) -> Result<[f64; 3]> {
    let diag = [permeability[(0, 0)], permeability[(1, 1)], permeability[(2, 2)]];
    let scale = diag.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
    for i in 0..3 {
        for j in 0..3 {
            if i != j && permeability[(i, j)].abs() > 1e-14 * scale {
                return Err(Error::UnsupportedMaterial(
                    "closed-form constants need a diagonal permeability".into(),
                ));
            }
        }
    }
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(invalid("permeability diagonal must be positive"));
    }
    Ok(diag)
}

/// Continuity constant of the magnetic form: `(4/sqrt 2) * max_i mu_ii`.
pub fn b_continuity_constant(permeability: &Matrix3<f64>) -> Result<f64> {
    let d = require_diagonal(permeability)?;
    Ok(FOUR_OVER_SQRT2 * d[0].max(d[1]).max(d[2]))
}

/// Coercivity constant of the magnetic form, `min_i mu_ii / (s^2 + 1)`, for
/// a domain inside a cube of side `s`.
pub fn b_coercivity_constant(permeability: &Matrix3<f64>, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(invalid(format!("cube side must be positive, got {s}")));
    }
    let d = require_diagonal(permeability)?;
    Ok(d[0].min(d[1]).min(d[2]) / (s * s + 1.0))
}

fn symmetric(x: &[f64], n: usize) -> bool {
    let norm = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    (0..n).all(|i| (0..n).all(|j| (x[i * n + j] - x[j * n + i]).abs() <= 1e-12 * norm))
}

/// Symmetry, definiteness and finiteness of the tensors plus the minimal
/// positivity verdict for the coupling.
pub fn validate_material(law: &MaterialLaw) -> ValidationReport {
    let mut report = ValidationReport::default();
    let finite = law.stiffness.iter().all(|x| x.is_finite())
        && law.coupling.iter().all(|x| x.is_finite())
        && law.permeability.iter().all(|x| x.is_finite());
    report.push_flag("finite entries", finite, "");

    let c: Vec<f64> = law.stiffness.transpose().iter().copied().collect();
    report.push_flag("stiffness symmetric", symmetric(&c, 6), "");
    let c_spd = finite && law.stiffness.symmetric_part().cholesky().is_some();
    report.push_flag("stiffness positive definite", c_spd, "");

    let mu: Vec<f64> = law.permeability.transpose().iter().copied().collect();
    report.push_flag("permeability symmetric", symmetric(&mu, 3), "");
    let mu_spd = finite && law.permeability.symmetric_part().cholesky().is_some();
    report.push_flag("permeability positive definite", mu_spd, "");

    match check_minimal_positivity(&law.coupling) {
        Ok(mp) => report.push_flag(
            "coupling minimal positivity",
            mp.satisfied,
            format!("M = {}", mp.m),
        ),
        Err(e) => report.push_flag("coupling minimal positivity", false, e.to_string()),
    }
    report
}
