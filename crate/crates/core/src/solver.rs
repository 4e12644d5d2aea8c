//! Solvers for the symmetric indefinite block system.
//!
//! Three interchangeable strategies: a sparse LDL^T factorization of the full
//! matrix, elimination of the potential through the SPD Schur complement
//! `A + C (t^2 B)^{-1} C^T`, and MINRES preconditioned by `diag(A, t^2 B)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{residual, BlockSystem};
use crate::error::{invalid, Error, Result};
use crate::sparse::{CsrMatrix, LdlFactor};

/// Largest displacement block the dense Schur path accepts.
pub const SCHUR_SIZE_LIMIT: usize = 6000;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub u: DVector<f64>,
    pub psi: DVector<f64>,
    /// Krylov iterations; 0 for factorization-based solves.
    pub iterations: usize,
    /// `|A u + C psi - l|`.
    pub residual_u: f64,
    /// `|C^T u - t^2 B psi - m|`.
    pub residual_psi: f64,
    /// Final preconditioned residual relative to the preconditioned load norm
    /// (iterative solves only, 0 otherwise).
    pub preconditioned_residual: f64,
}

impl SaddleSolution {
    fn new(system: &BlockSystem, u: DVector<f64>, psi: DVector<f64>, iterations: usize, prec: f64) -> Self {
        let (residual_u, residual_psi) = residual(system, &u, &psi).expect("solver output has system dimensions");
        Self { u, psi, iterations, residual_u, residual_psi, preconditioned_residual: prec }
    }

    /// Both fields stacked as `[u; psi]`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.u.len() + self.psi.len());
        x.rows_mut(0, self.u.len()).copy_from(&self.u);
        x.rows_mut(self.u.len(), self.psi.len()).copy_from(&self.psi);
        x
    }
}

/// `|a - b| / max(|a|, |b|)`, or 0 when both vanish.
pub fn relative_difference(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// LDL^T of the full matrix `[[A, C], [C^T, -t^2 B]]`.
///
/// The matrix is quasi-definite when `A` and `B` are SPD, so the factorization
/// exists for every symmetric ordering and needs no pivoting.
pub fn solve_direct(system: &BlockSystem) -> Result<SaddleSolution> {
    let k = system.full_matrix();
    let factor = LdlFactor::factor(&k)?;
    let x = factor.solve(&system.rhs());
    let (u, psi) = system.split(&x);
    Ok(SaddleSolution::new(system, u, psi, 0, 0.0))
}

fn penalised_b(system: &BlockSystem) -> CsrMatrix {
    system.b.scaled(system.penalty)
}

/// Dense `A + C (t^2 B)^{-1} C^T` together with the factor of `t^2 B`.
fn schur_parts(system: &BlockSystem) -> Result<(DMatrix<f64>, LdlFactor)> {
    let nu = system.num_displacement();
    if nu > SCHUR_SIZE_LIMIT {
        return Err(Error::SizeLimit { size: nu, limit: SCHUR_SIZE_LIMIT });
    }
    let b_factor = LdlFactor::cholesky(&penalised_b(system))
        .map_err(|e| Error::SingularSystem(format!("magnetic block is not SPD: {e}")))?;
    let mut s = system.a.to_dense();
    // Column j of C^T is row j of C.
    let mut col = DVector::zeros(system.num_potential());
    for j in 0..nu {
        col.fill(0.0);
        for (i, v) in system.c.row(j) {
            col[i] = v;
        }
        let y = b_factor.solve(&col);
        let cy = system.c.mul_vec(&y);
        for i in 0..nu {
            s[(i, j)] += cy[i];
        }
    }
    // Restore exact symmetry lost to rounding in the solves.
    let s = (&s + s.transpose()) * 0.5;
    Ok((s, b_factor))
}

/// The dense Schur complement `A + C (t^2 B)^{-1} C^T`.
pub fn schur_complement(system: &BlockSystem) -> Result<DMatrix<f64>> {
    Ok(schur_parts(system)?.0)
}

/// Whether the Schur complement admits a Cholesky factorization.
pub fn schur_is_spd(system: &BlockSystem) -> Result<bool> {
    Ok(schur_complement(system)?.cholesky().is_some())
}

/// Eliminates the potential: `(A + C (t^2 B)^{-1} C^T) u = l + C (t^2 B)^{-1} m`,
/// then `psi = (t^2 B)^{-1} (C^T u - m)`.
pub fn solve_schur(system: &BlockSystem) -> Result<SaddleSolution> {
    let (s, b_factor) = schur_parts(system)?;
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::SingularSystem("Schur complement is not positive definite".into()))?;
    let rhs = &system.l + system.c.mul_vec(&b_factor.solve(&system.m));
    let u = chol.solve(&rhs);
    let psi = b_factor.solve(&(system.c.transpose().mul_vec(&u) - &system.m));
    Ok(SaddleSolution::new(system, u, psi, 0, 0.0))
}

/// MINRES on the full system from a zero initial guess.
pub fn solve_iterative(system: &BlockSystem, tol: f64, max_iterations: usize) -> Result<SaddleSolution> {
    let x0 = DVector::zeros(system.num_displacement() + system.num_potential());
    solve_iterative_from(system, &x0, tol, max_iterations)
}

/// Preconditioned MINRES starting from `x0 = [u0; psi0]`.
///
/// Stops when the preconditioned residual `|r|_{P^{-1}}` drops below
/// `tol * |b|_{P^{-1}}`, with `P = diag(A, t^2 B)` applied through exact
/// Cholesky factors.
pub fn solve_iterative_from(
    system: &BlockSystem,
    x0: &DVector<f64>,
    tol: f64,
    max_iterations: usize,
) -> Result<SaddleSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(invalid(format!("solver tolerance must be positive, got {tol}")));
    }
    let nu = system.num_displacement();
    let n = nu + system.num_potential();
    if x0.len() != n {
        return Err(invalid(format!("initial guess has length {}, expected {n}", x0.len())));
    }
    let a_factor = LdlFactor::cholesky(&system.a)
        .map_err(|e| Error::SingularSystem(format!("elastic block is not SPD: {e}")))?;
    let b_factor = LdlFactor::cholesky(&penalised_b(system))
        .map_err(|e| Error::SingularSystem(format!("magnetic block is not SPD: {e}")))?;
    let precondition = |r: &DVector<f64>| -> DVector<f64> {
        let mut z = DVector::zeros(n);
        z.rows_mut(0, nu).copy_from(&a_factor.solve(&r.rows(0, nu).into_owned()));
        z.rows_mut(nu, n - nu).copy_from(&b_factor.solve(&r.rows(nu, n - nu).into_owned()));
        z
    };
    let k = system.full_matrix();
    let b = system.rhs();
    let reference = b.dot(&precondition(&b)).max(0.0).sqrt();
    let threshold = tol * reference;

    let mut x = x0.clone();
    let mut r1 = &b - k.mul_vec(&x);
    let mut y = precondition(&r1);
    let beta1 = r1.dot(&y);
    if beta1 < 0.0 {
        return Err(Error::SingularSystem("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1.sqrt();
    let finish = |x: DVector<f64>, iterations: usize, phibar: f64| {
        let (u, psi) = system.split(&x);
        let rel = if reference > 0.0 { phibar / reference } else { phibar };
        SaddleSolution::new(system, u, psi, iterations, rel)
    };
    if beta1 <= threshold || beta1 == 0.0 {
        return Ok(finish(x, 0, beta1));
    }

    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0, 0.0);
    let mut w = DVector::zeros(n);
    let mut w2 = DVector::zeros(n);

    for itn in 1..=max_iterations {
        let v = &y / beta;
        y = k.mul_vec(&v);
        if itn >= 2 {
            y.axpy(-beta / oldb, &r1, 1.0);
        }
        let alfa = v.dot(&y);
        y.axpy(-alfa / beta, &r2, 1.0);
        r1 = std::mem::replace(&mut r2, y);
        y = precondition(&r2);
        oldb = beta;
        let bb = r2.dot(&y);
        if bb < 0.0 {
            return Err(Error::SingularSystem("preconditioner is not positive definite".into()));
        }
        beta = bb.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w);
        w = (v - &w1 * oldeps - &w2 * delta) / gamma;
        x.axpy(phi, &w, 1.0);

        if phibar <= threshold || beta == 0.0 {
            return Ok(finish(x, itn, phibar));
        }
    }
    let rel = if reference > 0.0 { phibar / reference } else { phibar };
    Err(Error::NoConvergence { iterations: max_iterations, residual: rel })
}

/// Solver strategy selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Direct,
    Schur,
    Minres,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::Schur => "schur",
            SolverKind::Minres => "minres",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(SolverKind::Direct),
            "schur" => Ok(SolverKind::Schur),
            "minres" | "iterative" => Ok(SolverKind::Minres),
            other => Err(invalid(format!("unknown solver type '{other}' (direct, schur, minres)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { kind: SolverKind::Direct, tol: 1e-10, max_iterations: 1000 }
    }
}

pub fn solve(system: &BlockSystem, options: &SolverOptions) -> Result<SaddleSolution> {
    match options.kind {
        SolverKind::Direct => solve_direct(system),
        SolverKind::Schur => solve_schur(system),
        SolverKind::Minres => solve_iterative(system, options.tol, options.max_iterations),
    }
}
