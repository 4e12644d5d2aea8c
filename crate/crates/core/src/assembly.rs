//! Global DOF numbering, sparse assembly of the coupled block system and of
//! the norm Gram matrices.
//!
//! Displacement and potential live in Lagrange spaces of the same degree on
//! the same mesh. Scalar DOFs are numbered mesh nodes first, then (for P2)
//! edges in lexicographic order of their sorted vertex pairs. Homogeneous
//! Dirichlet DOFs are removed symmetrically, so every assembled matrix acts
//! on free DOFs only. Free displacement DOFs are interleaved by component:
//! free scalar DOF `f` owns vector DOFs `3f, 3f+1, 3f+2`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fem::{
    element_coupling, element_elastic, element_magnetic, element_neumann_loads_with, element_scalar_grams,
    element_source_loads_with, element_strain_gram, Degree, NeumannData, ReferenceElement, SourceData,
    TetGeometry, TET_EDGES, TRI_EDGES,
};
use crate::material::MaterialLaw;
use crate::mesh::{BoundaryClass, Mesh, Point};
use crate::sparse::CsrMatrix;

/// Equal-degree displacement/potential spaces on one mesh.
#[derive(Debug, Clone)]
pub struct FunctionSpacePair {
    mesh: Mesh,
    degree: Degree,
    num_scalar: usize,
    tet_dofs: Vec<usize>,
    facet_dofs: Vec<usize>,
    facet_normals: Vec<[f64; 3]>,
    dof_points: Vec<Point>,
    elastic_fixed: Vec<bool>,
    magnetic_fixed: Vec<bool>,
    elastic_free: Vec<Option<usize>>,
    magnetic_free: Vec<Option<usize>>,
    num_elastic_free: usize,
    num_magnetic_free: usize,
}

fn free_numbering(fixed: &[bool]) -> (Vec<Option<usize>>, usize) {
    let mut next = 0;
    let map = fixed
        .iter()
        .map(|&f| {
            (!f).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    (map, next)
}

/// Builds the DOF maps of `S_k^3 x S_k` on `mesh` with Dirichlet masks taken
/// from the facet classes.
pub fn build_spaces(mesh: &Mesh, degree: Degree) -> Result<FunctionSpacePair> {
    let nn = mesh.num_nodes();
    let owners = mesh.facet_owners()?;

    let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    if degree == Degree::P2 {
        for tet in mesh.tets() {
            for [a, b] in TET_EDGES {
                let (p, q) = (tet[a].min(tet[b]), tet[a].max(tet[b]));
                edge_index.insert((p, q), 0);
            }
        }
        for (k, v) in edge_index.values_mut().enumerate() {
            *v = nn + k;
        }
    }
    let edge_dof = |p: usize, q: usize| edge_index[&(p.min(q), p.max(q))];

    let mut dof_points = mesh.nodes().to_vec();
    for &(p, q) in edge_index.keys() {
        let (a, b) = (mesh.nodes()[p], mesh.nodes()[q]);
        dof_points.push(std::array::from_fn(|d| 0.5 * (a[d] + b[d])));
    }
    let num_scalar = dof_points.len();

    let mut tet_dofs = Vec::with_capacity(mesh.num_tets() * degree.tet_dofs());
    for tet in mesh.tets() {
        tet_dofs.extend_from_slice(tet);
        if degree == Degree::P2 {
            tet_dofs.extend(TET_EDGES.iter().map(|&[a, b]| edge_dof(tet[a], tet[b])));
        }
    }
    let mut facet_dofs = Vec::with_capacity(mesh.facets().len() * degree.facet_dofs());
    for f in mesh.facets() {
        facet_dofs.extend_from_slice(&f.nodes);
        if degree == Degree::P2 {
            facet_dofs.extend(TRI_EDGES.iter().map(|&[a, b]| edge_dof(f.nodes[a], f.nodes[b])));
        }
    }
    let facet_normals = (0..mesh.facets().len()).map(|f| mesh.facet_normal(f, owners[f])).collect();

    let nf = degree.facet_dofs();
    let mut elastic_fixed = vec![false; num_scalar];
    let mut magnetic_fixed = vec![false; num_scalar];
    for (k, f) in mesh.facets().iter().enumerate() {
        for &dof in &facet_dofs[k * nf..(k + 1) * nf] {
            if f.elastic == BoundaryClass::Dirichlet {
                elastic_fixed[dof] = true;
            }
            if f.magnetic == BoundaryClass::Dirichlet {
                magnetic_fixed[dof] = true;
            }
        }
    }
    let (elastic_free, num_elastic_free) = free_numbering(&elastic_fixed);
    let (magnetic_free, num_magnetic_free) = free_numbering(&magnetic_fixed);

    Ok(FunctionSpacePair {
        mesh: mesh.clone(),
        degree,
        num_scalar,
        tet_dofs,
        facet_dofs,
        facet_normals,
        dof_points,
        elastic_fixed,
        magnetic_fixed,
        elastic_free,
        magnetic_free,
        num_elastic_free,
        num_magnetic_free,
    })
}

impl FunctionSpacePair {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    /// Scalar DOF count `m_s` (constrained DOFs included).
    pub fn num_scalar_dofs(&self) -> usize {
        self.num_scalar
    }

    /// Vector DOF count `n_v = 3 m_s`.
    pub fn num_vector_dofs(&self) -> usize {
        3 * self.num_scalar
    }

    pub fn num_free_displacement(&self) -> usize {
        3 * self.num_elastic_free
    }

    pub fn num_free_potential(&self) -> usize {
        self.num_magnetic_free
    }

    pub fn elastic_mask(&self) -> &[bool] {
        &self.elastic_fixed
    }

    pub fn magnetic_mask(&self) -> &[bool] {
        &self.magnetic_fixed
    }

    pub fn has_elastic_dirichlet(&self) -> bool {
        self.elastic_fixed.iter().any(|&f| f)
    }

    pub fn has_magnetic_dirichlet(&self) -> bool {
        self.magnetic_fixed.iter().any(|&f| f)
    }

    pub fn dof_points(&self) -> &[Point] {
        &self.dof_points
    }

    pub fn tet_dofs(&self, t: usize) -> &[usize] {
        let n = self.degree.tet_dofs();
        &self.tet_dofs[t * n..(t + 1) * n]
    }

    pub fn facet_dofs(&self, f: usize) -> &[usize] {
        let n = self.degree.facet_dofs();
        &self.facet_dofs[f * n..(f + 1) * n]
    }

    /// Outward unit normal of boundary facet `f`.
    pub fn facet_normal(&self, f: usize) -> [f64; 3] {
        self.facet_normals[f]
    }

    /// Free displacement index of component `comp` at scalar DOF `dof`.
    pub fn displacement_index(&self, dof: usize, comp: usize) -> Option<usize> {
        self.elastic_free[dof].map(|f| 3 * f + comp)
    }

    pub fn potential_index(&self, dof: usize) -> Option<usize> {
        self.magnetic_free[dof]
    }

    /// Same spaces with no elastic Dirichlet constraint (rigid motions free).
    pub fn without_elastic_dirichlet(&self) -> Self {
        let mut out = self.clone();
        out.elastic_fixed = vec![false; self.num_scalar];
        (out.elastic_free, out.num_elastic_free) = free_numbering(&out.elastic_fixed);
        out
    }

    /// Same spaces with no magnetic Dirichlet constraint (constants free).
    pub fn without_magnetic_dirichlet(&self) -> Self {
        let mut out = self.clone();
        out.magnetic_fixed = vec![false; self.num_scalar];
        (out.magnetic_free, out.num_magnetic_free) = free_numbering(&out.magnetic_fixed);
        out
    }

    /// Displacement per scalar DOF, zero on constrained DOFs.
    pub fn expand_displacement(&self, u: &DVector<f64>) -> Vec<[f64; 3]> {
        (0..self.num_scalar)
            .map(|s| std::array::from_fn(|c| self.displacement_index(s, c).map_or(0.0, |i| u[i])))
            .collect()
    }

    /// Potential per scalar DOF, zero on constrained DOFs.
    pub fn expand_potential(&self, psi: &DVector<f64>) -> Vec<f64> {
        (0..self.num_scalar)
            .map(|s| self.potential_index(s).map_or(0.0, |i| psi[i]))
            .collect()
    }

    /// Nodal interpolant of a displacement field on the free DOFs.
    pub fn interpolate_displacement(&self, f: impl Fn(&Point) -> [f64; 3]) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_free_displacement());
        for (s, p) in self.dof_points.iter().enumerate() {
            if self.elastic_free[s].is_some() {
                let v = f(p);
                for c in 0..3 {
                    out[self.displacement_index(s, c).unwrap()] = v[c];
                }
            }
        }
        out
    }

    /// Nodal interpolant of a potential on the free DOFs.
    pub fn interpolate_potential(&self, f: impl Fn(&Point) -> f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_free_potential());
        for (s, p) in self.dof_points.iter().enumerate() {
            if let Some(i) = self.potential_index(s) {
                out[i] = f(p);
            }
        }
        out
    }

    /// Stacks a free potential vector into all three displacement components,
    /// `v = (psi, psi, psi)`. Requires every free magnetic DOF to be free for
    /// the elastic field as well, and vice versa.
    pub fn stack_potential(&self, psi: &DVector<f64>) -> Result<DVector<f64>> {
        if self.elastic_fixed != self.magnetic_fixed {
            return Err(Error::AssumptionViolation(
                "stacking needs identical elastic and magnetic Dirichlet sets".into(),
            ));
        }
        let mut v = DVector::zeros(self.num_free_displacement());
        for s in 0..self.num_scalar {
            if let Some(i) = self.potential_index(s) {
                for c in 0..3 {
                    v[self.displacement_index(s, c).unwrap()] = psi[i];
                }
            }
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Scaling `t` of the magnetic penalty block: the second block row reads
    /// `C^T u - t^2 B psi = m`. The coupled problem itself has `t = 1`.
    pub penalty_t: f64,
    /// Quadrature degree for load integrals; defaults to `2k`.
    pub load_quadrature_degree: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { penalty_t: 1.0, load_quadrature_degree: None }
    }
}

/// Assembled blocks of the coupled system on free DOFs.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    /// Elastic block (symmetric), `n_u x n_u`.
    pub a: CsrMatrix,
    /// Magnetic block (symmetric, unscaled), `n_psi x n_psi`.
    pub b: CsrMatrix,
    /// Coupling block, `n_u x n_psi`.
    pub c: CsrMatrix,
    pub l: DVector<f64>,
    pub m: DVector<f64>,
    /// `t^2`; the second block row carries `-t^2 B`.
    pub penalty: f64,
}

impl BlockSystem {
    pub fn num_displacement(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_potential(&self) -> usize {
        self.b.nrows()
    }

    /// `[[A, C], [C^T, -t^2 B]]`.
    pub fn full_matrix(&self) -> CsrMatrix {
        CsrMatrix::block_symmetric(&self.a, &self.c, &self.b.scaled(-self.penalty))
            .expect("block shapes are consistent by construction")
    }

    pub fn rhs(&self) -> DVector<f64> {
        let mut r = DVector::zeros(self.num_displacement() + self.num_potential());
        r.rows_mut(0, self.num_displacement()).copy_from(&self.l);
        r.rows_mut(self.num_displacement(), self.num_potential()).copy_from(&self.m);
        r
    }

    /// Same system with both load vectors multiplied by `factor`.
    pub fn with_loads_scaled(&self, factor: f64) -> Self {
        Self { l: &self.l * factor, m: &self.m * factor, ..self.clone() }
    }

    pub fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.num_displacement();
        (x.rows(0, n).into_owned(), x.rows(n, self.num_potential()).into_owned())
    }
}

/// Residual norms `(|A u + C psi - l|, |C^T u - t^2 B psi - m|)`.
pub fn residual(system: &BlockSystem, u: &DVector<f64>, psi: &DVector<f64>) -> Result<(f64, f64)> {
    if u.len() != system.num_displacement() || psi.len() != system.num_potential() {
        return Err(invalid(format!(
            "residual: expected ({}, {}) unknowns, got ({}, {})",
            system.num_displacement(),
            system.num_potential(),
            u.len(),
            psi.len()
        )));
    }
    let ru = system.a.mul_vec(u) + system.c.mul_vec(psi) - &system.l;
    let ct = system.c.transpose();
    let rp = ct.mul_vec(u) - system.b.mul_vec(psi) * system.penalty - &system.m;
    Ok((ru.norm(), rp.norm()))
}

fn locate(err: Error, element: usize) -> Error {
    match err {
        Error::SingularElement { reason, .. } => Error::SingularElement { element, reason },
        other => other,
    }
}

struct ElementContribution {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    body: Option<(DVector<f64>, DVector<f64>)>,
}

/// Assembles `A`, `B`, `C`, `l`, `m` on free DOFs.
///
/// Element matrices may be computed in parallel; accumulation always visits
/// elements in ascending order, so results are bitwise reproducible.
pub fn assemble_system(
    spaces: &FunctionSpacePair,
    law: &MaterialLaw,
    neumann: &dyn NeumannData,
    sources: Option<&dyn SourceData>,
    options: &AssemblyOptions,
) -> Result<BlockSystem> {
    if !(options.penalty_t.is_finite() && options.penalty_t > 0.0) {
        return Err(invalid("penalty scaling t must be positive"));
    }
    let mesh = spaces.mesh();
    let degree = spaces.degree();
    let load_degree = options.load_quadrature_degree.unwrap_or(2 * degree.order());

    let contributions: Vec<Result<ElementContribution>> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let x = mesh.tet_coords(t);
            let body = sources
                .map(|s| element_source_loads_with(&x, degree, s, load_degree))
                .transpose()?;
            Ok(ElementContribution {
                a: element_elastic(&x, degree, &law.stiffness)?,
                b: element_magnetic(&x, degree, &law.permeability)?,
                c: element_coupling(&x, degree, &law.coupling)?,
                body,
            })
        })
        .collect();

    let nu = spaces.num_free_displacement();
    let np = spaces.num_free_potential();
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    let mut tc = Vec::new();
    let mut l = DVector::zeros(nu);
    let mut m = DVector::zeros(np);

    for (t, contribution) in contributions.into_iter().enumerate() {
        let e = contribution.map_err(|err| locate(err, t))?;
        let dofs = spaces.tet_dofs(t);
        let vec_idx: Vec<Option<usize>> = dofs
            .iter()
            .flat_map(|&s| (0..3).map(move |c| (s, c)))
            .map(|(s, c)| spaces.displacement_index(s, c))
            .collect();
        let sca_idx: Vec<Option<usize>> = dofs.iter().map(|&s| spaces.potential_index(s)).collect();

        for (i, gi) in vec_idx.iter().enumerate() {
            let Some(gi) = *gi else { continue };
            for (j, gj) in vec_idx.iter().enumerate() {
                if let Some(gj) = *gj {
                    ta.push((gi, gj, e.a[(i, j)]));
                }
            }
            for (j, gj) in sca_idx.iter().enumerate() {
                if let Some(gj) = *gj {
                    tc.push((gi, gj, e.c[(i, j)]));
                }
            }
        }
        for (i, gi) in sca_idx.iter().enumerate() {
            let Some(gi) = *gi else { continue };
            for (j, gj) in sca_idx.iter().enumerate() {
                if let Some(gj) = *gj {
                    tb.push((gi, gj, e.b[(i, j)]));
                }
            }
        }
        if let Some((fb, gb)) = &e.body {
            for (i, gi) in vec_idx.iter().enumerate() {
                if let Some(gi) = *gi {
                    l[gi] += fb[i];
                }
            }
            for (i, gi) in sca_idx.iter().enumerate() {
                if let Some(gi) = *gi {
                    m[gi] += gb[i];
                }
            }
        }
    }

    for (f, facet) in mesh.facets().iter().enumerate() {
        let elastic = facet.elastic == BoundaryClass::Neumann;
        let magnetic = facet.magnetic == BoundaryClass::Neumann;
        if !elastic && !magnetic {
            continue;
        }
        let (lt, mt) = element_neumann_loads_with(
            &mesh.facet_coords(f),
            &spaces.facet_normal(f),
            degree,
            neumann,
            load_degree,
        )
        .map_err(|err| locate(err, f))?;
        for (i, &s) in spaces.facet_dofs(f).iter().enumerate() {
            if elastic {
                for c in 0..3 {
                    if let Some(g) = spaces.displacement_index(s, c) {
                        l[g] += lt[3 * i + c];
                    }
                }
            }
            if magnetic {
                if let Some(g) = spaces.potential_index(s) {
                    m[g] += mt[i];
                }
            }
        }
    }

    Ok(BlockSystem {
        a: CsrMatrix::from_triplets(nu, nu, ta),
        b: CsrMatrix::from_triplets(np, np, tb),
        c: CsrMatrix::from_triplets(nu, np, tc),
        l,
        m,
        penalty: options.penalty_t * options.penalty_t,
    })
}

/// Gram matrices of the norms used by the stability analysis, on free DOFs.
#[derive(Debug, Clone)]
pub struct GramMatrices {
    /// Full `H^1` inner product on free displacement DOFs.
    pub x_v: CsrMatrix,
    /// Full `H^1` inner product on free potential DOFs.
    pub x_m: CsrMatrix,
    /// `H^1` seminorm on free displacement DOFs.
    pub s_v: CsrMatrix,
    /// `H^1` seminorm on free potential DOFs.
    pub s_m: CsrMatrix,
    /// `L^2` inner product on free potential DOFs.
    pub mass_m: CsrMatrix,
    /// `∫ eps(u) : eps(v)` on free displacement DOFs.
    pub e_v: CsrMatrix,
    pub elastic_constrained: bool,
    pub magnetic_constrained: bool,
}

pub fn assemble_grams(spaces: &FunctionSpacePair) -> Result<GramMatrices> {
    let mesh = spaces.mesh();
    let degree = spaces.degree();
    let elements: Vec<Result<_>> = (0..mesh.num_tets())
        .into_par_iter()
        .map(|t| {
            let x = mesh.tet_coords(t);
            Ok((element_scalar_grams(&x, degree)?, element_strain_gram(&x, degree)?))
        })
        .collect();

    let (nu, np) = (spaces.num_free_displacement(), spaces.num_free_potential());
    let (mut xv, mut sv, mut ev) = (Vec::new(), Vec::new(), Vec::new());
    let (mut xm, mut sm, mut mm) = (Vec::new(), Vec::new(), Vec::new());
    for (t, e) in elements.into_iter().enumerate() {
        let (scalar, strain) = e.map_err(|err| locate(err, t))?;
        let dofs = spaces.tet_dofs(t);
        for (i, &si) in dofs.iter().enumerate() {
            for (j, &sj) in dofs.iter().enumerate() {
                let mass = scalar.mass[(i, j)];
                let lap = scalar.laplace[(i, j)];
                if let (Some(gi), Some(gj)) = (spaces.potential_index(si), spaces.potential_index(sj)) {
                    xm.push((gi, gj, mass + lap));
                    sm.push((gi, gj, lap));
                    mm.push((gi, gj, mass));
                }
                for c in 0..3 {
                    if let (Some(gi), Some(gj)) =
                        (spaces.displacement_index(si, c), spaces.displacement_index(sj, c))
                    {
                        xv.push((gi, gj, mass + lap));
                        sv.push((gi, gj, lap));
                    }
                    for d in 0..3 {
                        if let (Some(gi), Some(gj)) =
                            (spaces.displacement_index(si, c), spaces.displacement_index(sj, d))
                        {
                            ev.push((gi, gj, strain[(3 * i + c, 3 * j + d)]));
                        }
                    }
                }
            }
        }
    }
    Ok(GramMatrices {
        x_v: CsrMatrix::from_triplets(nu, nu, xv),
        x_m: CsrMatrix::from_triplets(np, np, xm),
        s_v: CsrMatrix::from_triplets(nu, nu, sv),
        s_m: CsrMatrix::from_triplets(np, np, sm),
        mass_m: CsrMatrix::from_triplets(np, np, mm),
        e_v: CsrMatrix::from_triplets(nu, nu, ev),
        elastic_constrained: spaces.has_elastic_dirichlet(),
        magnetic_constrained: spaces.has_magnetic_dirichlet(),
    })
}

/// Integrates `f(x, u(x), grad u(x), psi(x), grad psi(x))` over the mesh for
/// discrete fields given per scalar DOF, with a tet rule of `quadrature_degree`.
pub(crate) fn integrate_fields(
    spaces: &FunctionSpacePair,
    u: &[[f64; 3]],
    psi: &[f64],
    quadrature_degree: usize,
    f: impl Fn(&Point, &[f64; 3], &[[f64; 3]; 3], f64, &[f64; 3]) -> f64,
) -> Result<f64> {
    let rule = crate::fem::QuadratureRule::tetrahedron(quadrature_degree)?;
    let elem = ReferenceElement::new(spaces.degree());
    let mesh = spaces.mesh();
    let mut total = 0.0;
    for t in 0..mesh.num_tets() {
        let geo = TetGeometry::new(&mesh.tet_coords(t)).map_err(|e| locate(e, t))?;
        let dofs = spaces.tet_dofs(t);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.point(l);
            let vals = elem.values(l);
            let grads = geo.shape_gradients(&elem, l);
            let mut uv = [0.0; 3];
            let mut du = [[0.0; 3]; 3];
            let mut p = 0.0;
            let mut dp = [0.0; 3];
            for (i, &s) in dofs.iter().enumerate() {
                p += vals[i] * psi[s];
                for c in 0..3 {
                    uv[c] += vals[i] * u[s][c];
                    dp[c] += grads[i][c] * psi[s];
                    for d in 0..3 {
                        du[c][d] += grads[i][d] * u[s][c];
                    }
                }
            }
            total += w * 6.0 * geo.volume * f(&x, &uv, &du, p, &dp);
        }
    }
    Ok(total)
}
