//! Tetrahedral meshes with independent elastic and magnetic boundary
//! classification.
//!
//! A [`Mesh`] stores node coordinates, positively oriented tetrahedra and the
//! complete list of boundary facets. Every boundary facet carries two
//! classes, one per field, so the elastic Dirichlet part `Gamma_D` and the
//! magnetic Dirichlet part `Gamma_mag,D` can be chosen independently.

mod generate;
mod io;

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::report::ValidationReport;

pub use generate::{generate_unit_cube_mesh, CubeFace, FaceSet};
pub use io::{read_mesh, read_mesh_file, write_mesh};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    Dirichlet,
    Neumann,
}

/// A boundary triangle with its per-field boundary classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Facet {
    pub nodes: [usize; 3],
    pub elastic: BoundaryClass,
    pub magnetic: BoundaryClass,
}

/// Local vertex triples of the four faces of a tetrahedron, each listed so
/// that its right-hand normal points out of a positively oriented tet. Face
/// `i` is opposite local vertex `i`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

pub(crate) fn sorted3(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

/// Immutable tetrahedral mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    tets: Vec<[usize; 4]>,
    facets: Vec<Facet>,
}

impl Mesh {
    /// Builds a mesh and checks every invariant.
    pub fn new(nodes: Vec<Point>, tets: Vec<[usize; 4]>, facets: Vec<Facet>) -> Result<Self> {
        let mesh = Self::from_parts_unchecked(nodes, tets, facets);
        let report = validate_mesh(&mesh);
        match report.first_failure() {
            None => Ok(mesh),
            Some(c) => {
                let what = match c.offending.first() {
                    Some(i) => format!("{} (first offending entity {})", c.name, i),
                    None => c.name.to_string(),
                };
                Err(Error::Validation(what))
            }
        }
    }

    /// Builds a mesh without validation; use [`validate_mesh`] to diagnose it.
    pub fn from_parts_unchecked(
        nodes: Vec<Point>,
        tets: Vec<[usize; 4]>,
        facets: Vec<Facet>,
    ) -> Self {
        Self { nodes, tets, facets }
    }

    pub fn into_parts(self) -> (Vec<Point>, Vec<[usize; 4]>, Vec<Facet>) {
        (self.nodes, self.tets, self.facets)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_coords(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|i| self.nodes[i])
    }

    pub fn facet_coords(&self, f: usize) -> [Point; 3] {
        self.facets[f].nodes.map(|i| self.nodes[i])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_coords(t))
    }

    /// For every facet, the owning tet and the local index of the tet vertex
    /// opposite to the facet.
    pub fn facet_owners(&self) -> Result<Vec<(usize, usize)>> {
        let mut faces: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for (t, tet) in self.tets.iter().enumerate() {
            for (local, face) in TET_FACES.iter().enumerate() {
                faces.insert(sorted3(face.map(|i| tet[i])), (t, local));
            }
        }
        self.facets
            .iter()
            .enumerate()
            .map(|(f, facet)| {
                faces
                    .get(&sorted3(facet.nodes))
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("facet {f} belongs to no tet")))
            })
            .collect()
    }

    /// Outward unit normal of facet `f`, oriented away from its owning tet.
    pub fn facet_normal(&self, f: usize, owner: (usize, usize)) -> [f64; 3] {
        let [a, b, c] = self.facet_coords(f);
        let opposite = self.nodes[self.tets[owner.0][owner.1]];
        let mut n = cross(sub(b, a), sub(c, a));
        if dot(n, sub(opposite, a)) > 0.0 {
            n = n.map(|x| -x);
        }
        let len = dot(n, n).sqrt();
        n.map(|x| x / len)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        let first = *self.nodes.first()?;
        Some(self.nodes.iter().fold((first, first), |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1]), lo[2].min(p[2])],
                [hi[0].max(p[0]), hi[1].max(p[1]), hi[2].max(p[2])],
            )
        }))
    }

    /// Copy of the mesh with every coordinate multiplied per axis.
    pub fn scaled(&self, factors: [f64; 3]) -> Mesh {
        let mut out = self.clone();
        for p in &mut out.nodes {
            for d in 0..3 {
                p[d] *= factors[d];
            }
        }
        out
    }

    /// Copy of the mesh with every facet's classes replaced by `f`.
    pub fn reclassified(
        &self,
        mut f: impl FnMut(&Facet) -> (BoundaryClass, BoundaryClass),
    ) -> Mesh {
        let mut out = self.clone();
        for facet in &mut out.facets {
            let (e, m) = f(facet);
            facet.elastic = e;
            facet.magnetic = m;
        }
        out
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Signed volume; positive when `(p1-p0, p2-p0, p3-p0)` is right-handed.
pub fn signed_volume(p: &[Point; 4]) -> f64 {
    dot(cross(sub(p[1], p[0]), sub(p[2], p[0])), sub(p[3], p[0])) / 6.0
}

/// Checks every mesh invariant and reports the offending entities.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = mesh.nodes.len();

    report.push_flag(
        "non-empty",
        !mesh.tets.is_empty() && n > 0,
        format!("{} nodes, {} tets", n, mesh.tets.len()),
    );

    let finite: Vec<usize> = (0..n)
        .filter(|&i| mesh.nodes[i].iter().any(|x| !x.is_finite()))
        .collect();
    report.push("finite coordinates", finite, "");

    let bad_tets: Vec<usize> = (0..mesh.tets.len())
        .filter(|&t| mesh.tets[t].iter().any(|&i| i >= n))
        .collect();
    let bad_facets: Vec<usize> = (0..mesh.facets.len())
        .filter(|&f| mesh.facets[f].nodes.iter().any(|&i| i >= n))
        .collect();
    let indices_ok = bad_tets.is_empty() && bad_facets.is_empty();
    report.push("tet indices in range", bad_tets, "");
    report.push("facet indices in range", bad_facets, "");
    if !indices_ok {
        // Geometry and topology checks need valid indices.
        return report;
    }

    let inverted: Vec<usize> = (0..mesh.tets.len())
        .filter(|&t| !(mesh.tet_volume(t) > 0.0))
        .collect();
    report.push("positive volume", inverted, "");

    let mut face_count: HashMap<[usize; 3], usize> = HashMap::new();
    for tet in &mesh.tets {
        for face in TET_FACES {
            *face_count.entry(sorted3(face.map(|i| tet[i]))).or_default() += 1;
        }
    }
    let mut facet_seen: HashMap<[usize; 3], usize> = HashMap::new();
    let mut interior = Vec::new();
    let mut duplicates = Vec::new();
    for (f, facet) in mesh.facets.iter().enumerate() {
        let key = sorted3(facet.nodes);
        if face_count.get(&key) != Some(&1) {
            interior.push(f);
        }
        if facet_seen.insert(key, f).is_some() {
            duplicates.push(f);
        }
    }
    report.push("facets lie on the boundary", interior, "");
    report.push("facets listed once", duplicates, "");

    // Boundary faces missing from the facet list, reported by owning tet.
    let mut missing = Vec::new();
    for (t, tet) in mesh.tets.iter().enumerate() {
        for face in TET_FACES {
            let key = sorted3(face.map(|i| tet[i]));
            if face_count[&key] == 1 && !facet_seen.contains_key(&key) {
                missing.push(t);
            }
        }
    }
    report.push("boundary facets complete", missing, "offending entries are tets");

    let elastic_d = mesh
        .facets
        .iter()
        .filter(|f| f.elastic == BoundaryClass::Dirichlet)
        .count();
    let magnetic_d = mesh
        .facets
        .iter()
        .filter(|f| f.magnetic == BoundaryClass::Dirichlet)
        .count();
    report.push_flag(
        "non-empty elastic Dirichlet",
        elastic_d > 0,
        format!("{elastic_d} facets"),
    );
    report.push_flag(
        "non-empty magnetic Dirichlet",
        magnetic_d > 0,
        format!("{magnetic_d} facets"),
    );
    report
}

/// Side length of the smallest axis-aligned cube containing the mesh.
pub fn bounding_cube_side(mesh: &Mesh) -> Result<f64> {
    let (lo, hi) = mesh
        .bounding_box()
        .ok_or_else(|| invalid("bounding cube of an empty mesh"))?;
    Ok((0..3).map(|d| hi[d] - lo[d]).fold(0.0, f64::max))
}
