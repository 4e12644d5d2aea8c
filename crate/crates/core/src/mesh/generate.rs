use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{sorted3, BoundaryClass, Facet, Mesh, TET_FACES};
use crate::error::{invalid, Error, Result};

/// One of the six faces of an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CubeFace {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl CubeFace {
    pub const ALL: [CubeFace; 6] = [
        CubeFace::XMin,
        CubeFace::XMax,
        CubeFace::YMin,
        CubeFace::YMax,
        CubeFace::ZMin,
        CubeFace::ZMax,
    ];

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    pub fn is_max(self) -> bool {
        self as usize % 2 == 1
    }

    pub fn name(self) -> &'static str {
        ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"][self as usize]
    }

    /// Face whose outward normal is closest to `normal`, if the normal is
    /// axis-aligned within `1e-8`.
    pub fn from_normal(normal: &[f64; 3]) -> Option<CubeFace> {
        let axis = (0..3).find(|&d| (normal[d].abs() - 1.0).abs() < 1e-8)?;
        Some(CubeFace::ALL[2 * axis + usize::from(normal[axis] > 0.0)])
    }
}

impl fmt::Display for CubeFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CubeFace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CubeFace::ALL
            .into_iter()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown cube face '{s}'")))
    }
}

/// Subset of the six cube faces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FaceSet(u8);

impl FaceSet {
    pub const EMPTY: FaceSet = FaceSet(0);
    pub const ALL: FaceSet = FaceSet(0b11_1111);

    pub fn single(face: CubeFace) -> Self {
        FaceSet(1 << face as u8)
    }

    pub fn with(self, face: CubeFace) -> Self {
        FaceSet(self.0 | 1 << face as u8)
    }

    pub fn contains(self, face: CubeFace) -> bool {
        self.0 & (1 << face as u8) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = CubeFace> {
        CubeFace::ALL.into_iter().filter(move |f| self.contains(*f))
    }
}

impl FromIterator<CubeFace> for FaceSet {
    fn from_iter<I: IntoIterator<Item = CubeFace>>(iter: I) -> Self {
        iter.into_iter().fold(FaceSet::EMPTY, FaceSet::with)
    }
}

impl FromStr for FaceSet {
    type Err = Error;

    /// Comma- or whitespace-separated face names, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(FaceSet::ALL);
        }
        s.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(CubeFace::from_str)
            .collect()
    }
}

impl fmt::Display for FaceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(CubeFace::name).collect();
        f.write_str(&names.join(","))
    }
}

/// Kuhn split of the unit cell: one tet per axis permutation, all sharing
/// the main diagonal from corner `000` to corner `111`.
const KUHN_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Mesh of `[0,1]^3` with `n^3` cells, each split into 6 Kuhn tetrahedra.
///
/// Boundary facets on faces in `elastic_dirichlet` (resp.
/// `magnetic_dirichlet`) are classified Dirichlet for that field, all other
/// boundary facets Neumann.
pub fn generate_unit_cube_mesh(
    n: usize,
    elastic_dirichlet: FaceSet,
    magnetic_dirichlet: FaceSet,
) -> Result<Mesh> {
    if n == 0 {
        return Err(invalid("cube mesh needs at least one subdivision"));
    }
    if elastic_dirichlet.is_empty() || magnetic_dirichlet.is_empty() {
        return Err(invalid("Dirichlet face selection must be non-empty for both fields"));
    }

    let np = n + 1;
    let id = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let h = 1.0 / n as f64;

    let mut nodes = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                nodes.push([i as f64 * h, j as f64 * h, k as f64 * h]);
            }
        }
    }
    // Exact endpoint so boundary classification is unambiguous.
    for p in &mut nodes {
        for x in p.iter_mut() {
            if (*x - 1.0).abs() < 1e-12 {
                *x = 1.0;
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in KUHN_PERMUTATIONS {
                    let mut corner = [i, j, k];
                    let mut tet = [id(i, j, k), 0, 0, 0];
                    for (slot, axis) in perm.into_iter().enumerate() {
                        corner[axis] += 1;
                        tet[slot + 1] = id(corner[0], corner[1], corner[2]);
                    }
                    let coords = tet.map(|v| nodes[v]);
                    if super::signed_volume(&coords) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }

    let mut count: HashMap<[usize; 3], usize> = HashMap::new();
    for tet in &tets {
        for face in TET_FACES {
            *count.entry(sorted3(face.map(|i| tet[i]))).or_default() += 1;
        }
    }
    let classify = |faces: FaceSet, tri: &[usize; 3]| {
        let on = faces.iter().any(|f| {
            let target = if f.is_max() { 1.0 } else { 0.0 };
            tri.iter().all(|&v| nodes[v][f.axis()] == target)
        });
        if on {
            BoundaryClass::Dirichlet
        } else {
            BoundaryClass::Neumann
        }
    };
    let mut facets = Vec::new();
    for tet in &tets {
        for face in TET_FACES {
            let tri = face.map(|i| tet[i]);
            if count[&sorted3(tri)] == 1 {
                facets.push(Facet {
                    nodes: tri,
                    elastic: classify(elastic_dirichlet, &tri),
                    magnetic: classify(magnetic_dirichlet, &tri),
                });
            }
        }
    }

    Mesh::new(nodes, tets, facets)
}
