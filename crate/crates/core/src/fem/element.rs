use crate::error::{invalid, Error, Result};
use crate::mesh::Point;

/// Polynomial degree of the Lagrange spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn from_order(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Degree::P1),
            2 => Ok(Degree::P2),
            _ => Err(invalid(format!("Lagrange degree must be 1 or 2, got {k}"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Degree::P1 => 1,
            Degree::P2 => 2,
        }
    }

    /// Scalar DOFs per tetrahedron.
    pub fn tet_dofs(self) -> usize {
        match self {
            Degree::P1 => 4,
            Degree::P2 => 10,
        }
    }

    /// Scalar DOFs per boundary triangle.
    pub fn facet_dofs(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }
}

/// Local vertex pairs of the six tet edges, in local DOF order (DOFs 4..10).
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local vertex pairs of the three triangle edges (DOFs 3..6).
pub const TRI_EDGES: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];

/// Lagrange shape functions on the reference tetrahedron, expressed in
/// barycentric coordinates. P2 numbering: vertices first, then edge
/// midpoints in [`TET_EDGES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceElement {
    pub degree: Degree,
}

impl ReferenceElement {
    pub fn new(degree: Degree) -> Self {
        Self { degree }
    }

    pub fn num_dofs(&self) -> usize {
        self.degree.tet_dofs()
    }

    pub fn values(&self, l: &[f64; 4]) -> Vec<f64> {
        match self.degree {
            Degree::P1 => l.to_vec(),
            Degree::P2 => {
                let mut v: Vec<f64> = l.iter().map(|&li| li * (2.0 * li - 1.0)).collect();
                v.extend(TET_EDGES.iter().map(|&[a, b]| 4.0 * l[a] * l[b]));
                v
            }
        }
    }

    /// `d N_i / d l_m` for each shape function `i`.
    pub fn barycentric_derivatives(&self, l: &[f64; 4]) -> Vec<[f64; 4]> {
        match self.degree {
            Degree::P1 => (0..4)
                .map(|i| {
                    let mut d = [0.0; 4];
                    d[i] = 1.0;
                    d
                })
                .collect(),
            Degree::P2 => {
                let mut out = Vec::with_capacity(10);
                for i in 0..4 {
                    let mut d = [0.0; 4];
                    d[i] = 4.0 * l[i] - 1.0;
                    out.push(d);
                }
                for [a, b] in TET_EDGES {
                    let mut d = [0.0; 4];
                    d[a] = 4.0 * l[b];
                    d[b] = 4.0 * l[a];
                    out.push(d);
                }
                out
            }
        }
    }

    /// Barycentric coordinates of the Lagrange nodes.
    pub fn lagrange_nodes(&self) -> Vec<[f64; 4]> {
        let mut nodes: Vec<[f64; 4]> = (0..4)
            .map(|i| {
                let mut l = [0.0; 4];
                l[i] = 1.0;
                l
            })
            .collect();
        if self.degree == Degree::P2 {
            nodes.extend(TET_EDGES.iter().map(|&[a, b]| {
                let mut l = [0.0; 4];
                l[a] = 0.5;
                l[b] = 0.5;
                l
            }));
        }
        nodes
    }
}

/// Lagrange shape functions on a triangle (barycentric `(l0, l1, l2)`).
pub fn triangle_values(degree: Degree, l: &[f64; 3]) -> Vec<f64> {
    match degree {
        Degree::P1 => l.to_vec(),
        Degree::P2 => {
            let mut v: Vec<f64> = l.iter().map(|&li| li * (2.0 * li - 1.0)).collect();
            v.extend(TRI_EDGES.iter().map(|&[a, b]| 4.0 * l[a] * l[b]));
            v
        }
    }
}

/// Affine map of the reference tetrahedron onto a physical tet.
#[derive(Debug, Clone)]
pub struct TetGeometry {
    pub vertices: [Point; 4],
    /// Absolute volume.
    pub volume: f64,
    /// Constant physical gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 3]; 4],
}

impl TetGeometry {
    pub fn new(vertices: &[Point; 4]) -> Result<Self> {
        let e: [[f64; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|d| vertices[i + 1][d] - vertices[0][d])
        });
        // Rows of J^{-T} are the gradients of l1..l3: cofactors / det.
        let cof = [
            cross(e[1], e[2]),
            cross(e[2], e[0]),
            cross(e[0], e[1]),
        ];
        let det = e[0][0] * cof[0][0] + e[0][1] * cof[0][1] + e[0][2] * cof[0][2];
        let scale = (0..4)
            .flat_map(|i| (i + 1..4).map(move |j| (i, j)))
            .map(|(i, j)| dist(&vertices[i], &vertices[j]))
            .fold(0.0, f64::max);
        if !(det.abs() >= 1e-14 * scale.powi(3)) || scale == 0.0 {
            return Err(Error::SingularElement {
                element: usize::MAX,
                reason: format!("degenerate tetrahedron (det = {det:e})"),
            });
        }
        let mut grad_bary = [[0.0; 3]; 4];
        for i in 0..3 {
            for d in 0..3 {
                grad_bary[i + 1][d] = cof[i][d] / det;
                grad_bary[0][d] -= cof[i][d] / det;
            }
        }
        Ok(Self { vertices: *vertices, volume: det.abs() / 6.0, grad_bary })
    }

    pub fn point(&self, l: &[f64; 4]) -> Point {
        std::array::from_fn(|d| (0..4).map(|i| l[i] * self.vertices[i][d]).sum())
    }

    /// Physical gradients of all shape functions at barycentric point `l`.
    pub fn shape_gradients(&self, elem: &ReferenceElement, l: &[f64; 4]) -> Vec<[f64; 3]> {
        elem.barycentric_derivatives(l)
            .iter()
            .map(|dl| {
                std::array::from_fn(|d| (0..4).map(|m| dl[m] * self.grad_bary[m][d]).sum())
            })
            .collect()
    }
}

/// Physical triangle: area and point map.
#[derive(Debug, Clone)]
pub struct TriangleGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
}

impl TriangleGeometry {
    pub fn new(vertices: &[Point; 3]) -> Result<Self> {
        let a = std::array::from_fn(|d| vertices[1][d] - vertices[0][d]);
        let b = std::array::from_fn(|d| vertices[2][d] - vertices[0][d]);
        let n = cross(a, b);
        let area = 0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let scale = dist(&vertices[0], &vertices[1])
            .max(dist(&vertices[0], &vertices[2]))
            .max(dist(&vertices[1], &vertices[2]));
        if !(area >= 1e-14 * scale * scale) || scale == 0.0 {
            return Err(Error::SingularElement {
                element: usize::MAX,
                reason: format!("zero-area facet (area = {area:e})"),
            });
        }
        Ok(Self { vertices: *vertices, area })
    }

    pub fn point(&self, l: &[f64; 3]) -> Point {
        std::array::from_fn(|d| (0..3).map(|i| l[i] * self.vertices[i][d]).sum())
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bary(seed: u64) -> [f64; 4] {
        // Small LCG; enough spread for shape-function identities.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let raw = [next(), next(), next(), next()];
        let sum: f64 = raw.iter().sum();
        raw.map(|x| x / sum)
    }

    #[test]
    fn partition_of_unity() {
        let geo = TetGeometry::new(&[
            [0.1, 0.0, 0.2],
            [1.0, 0.3, 0.0],
            [0.2, 1.1, 0.1],
            [0.3, 0.2, 0.9],
        ])
        .unwrap();
        for degree in [Degree::P1, Degree::P2] {
            let elem = ReferenceElement::new(degree);
            for k in 0..50 {
                let l = random_bary(k);
                let sum: f64 = elem.values(&l).iter().sum();
                assert!((sum - 1.0).abs() < 1e-14);
                let grads = geo.shape_gradients(&elem, &l);
                for d in 0..3 {
                    let g: f64 = grads.iter().map(|g| g[d]).sum();
                    assert!(g.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn kronecker_property() {
        for degree in [Degree::P1, Degree::P2] {
            let elem = ReferenceElement::new(degree);
            for (i, node) in elem.lagrange_nodes().iter().enumerate() {
                for (j, v) in elem.values(node).iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn barycentric_gradients_by_finite_differences() {
        let elem = ReferenceElement::new(Degree::P2);
        let l = random_bary(7);
        let h = 1e-6;
        let d = elem.barycentric_derivatives(&l);
        for m in 0..4 {
            let mut lp = l;
            let mut lm = l;
            lp[m] += h;
            lm[m] -= h;
            let (vp, vm) = (elem.values(&lp), elem.values(&lm));
            for i in 0..10 {
                assert!(((vp[i] - vm[i]) / (2.0 * h) - d[i][m]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn degenerate_tet_rejected() {
        let flat = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(matches!(TetGeometry::new(&flat), Err(Error::SingularElement { .. })));
        let line = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(matches!(TriangleGeometry::new(&line), Err(Error::SingularElement { .. })));
    }
}
