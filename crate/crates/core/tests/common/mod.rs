#![allow(dead_code)]

use mefem::assembly::{assemble_grams, assemble_system, build_spaces, AssemblyOptions, BlockSystem, FunctionSpacePair, GramMatrices};
use mefem::fem::{ConstantNeumann, Degree, NeumannData};
use mefem::material::{MaterialLaw, Matrix6x3};
use mefem::mesh::{generate_unit_cube_mesh, CubeFace, FaceSet, Mesh};
use nalgebra::{DMatrix, DVector, Matrix3, Matrix6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 42;

pub fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

pub fn cube(n: usize) -> Mesh {
    let x0 = FaceSet::single(CubeFace::XMin);
    generate_unit_cube_mesh(n, x0, x0).unwrap()
}

pub fn ones_law() -> MaterialLaw {
    MaterialLaw::isotropic(1.0, 1.0, Matrix6x3::from_element(1.0), 1.0).unwrap()
}

/// Normal strains coupled to the matching gradient component, shears to all.
pub fn full_rank_coupling() -> Matrix6x3 {
    let mut e = Matrix6x3::from_element(1.0);
    e.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
    e
}

/// A random admissible material: SPD stiffness and diagonal permeability with
/// a coupling matrix of moderate size.
pub fn random_law(r: &mut impl Rng) -> MaterialLaw {
    let g = DMatrix::from_fn(6, 6, |_, _| r.random_range(-1.0..1.0));
    let stiffness = Matrix6::from_iterator((&g * g.transpose() + DMatrix::identity(6, 6) * 2.0).iter().copied());
    let coupling = Matrix6x3::from_fn(|_, _| r.random_range(0.0..2.0));
    let permeability = Matrix3::from_diagonal(&nalgebra::Vector3::from_fn(|_, _| r.random_range(0.5..2.0)));
    MaterialLaw::new(stiffness, coupling, permeability).unwrap()
}

pub fn loads() -> ConstantNeumann {
    ConstantNeumann { traction: [0.1, -0.05, 0.2], flux: 0.3 }
}

pub struct Setup {
    pub spaces: FunctionSpacePair,
    pub system: BlockSystem,
    pub grams: GramMatrices,
}

pub fn setup(mesh: &Mesh, degree: Degree, law: &MaterialLaw, data: &dyn NeumannData) -> Setup {
    let spaces = build_spaces(mesh, degree).unwrap();
    let system = assemble_system(&spaces, law, data, None, &AssemblyOptions::default()).unwrap();
    let grams = assemble_grams(&spaces).unwrap();
    Setup { spaces, system, grams }
}

pub fn random_vector(r: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0))
}

/// Smallest singular value of `L_V^{-1} C L_M^{-T}`; an inf-sup oracle that
/// shares no code path with the eigenvalue-based estimator.
pub fn whitened_svd_oracle(c: &DMatrix<f64>, x_v: &DMatrix<f64>, x_m: &DMatrix<f64>) -> f64 {
    let lv = x_v.clone().cholesky().unwrap().unpack();
    let lm = x_m.clone().cholesky().unwrap().unpack();
    let y = lv.solve_lower_triangular(c).unwrap();
    let w = lm.solve_lower_triangular(&y.transpose()).unwrap().transpose();
    w.svd(false, false).singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}
