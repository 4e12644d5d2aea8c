//! Batch front-end: configuration parsing and the four workflows.
//!
//! Configuration is a flat `key = value` file; `#` starts a comment and arrays
//! are whitespace-separated numbers. Recognized keys:
//!
//! ```text
//! mesh.n                   cells per edge of the generated unit cube (2)
//! mesh.file                mesh file; replaces the generated cube
//! mesh.elastic_dirichlet   clamped faces of the generated cube (xmin)
//! mesh.magnetic_dirichlet  grounded faces of the generated cube (xmin)
//! fem.degree               1 or 2 (1)
//! material.lame            lambda mu (1 1)
//! material.stiffness       36 numbers, row-major; overrides material.lame
//! material.coupling        18 numbers, row-major 6x3 (all ones)
//! material.permeability    1 number (isotropic) or 9 numbers (1)
//! bc.traction              traction on every elastic Neumann facet (0 0 0)
//! bc.traction.<face>       traction on one cube face, e.g. bc.traction.xmax
//! bc.flux                  normal flux on every magnetic Neumann facet (0)
//! bc.flux.<face>           normal flux on one cube face
//! solver.type              direct | schur | minres (direct)
//! solver.tol               minres tolerance (1e-10)
//! solver.max_iterations    minres iteration cap (1000)
//! penalty.t                scaling t of the -t^2 B block (1)
//! infsup.levels            cube refinements of the inf-sup study (1 2 3)
//! infsup.max_spread        admissible relative spread of beta_h (0.2)
//! convergence.case         polynomial-quadratic | trigonometric
//! convergence.levels       ascending refinements (2 4 8 for k=1, 2 4 for k=2)
//! output.dir               output directory (.)
//! output.vtk               also write solution.vtk (false)
//! ```
//!
//! Exit codes: 0 success, 1 numerical or criterion failure, 2 usage or parse
//! failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix6};

use crate::analysis::{infsup_refinement_study, DENSE_SIZE_LIMIT};
use crate::assembly::{assemble_system, build_spaces, AssemblyOptions, FunctionSpacePair};
use crate::error::{Error, Result};
use crate::fem::{Degree, NeumannData};
use crate::material::{check_minimal_positivity, isotropic_stiffness, validate_material, MaterialLaw, Matrix6x3};
use crate::mesh::{generate_unit_cube_mesh, read_mesh_file, CubeFace, FaceSet, Mesh, Point};
use crate::solver::{solve, SaddleSolution, SolverKind, SolverOptions};
use crate::verification::{compute_energies, make_manufactured_case, run_convergence_study, ConvergenceTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Relative residual accepted from factorization-based solves.
const DIRECT_RESIDUAL_TOL: f64 = 1e-9;

/// Where the mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    UnitCube { n: usize, elastic_dirichlet: FaceSet, magnetic_dirichlet: FaceSet },
    File(PathBuf),
}

/// Constant Neumann data with optional per-face overrides on axis-aligned
/// boundary facets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceNeumann {
    pub traction: [f64; 3],
    pub flux: f64,
    pub face_traction: BTreeMap<CubeFace, [f64; 3]>,
    pub face_flux: BTreeMap<CubeFace, f64>,
}

impl NeumannData for FaceNeumann {
    fn traction(&self, _: &Point, normal: &[f64; 3]) -> [f64; 3] {
        CubeFace::from_normal(normal)
            .and_then(|f| self.face_traction.get(&f).copied())
            .unwrap_or(self.traction)
    }

    fn flux(&self, _: &Point, normal: &[f64; 3]) -> f64 {
        CubeFace::from_normal(normal)
            .and_then(|f| self.face_flux.get(&f).copied())
            .unwrap_or(self.flux)
    }
}

/// Material entries as written in the configuration, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialBlock {
    pub stiffness: Matrix6<f64>,
    pub coupling: Matrix6x3,
    pub permeability: Matrix3<f64>,
}

impl MaterialBlock {
    fn raw(&self) -> MaterialLaw {
        MaterialLaw { stiffness: self.stiffness, coupling: self.coupling, permeability: self.permeability }
    }

    pub fn law(&self) -> Result<MaterialLaw> {
        MaterialLaw::new(self.stiffness, self.coupling, self.permeability)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub degree: Degree,
    pub material: MaterialBlock,
    pub neumann: FaceNeumann,
    pub solver: SolverOptions,
    pub penalty_t: f64,
    pub infsup_levels: Vec<usize>,
    pub infsup_max_spread: f64,
    pub convergence_case: String,
    pub convergence_levels: Option<Vec<usize>>,
    pub output_dir: PathBuf,
    pub vtk: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let xmin = FaceSet::single(CubeFace::XMin);
        Self {
            mesh: MeshSource::UnitCube { n: 2, elastic_dirichlet: xmin, magnetic_dirichlet: xmin },
            degree: Degree::P1,
            material: MaterialBlock {
                stiffness: isotropic_stiffness(1.0, 1.0),
                coupling: Matrix6x3::from_element(1.0),
                permeability: Matrix3::identity(),
            },
            neumann: FaceNeumann::default(),
            solver: SolverOptions::default(),
            penalty_t: 1.0,
            infsup_levels: vec![1, 2, 3],
            infsup_max_spread: 0.2,
            convergence_case: "trigonometric".into(),
            convergence_levels: None,
            output_dir: PathBuf::from("."),
            vtk: false,
        }
    }
}

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub mesh_n: Option<usize>,
    pub degree: Option<usize>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn numbers(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_error(line, format!("{key}: '{t}' is not a finite number")))
        })
        .collect()
}

fn fixed<const N: usize>(line: usize, key: &str, value: &str) -> Result<[f64; N]> {
    let v = numbers(line, key, value)?;
    v.try_into()
        .map_err(|v: Vec<f64>| parse_error(line, format!("{key}: expected {N} numbers, got {}", v.len())))
}

fn counts(line: usize, key: &str, value: &str) -> Result<Vec<usize>> {
    let v: Vec<usize> = value
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_error(line, format!("{key}: '{t}' is not a count"))))
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(parse_error(line, format!("{key}: empty list")));
    }
    Ok(v)
}

fn count(line: usize, key: &str, value: &str) -> Result<usize> {
    value.trim().parse().map_err(|_| parse_error(line, format!("{key}: '{value}' is not a count")))
}

fn faces(line: usize, key: &str, value: &str) -> Result<FaceSet> {
    value.parse().map_err(|e: Error| parse_error(line, format!("{key}: {e}")))
}

/// Parses configuration text; unknown or duplicated keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut lame: Option<[f64; 2]> = None;
    let mut stiffness: Option<Matrix6<f64>> = None;
    let mut mesh_n: Option<usize> = None;
    let mut mesh_file: Option<PathBuf> = None;
    let xmin = FaceSet::single(CubeFace::XMin);
    let (mut elastic_d, mut magnetic_d) = (xmin, xmin);

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(parse_error(line, format!("duplicate key '{key}' (first on line {first})")));
        }
        match key {
            "mesh.n" => mesh_n = Some(count(line, key, value)?),
            "mesh.file" => mesh_file = Some(PathBuf::from(value)),
            "mesh.elastic_dirichlet" => elastic_d = faces(line, key, value)?,
            "mesh.magnetic_dirichlet" => magnetic_d = faces(line, key, value)?,
            "fem.degree" => {
                cfg.degree = Degree::from_order(count(line, key, value)?)
                    .map_err(|e| parse_error(line, e.to_string()))?
            }
            "material.lame" => lame = Some(fixed::<2>(line, key, value)?),
            "material.stiffness" => {
                stiffness = Some(Matrix6::from_row_slice(&fixed::<36>(line, key, value)?));
            }
            "material.coupling" => {
                cfg.material.coupling = Matrix6x3::from_row_slice(&fixed::<18>(line, key, value)?);
            }
            "material.permeability" => {
                let v = numbers(line, key, value)?;
                cfg.material.permeability = match v.len() {
                    1 => Matrix3::from_diagonal_element(v[0]),
                    9 => Matrix3::from_row_slice(&v),
                    n => return Err(parse_error(line, format!("{key}: expected 1 or 9 numbers, got {n}"))),
                };
            }
            "bc.traction" => cfg.neumann.traction = fixed::<3>(line, key, value)?,
            "bc.flux" => cfg.neumann.flux = fixed::<1>(line, key, value)?[0],
            "solver.type" => {
                cfg.solver.kind = value.parse::<SolverKind>().map_err(|e| parse_error(line, e.to_string()))?
            }
            "solver.tol" => {
                let tol = fixed::<1>(line, key, value)?[0];
                if tol <= 0.0 {
                    return Err(parse_error(line, "solver.tol must be positive"));
                }
                cfg.solver.tol = tol;
            }
            "solver.max_iterations" => cfg.solver.max_iterations = count(line, key, value)?,
            "penalty.t" => {
                let t = fixed::<1>(line, key, value)?[0];
                if t <= 0.0 {
                    return Err(parse_error(line, "penalty.t must be positive"));
                }
                cfg.penalty_t = t;
            }
            "infsup.levels" => cfg.infsup_levels = counts(line, key, value)?,
            "infsup.max_spread" => cfg.infsup_max_spread = fixed::<1>(line, key, value)?[0],
            "convergence.case" => cfg.convergence_case = value.to_string(),
            "convergence.levels" => cfg.convergence_levels = Some(counts(line, key, value)?),
            "output.dir" => cfg.output_dir = PathBuf::from(value),
            "output.vtk" => {
                cfg.vtk = match value {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(parse_error(line, format!("{key}: expected true or false"))),
                }
            }
            _ => {
                if let Some(face) = key.strip_prefix("bc.traction.") {
                    let face: CubeFace = face.parse().map_err(|e: Error| parse_error(line, e.to_string()))?;
                    cfg.neumann.face_traction.insert(face, fixed::<3>(line, key, value)?);
                } else if let Some(face) = key.strip_prefix("bc.flux.") {
                    let face: CubeFace = face.parse().map_err(|e: Error| parse_error(line, e.to_string()))?;
                    cfg.neumann.face_flux.insert(face, fixed::<1>(line, key, value)?[0]);
                } else {
                    return Err(parse_error(line, format!("unknown key '{key}'")));
                }
            }
        }
    }

    if let (Some(_), Some(_)) = (lame, stiffness) {
        return Err(parse_error(seen["material.stiffness"], "give either material.lame or material.stiffness"));
    }
    if let Some([l, m]) = lame {
        cfg.material.stiffness = isotropic_stiffness(l, m);
    }
    if let Some(c) = stiffness {
        cfg.material.stiffness = c;
    }
    cfg.mesh = match (mesh_file, mesh_n) {
        (Some(_), Some(_)) => {
            return Err(parse_error(seen["mesh.file"], "give either mesh.file or mesh.n"));
        }
        (Some(path), None) => MeshSource::File(path),
        (None, n) => MeshSource::UnitCube {
            n: n.unwrap_or(2),
            elastic_dirichlet: elastic_d,
            magnetic_dirichlet: magnetic_d,
        },
    };
    Ok(cfg)
}

/// Reads the configuration (defaults when `path` is `None`) and applies the
/// command-line overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", p.display())))?;
            let mut cfg = parse_config(&text)?;
            if let MeshSource::File(f) = &cfg.mesh {
                if f.is_relative() {
                    let base = p.parent().unwrap_or(Path::new(""));
                    cfg.mesh = MeshSource::File(base.join(f));
                }
            }
            cfg
        }
        None => RunConfig::default(),
    };
    if let Some(dir) = &overrides.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(k) = overrides.degree {
        cfg.degree = Degree::from_order(k)?;
    }
    if let Some(n) = overrides.mesh_n {
        if n == 0 {
            return Err(Error::InvalidArgument("--mesh-n must be positive".into()));
        }
        match &mut cfg.mesh {
            MeshSource::UnitCube { n: cur, .. } => *cur = n,
            MeshSource::File(_) => {
                return Err(Error::InvalidArgument("--mesh-n conflicts with mesh.file".into()));
            }
        }
        cfg.infsup_levels = (1..=n).collect();
        cfg.convergence_levels = Some(std::iter::successors(Some(2), |l| Some(l * 2)).take_while(|&l| l <= n.max(2)).collect());
    }
    if let MeshSource::File(f) = &cfg.mesh {
        if !f.is_file() {
            return Err(Error::InvalidArgument(format!("mesh file {} does not exist", f.display())));
        }
    }
    Ok(cfg)
}

/// Result of one command: exit code, one-line summary and written files.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl CommandOutcome {
    fn new(exit_code: i32, summary: impl Into<String>) -> Self {
        Self { exit_code, summary: summary.into(), files: Vec::new() }
    }

    fn failure(err: &Error) -> Self {
        Self::new(EXIT_FAILURE, err.to_string())
    }
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::InvalidArgument(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content)
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, exit_code: i32, summary: impl Into<String>) -> CommandOutcome {
        CommandOutcome { exit_code, summary: summary.into(), files: self.files }
    }
}

fn build_mesh(source: &MeshSource) -> Result<Mesh> {
    match source {
        MeshSource::UnitCube { n, elastic_dirichlet, magnetic_dirichlet } => {
            generate_unit_cube_mesh(*n, *elastic_dirichlet, *magnetic_dirichlet)
        }
        MeshSource::File(path) => read_mesh_file(path),
    }
}

/// Minimal positivity and tensor checks; exit 0 iff all pass.
pub fn cmd_check_material(cfg: &RunConfig) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let law = cfg.material.raw();
        let mp = check_minimal_positivity(&law.coupling)?;
        let report = validate_material(&law);
        let mut text = String::new();
        for (k, a) in mp.a_hat.iter().enumerate() {
            let _ = writeln!(text, "A_hat.{} = {a}", k + 1);
        }
        let _ = writeln!(text, "M = {}", mp.m);
        let _ = writeln!(text, "minimal_positivity = {}", if mp.satisfied { "satisfied" } else { "violated" });
        for c in &report.checks {
            let _ = writeln!(
                text,
                "check.{} = {} ({})",
                c.name.replace(' ', "_"),
                if c.passed { "pass" } else { "fail" },
                c.detail
            );
        }
        let mut out = Writer::new(&cfg.output_dir)?;
        out.write("material_report.txt", &text)?;
        let summary = if !mp.satisfied {
            format!("minimal positivity violated, M = {}", mp.m)
        } else if let Some(c) = report.first_failure() {
            format!("material check '{}' failed: {}", c.name, c.detail)
        } else {
            format!("material admissible, M = {}", mp.m)
        };
        let code = if report.passed() { EXIT_OK } else { EXIT_FAILURE };
        Ok(out.finish(code, summary))
    };
    run().unwrap_or_else(|e| CommandOutcome::failure(&e))
}

/// `fieldfmt 1` text for values per mesh node.
pub fn format_field(name: &str, values: &[Vec<f64>]) -> String {
    let kind = if values.first().map_or(1, Vec::len) == 1 { "scalar" } else { "vector" };
    let mut out = format!("fieldfmt 1\n{kind} {name} {}\n", values.len());
    for v in values {
        let line: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
        out += &line.join(" ");
        out.push('\n');
    }
    out
}

/// Parses a `fieldfmt 1` file back into per-node values.
pub fn parse_field(text: &str) -> Result<(String, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, m: &str| parse_error(line + 1, m.to_string());
    match lines.next() {
        Some((_, "fieldfmt 1")) => {}
        _ => return Err(bad(0, "expected 'fieldfmt 1'")),
    }
    let (i, head) = lines.next().ok_or_else(|| bad(1, "missing field header"))?;
    let parts: Vec<&str> = head.split_whitespace().collect();
    let (width, name, n) = match parts.as_slice() {
        ["scalar", name, n] => (1, name.to_string(), n),
        ["vector", name, n] => (3, name.to_string(), n),
        _ => return Err(bad(i, "expected 'scalar|vector <name> <count>'")),
    };
    let n: usize = n.parse().map_err(|_| bad(i, "bad count"))?;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let (i, l) = lines.next().ok_or_else(|| bad(i, "truncated field"))?;
        let v = numbers(i + 1, "field", l)?;
        if v.len() != width {
            return Err(bad(i, "wrong number of components"));
        }
        values.push(v);
    }
    Ok((name, values))
}

fn write_vtk(mesh: &Mesh, u: &[[f64; 3]], psi: &[f64]) -> String {
    let mut out = String::from("# vtk DataFile Version 3.0\nmagneto-elastic solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "CELLS {} {}", mesh.num_tets(), 5 * mesh.num_tets());
    for t in mesh.tets() {
        let _ = writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.num_tets());
    for _ in 0..mesh.num_tets() {
        out += "10\n";
    }
    let _ = writeln!(out, "POINT_DATA {}\nVECTORS displacement double", mesh.num_nodes());
    for v in &u[..mesh.num_nodes()] {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
    }
    out += "SCALARS potential double 1\nLOOKUP_TABLE default\n";
    for p in &psi[..mesh.num_nodes()] {
        let _ = writeln!(out, "{p:.17e}");
    }
    out
}

fn residual_report(
    cfg: &RunConfig,
    spaces: &FunctionSpacePair,
    sol: &SaddleSolution,
    load_norm: f64,
    energies: Option<(f64, f64)>,
) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "solver = {}", cfg.solver.kind);
    let _ = writeln!(text, "degree = {}", spaces.degree().order());
    let _ = writeln!(text, "unknowns_u = {}", sol.u.len());
    let _ = writeln!(text, "unknowns_psi = {}", sol.psi.len());
    let _ = writeln!(text, "iterations = {}", sol.iterations);
    let _ = writeln!(text, "residual_u = {:.6e}", sol.residual_u);
    let _ = writeln!(text, "residual_psi = {:.6e}", sol.residual_psi);
    let rel = relative_residual(sol, load_norm);
    let _ = writeln!(text, "relative_residual = {rel:.6e}");
    let _ = writeln!(text, "preconditioned_residual = {:.6e}", sol.preconditioned_residual);
    if let Some((w_mag, w_el)) = energies {
        let _ = writeln!(text, "W_mag = {w_mag:.12e}");
        let _ = writeln!(text, "W_el = {w_el:.12e}");
    }
    text
}

fn relative_residual(sol: &SaddleSolution, load_norm: f64) -> f64 {
    let r = sol.residual_u.hypot(sol.residual_psi);
    if load_norm > 0.0 {
        r / load_norm
    } else {
        r
    }
}

/// Assembles and solves one configuration; writes the field files and the
/// residual report.
pub fn cmd_solve(cfg: &RunConfig) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let mesh = build_mesh(&cfg.mesh)?;
        let law = cfg.material.law()?;
        let spaces = build_spaces(&mesh, cfg.degree)?;
        let options = AssemblyOptions { penalty_t: cfg.penalty_t, ..Default::default() };
        let system = assemble_system(&spaces, &law, &cfg.neumann, None, &options)?;
        let sol = solve(&system, &cfg.solver)?;
        let load_norm = system.l.norm().hypot(system.m.norm());
        let energies = compute_energies(&sol.u, &sol.psi, &spaces, &law, &cfg.neumann)?;

        let u = spaces.expand_displacement(&sol.u);
        let psi = spaces.expand_potential(&sol.psi);
        let nn = mesh.num_nodes();
        let mut out = Writer::new(&cfg.output_dir)?;
        out.write("displacement.field", &format_field("displacement", &u[..nn].iter().map(|v| v.to_vec()).collect::<Vec<_>>()))?;
        out.write("potential.field", &format_field("potential", &psi[..nn].iter().map(|&p| vec![p]).collect::<Vec<_>>()))?;
        out.write(
            "residual_report.txt",
            &residual_report(cfg, &spaces, &sol, load_norm, Some((energies.w_mag(), energies.w_el()))),
        )?;
        if cfg.vtk {
            out.write("solution.vtk", &write_vtk(&mesh, &u, &psi))?;
        }
        let rel = relative_residual(&sol, load_norm);
        let converged = cfg.solver.kind == SolverKind::Minres || rel <= DIRECT_RESIDUAL_TOL;
        let summary = format!(
            "{} solve: residual_u = {:.3e}, residual_psi = {:.3e}, iterations = {}",
            cfg.solver.kind, sol.residual_u, sol.residual_psi, sol.iterations
        );
        Ok(out.finish(if converged { EXIT_OK } else { EXIT_FAILURE }, summary))
    };
    run().unwrap_or_else(|e| CommandOutcome::failure(&e))
}

/// Inf-sup refinement study over generated cubes.
pub fn cmd_infsup(cfg: &RunConfig) -> CommandOutcome {
    let run = || -> Result<CommandOutcome> {
        let MeshSource::UnitCube { elastic_dirichlet, magnetic_dirichlet, .. } = cfg.mesh else {
            return Ok(CommandOutcome::new(EXIT_USAGE, "infsup needs a generated mesh family, not mesh.file"));
        };
        let law = cfg.material.law()?;
        if law.coupling.iter().all(|&x| x == 0.0) {
            return Ok(CommandOutcome::new(EXIT_FAILURE, "coupling absent, inf-sup trivially zero"));
        }
        let mp = check_minimal_positivity(&law.coupling)?;
        if !mp.satisfied {
            return Ok(CommandOutcome::new(
                EXIT_FAILURE,
                format!("minimal positivity violated, M = {}; the inf-sup study needs M > 0", mp.m),
            ));
        }
        let meshes = cfg
            .infsup_levels
            .iter()
            .map(|&n| generate_unit_cube_mesh(n, elastic_dirichlet, magnetic_dirichlet))
            .collect::<Result<Vec<_>>>()?;
        let study = match infsup_refinement_study(&meshes, cfg.degree, &law) {
            Err(Error::SizeLimit { size, limit }) => {
                return Ok(CommandOutcome::new(
                    EXIT_FAILURE,
                    format!("dense size {size} exceeds {limit}; use coarser infsup.levels (limit {DENSE_SIZE_LIMIT})"),
                ))
            }
            other => other?,
        };
        let mut out = Writer::new(&cfg.output_dir)?;
        out.write("infsup.csv", &study.to_csv())?;
        let mut text = String::new();
        let _ = writeln!(text, "levels = {}", cfg.infsup_levels.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "));
        let _ = writeln!(text, "degree = {}", cfg.degree.order());
        let _ = writeln!(text, "min_beta_h = {:.12e}", study.min_beta());
        let _ = writeln!(text, "spread = {:.12e}", study.spread);
        let _ = writeln!(text, "max_spread = {}", cfg.infsup_max_spread);
        let _ = writeln!(text, "coupling_absent = {}", study.coupling_absent);
        let passed = study.passes(cfg.infsup_max_spread);
        let _ = writeln!(text, "passed = {passed}");
        for (i, level) in study.levels.iter().enumerate() {
            for line in level.to_key_value().lines() {
                let _ = writeln!(text, "level.{i}.{line}");
            }
        }
        out.write("infsup_report.txt", &text)?;
        let summary = format!(
            "inf-sup study: min beta_h = {:.6e}, spread = {:.2}% (limit {:.0}%)",
            study.min_beta(),
            100.0 * study.spread,
            100.0 * cfg.infsup_max_spread
        );
        Ok(out.finish(if passed { EXIT_OK } else { EXIT_FAILURE }, summary))
    };
    run().unwrap_or_else(|e| CommandOutcome::failure(&e))
}

/// Manufactured-solution convergence study.
pub fn cmd_convergence(cfg: &RunConfig) -> CommandOutcome {
    let law = match cfg.material.law() {
        Ok(l) => l,
        Err(e) => return CommandOutcome::failure(&e),
    };
    let case = match make_manufactured_case(&cfg.convergence_case, &law) {
        Ok(c) => c,
        Err(e) => return CommandOutcome::new(EXIT_USAGE, e.to_string()),
    };
    let run = || -> Result<CommandOutcome> {
        let levels = cfg.convergence_levels.clone().unwrap_or_else(|| match cfg.degree {
            Degree::P1 => vec![2, 4, 8],
            Degree::P2 => vec![2, 4],
        });
        let table = run_convergence_study(&case, cfg.degree, &levels)?;
        let mut out = Writer::new(&cfg.output_dir)?;
        out.write("convergence.csv", &table.to_csv())?;
        let (l2, h1) = ConvergenceTable::rate_thresholds(table.degree);
        let passed = table.meets_thresholds();
        let mut text = String::new();
        let _ = writeln!(text, "case = {}", table.case);
        let _ = writeln!(text, "degree = {}", table.degree);
        let _ = writeln!(text, "levels = {}", levels.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "));
        let _ = writeln!(text, "threshold_L2 = {l2}");
        let _ = writeln!(text, "threshold_H1 = {h1}");
        let _ = writeln!(text, "exact_reproduction = {}", table.exact_reproduction);
        let _ = writeln!(text, "passed = {passed}");
        out.write("convergence_report.txt", &text)?;
        let summary = if table.exact_reproduction {
            format!("{} k={}: exact reproduction", table.case, table.degree)
        } else {
            let worst = table.rates().iter().fold([f64::INFINITY; 4], |acc, r| std::array::from_fn(|i| acc[i].min(r[i])));
            format!(
                "{} k={}: min rates L2_u {:.3}, H1_u {:.3}, L2_psi {:.3}, H1_psi {:.3} (thresholds {l2}, {h1})",
                table.case, table.degree, worst[0], worst[1], worst[2], worst[3]
            )
        };
        Ok(out.finish(if passed { EXIT_OK } else { EXIT_FAILURE }, summary))
    };
    run().unwrap_or_else(|e| CommandOutcome::failure(&e))
}

/// The four workflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckMaterial,
    Solve,
    Infsup,
    Convergence,
}

/// Loads the configuration and runs `command`. Configuration problems map to
/// exit code 2.
pub fn run(command: Command, config: Option<&Path>, overrides: &Overrides) -> CommandOutcome {
    let cfg = match load_config(config, overrides) {
        Ok(cfg) => cfg,
        Err(e) => return CommandOutcome::new(EXIT_USAGE, e.to_string()),
    };
    match command {
        Command::CheckMaterial => cmd_check_material(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Infsup => cmd_infsup(&cfg),
        Command::Convergence => cmd_convergence(&cfg),
    }
}
