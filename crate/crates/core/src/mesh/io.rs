//! Line-oriented ASCII mesh format:
//!
//! ```text
//! meshfmt 1
//! nodes N
//! x y z            (N lines)
//! tets T
//! i j k l          (T lines, 0-based)
//! facets F
//! a b c E M        (F lines; E, M: 0 = Dirichlet, 1 = Neumann)
//! ```
//!
//! Coordinates are written with the shortest representation that parses back
//! to the same `f64`, so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{BoundaryClass, Facet, Mesh, Point};
use crate::error::{Error, Result};

fn class_code(c: BoundaryClass) -> u8 {
    match c {
        BoundaryClass::Dirichlet => 0,
        BoundaryClass::Neumann => 1,
    }
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("meshfmt 1\n");
    let _ = writeln!(out, "nodes {}", mesh.nodes().len());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "tets {}", mesh.tets().len());
    for t in mesh.tets() {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "facets {}", mesh.facets().len());
    for f in mesh.facets() {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            f.nodes[0],
            f.nodes[1],
            f.nodes[2],
            class_code(f.elastic),
            class_code(f.magnetic)
        );
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-blank line with its 1-based number.
    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Ok((i + 1, tokens));
            }
        }
        Err(Error::Parse {
            line: self.last + 1,
            message: format!("unexpected end of input, expected {what}"),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let (line, tokens) = self.next(keyword)?;
        match tokens.as_slice() {
            [k, count] if *k == keyword => count.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad {keyword} count '{count}'"),
            }),
            _ => Err(Error::Parse {
                line,
                message: format!("expected '{keyword} <count>'"),
            }),
        }
    }
}

fn parse_all<T: FromStr>(line: usize, tokens: &[&str], expected: usize) -> Result<Vec<T>> {
    if tokens.len() != expected {
        return Err(Error::Parse {
            line,
            message: format!("expected {expected} values, found {}", tokens.len()),
        });
    }
    tokens
        .iter()
        .map(|t| {
            t.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse '{t}'"),
            })
        })
        .collect()
}

fn parse_class(line: usize, v: u8) -> Result<BoundaryClass> {
    match v {
        0 => Ok(BoundaryClass::Dirichlet),
        1 => Ok(BoundaryClass::Neumann),
        _ => Err(Error::Parse {
            line,
            message: format!("boundary class must be 0 or 1, got {v}"),
        }),
    }
}

/// Parses the ASCII mesh format and validates all mesh invariants.
pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);
    let (line, tokens) = lines.next("header")?;
    if tokens != ["meshfmt", "1"] {
        return Err(Error::Parse { line, message: "expected header 'meshfmt 1'".into() });
    }

    let n = lines.header("nodes")?;
    let mut nodes: Vec<Point> = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, tokens) = lines.next("node coordinates")?;
        let v: Vec<f64> = parse_all(line, &tokens, 3)?;
        nodes.push([v[0], v[1], v[2]]);
    }

    let t = lines.header("tets")?;
    let mut tets = Vec::with_capacity(t);
    for _ in 0..t {
        let (line, tokens) = lines.next("tet connectivity")?;
        let v: Vec<usize> = parse_all(line, &tokens, 4)?;
        tets.push([v[0], v[1], v[2], v[3]]);
    }

    let f = lines.header("facets")?;
    let mut facets = Vec::with_capacity(f);
    for _ in 0..f {
        let (line, tokens) = lines.next("facet record")?;
        let idx: Vec<usize> = parse_all(line, &tokens[..tokens.len().min(3)], 3)?;
        let classes: Vec<u8> = parse_all(line, &tokens[tokens.len().min(3)..], 2)?;
        facets.push(Facet {
            nodes: [idx[0], idx[1], idx[2]],
            elastic: parse_class(line, classes[0])?,
            magnetic: parse_class(line, classes[1])?,
        });
    }

    if let Ok((line, _)) = lines.next("") {
        return Err(Error::Parse { line, message: "trailing content after facets".into() });
    }

    Mesh::new(nodes, tets, facets)
}

pub fn read_mesh_file(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    read_mesh(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_unit_cube_mesh, CubeFace, FaceSet};

    const SINGLE_TET: &str = "meshfmt 1
nodes 4
0 0 0
1 0 0
0 1 0
0 0 1
tets 1
0 1 2 3
facets 4
1 2 3 1 1
0 3 2 0 1
0 1 3 1 0
0 2 1 1 1
";

    #[test]
    fn reads_single_tet() {
        let m = read_mesh(SINGLE_TET).unwrap();
        assert_eq!(m.num_tets(), 1);
        assert_eq!(m.facets()[1].elastic, BoundaryClass::Dirichlet);
        assert_eq!(m.facets()[2].magnetic, BoundaryClass::Dirichlet);
        assert_eq!(m.facets()[0].magnetic, BoundaryClass::Neumann);
    }

    #[test]
    fn out_of_range_tet_is_a_validation_error() {
        let text = SINGLE_TET.replace("0 1 2 3\nfacets", "0 1 2 7\nfacets");
        match read_mesh(&text) {
            Err(Error::Validation(msg)) => assert!(msg.contains("tet indices"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_counts_report_line() {
        let text = SINGLE_TET.replace("tets 1", "tets x");
        assert_eq!(
            read_mesh(&text).unwrap_err(),
            Error::Parse { line: 7, message: "bad tets count 'x'".into() }
        );
        let text = SINGLE_TET.replace("0 0 1\n", "0 0\n");
        assert!(matches!(read_mesh(&text), Err(Error::Parse { line: 6, .. })));
        assert!(matches!(read_mesh("meshfmt 2\n"), Err(Error::Parse { line: 1, .. })));
        let truncated: String = SINGLE_TET.lines().take(9).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_mesh(&truncated), Err(Error::Parse { .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let faces = FaceSet::single(CubeFace::XMin);
        let m = generate_unit_cube_mesh(2, faces, FaceSet::ALL)
            .unwrap()
            .scaled([0.1, 1.0 / 3.0, std::f64::consts::PI]);
        let back = read_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.nodes().iter().zip(m.nodes()) {
            for d in 0..3 {
                assert_eq!(a[d].to_bits(), b[d].to_bits());
            }
        }
    }
}
