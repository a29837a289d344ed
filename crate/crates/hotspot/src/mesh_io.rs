//! Plain-text quadrilateral mesh format.
//!
//! ```text
//! # comments and blank lines are ignored
//! mesh2d <nodes> <quads>
//! x y          (one line per node)
//! a b c d      (one line per quad, 0-based, counter-clockwise)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use hotspot_core::Mesh;

use crate::error::{CliError, Result};

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let err = |line: usize, message: String| CliError::MeshParse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty mesh file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n_nodes, n_quads) = match fields.as_slice() {
        ["mesh2d", n, m] => match (n.parse::<usize>(), m.parse::<usize>()) {
            (Ok(n), Ok(m)) => (n, m),
            _ => return Err(err(hline, format!("bad counts in header '{header}'"))),
        },
        _ => return Err(err(hline, "expected 'mesh2d <nodes> <quads>'".into())),
    };

    let mut nodes = Vec::with_capacity(n_nodes);
    let mut quads = Vec::with_capacity(n_quads);
    let mut last = hline;
    for (line, body) in lines.by_ref() {
        last = line;
        let tok: Vec<&str> = body.split_whitespace().collect();
        if nodes.len() < n_nodes {
            let xy: Vec<f64> = tok
                .iter()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(line, format!("bad node coordinates '{body}'")))?;
            match xy.as_slice() {
                [x, y] if x.is_finite() && y.is_finite() => nodes.push([*x, *y]),
                _ => {
                    return Err(err(
                        line,
                        format!("expected two finite coordinates, found '{body}'"),
                    ))
                }
            }
        } else if quads.len() < n_quads {
            let ids: Vec<usize> = tok
                .iter()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(line, format!("bad quad indices '{body}'")))?;
            match ids.as_slice() {
                [a, b, c, d] => quads.push([*a, *b, *c, *d]),
                _ => {
                    return Err(err(
                        line,
                        format!("expected four node indices, found '{body}'"),
                    ))
                }
            }
        } else {
            return Err(err(line, "trailing data after the last quad".into()));
        }
    }
    if nodes.len() < n_nodes || quads.len() < n_quads {
        return Err(err(
            last,
            format!(
                "file ends after {} of {n_nodes} nodes and {} of {n_quads} quads",
                nodes.len(),
                quads.len()
            ),
        ));
    }
    Ok(Mesh::new(nodes, quads)?)
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_mesh(&text, path)
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mesh2d {} {}", mesh.node_count(), mesh.quad_count());
    for [x, y] in mesh.nodes() {
        let _ = writeln!(s, "{x} {y}");
    }
    for [a, b, c, d] in mesh.quads() {
        let _ = writeln!(s, "{a} {b} {c} {d}");
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_mesh(mesh)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hotspot_core::mesh::structured_quad_mesh;

    fn parse(text: &str) -> Result<Mesh> {
        parse_mesh(text, Path::new("t.mesh"))
    }

    #[test]
    fn roundtrip_is_exact() {
        let mesh = structured_quad_mesh(1.0, 0.7, 3, 2).unwrap();
        let back = parse(&format_mesh(&mesh)).unwrap();
        assert_eq!(back.nodes(), mesh.nodes());
        assert_eq!(back.quads(), mesh.quads());
    }

    #[test]
    fn comments_and_blank_lines() {
        let m =
            parse("# unit square\n\nmesh2d 4 1\n0 0\n1 0 # corner\n1 1\n0 1\n\n0 1 2 3\n").unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.area(), 1.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("", 1),
            ("mesh 4 1\n", 1),
            ("mesh2d 4 1\n0 0\n1 x\n", 3),
            ("mesh2d 4 1\n0 0\n1 0\n1 1\n0 1\n0 1 2\n", 6),
            ("mesh2d 4 1\n0 0\n1 0\n1 1\n0 1\n", 5),
            ("mesh2d 4 1\n0 0\n1 0\n1 1\n0 1\n0 1 2 3\n0 1 2 3\n", 7),
        ];
        for (text, line) in cases {
            match parse(text) {
                Err(CliError::MeshParse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_topology_is_a_core_error() {
        let e = parse("mesh2d 4 1\n0 0\n1 0\n1 1\n0 1\n0 1 2 9\n").unwrap_err();
        assert_eq!(e.exit_code(), crate::error::exit::MESH);
    }
}
