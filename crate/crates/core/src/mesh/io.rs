//! Plain-text mesh files.
//!
//! ```text
//! dim 2
//! vertices N
//! x y            (N lines)
//! triangles M
//! v0 v1 v2 k     (M lines, k = local index of the newest vertex)
//! boundary K
//! va vb T        (K lines, T in {D, N, R})
//! ```
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryTag, Triangulation};
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &Triangulation) -> String {
    let mut s = String::new();
    writeln!(s, "dim 2").unwrap();
    writeln!(s, "vertices {}", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        // {:?} prints the shortest representation that round-trips exactly
        writeln!(s, "{:?} {:?}", p[0], p[1]).unwrap();
    }
    writeln!(s, "triangles {}", mesh.n_triangles()).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "{} {} {} 2", t[0], t[1], t[2]).unwrap();
    }
    let b = mesh.boundary_edges();
    writeln!(s, "boundary {}", b.len()).unwrap();
    for (a, c, tag) in b {
        writeln!(s, "{a} {c} {}", tag.letter()).unwrap();
    }
    s
}

/// Parses a mesh file and verifies geometry and the matching condition.
pub fn read_mesh(text: &str) -> Result<Triangulation> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or(Error::MeshParse { line: 0, msg: format!("unexpected end of file, expected {what}") });
    let header = |(line, l): (usize, &str), key: &str| -> Result<usize> {
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::MeshParse { line, msg: format!("expected `{key}`") });
        }
        let n = it.next().and_then(|x| x.parse().ok()).ok_or(Error::MeshParse { line, msg: format!("`{key}` needs a count") })?;
        Ok(n)
    };
    let dim = header(next("dim")?, "dim")?;
    if dim != 2 {
        return Err(Error::MeshParse { line: 1, msg: format!("only dim 2 is supported, got {dim}") });
    }
    let nv = header(next("vertices")?, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = next("a vertex")?;
        let v: Vec<f64> = parse_fields(line, l)?;
        if v.len() != 2 {
            return Err(Error::MeshParse { line, msg: "vertex needs two coordinates".into() });
        }
        vertices.push([v[0], v[1]]);
    }
    let nt = header(next("triangles")?, "triangles")?;
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, l) = next("a triangle")?;
        let v: Vec<usize> = parse_fields(line, l)?;
        if v.len() != 4 || v[3] > 2 {
            return Err(Error::MeshParse { line, msg: "triangle needs `v0 v1 v2 newest` with newest in 0..3".into() });
        }
        let k = v[3];
        tris.push([v[(k + 1) % 3], v[(k + 2) % 3], v[k]]);
    }
    let nb = header(next("boundary")?, "boundary")?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, l) = next("a boundary edge")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        let parsed = (f.len() == 3).then(|| Some((f[0].parse().ok()?, f[1].parse().ok()?, BoundaryTag::from_letter(f[2])?))).flatten();
        let Some(e) = parsed else {
            return Err(Error::MeshParse { line, msg: "boundary edge needs `va vb tag`".into() });
        };
        boundary.push(e);
    }
    let mesh = Triangulation::new(vertices, tris, &boundary)?;
    mesh.check_matching()?;
    Ok(mesh)
}

fn parse_fields<T: std::str::FromStr>(line: usize, l: &str) -> Result<Vec<T>> {
    l.split_whitespace().map(|x| x.parse().map_err(|_| Error::MeshParse { line, msg: format!("cannot parse `{x}`") })).collect()
}

pub fn load_mesh(path: &Path) -> Result<Triangulation> {
    read_mesh(&std::fs::read_to_string(path)?)
}
