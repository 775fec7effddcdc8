//! Plain-text mesh format.
//!
//! ```text
//! V n        followed by n lines "x y"
//! T m        followed by m lines "i j k"   (0-based vertex indices)
//! B p        followed by p lines "i j tag" (tag is D or N)
//! ```
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write;

use super::{build_mesh, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(Error::Format { line: 0, message: "unexpected end of input".into() })
    }

    fn header(&mut self, key: &str) -> Result<usize> {
        let (line, f) = self.next()?;
        if f.len() != 2 || f[0] != key {
            return Err(Error::Format { line, message: format!("expected '{key} <count>'") });
        }
        parse(line, f[1])
    }
}

fn parse<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format { line, message: format!("cannot parse '{s}'") })
}

fn fields<'a>(lines: &mut Lines<'a>, n: usize) -> Result<(usize, Vec<&'a str>)> {
    let (line, f) = lines.next()?;
    if f.len() != n {
        return Err(Error::Format { line, message: format!("expected {n} fields") });
    }
    Ok((line, f))
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let nv = lines.header("V")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = fields(&mut lines, 2)?;
        vertices.push(Vec2::new(parse(line, f[0])?, parse(line, f[1])?));
    }
    let nt = lines.header("T")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = fields(&mut lines, 3)?;
        triangles.push([parse(line, f[0])?, parse(line, f[1])?, parse(line, f[2])?]);
    }
    let nb = lines.header("B")?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, f) = fields(&mut lines, 3)?;
        let tag = match f[2] {
            "D" => BoundaryTag::Dirichlet,
            "N" => BoundaryTag::Neumann,
            t => return Err(Error::Format { line, message: format!("unknown boundary tag '{t}'") }),
        };
        boundary.push(([parse(line, f[0])?, parse(line, f[1])?], tag));
    }
    build_mesh(vertices, triangles, boundary)
}

/// Serializes with shortest round-trip float formatting, so reading the
/// output back reproduces the mesh bit for bit.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "V {}", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:?} {:?}", p.x, p.y).unwrap();
    }
    writeln!(s, "T {}", mesh.n_elements()).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "B {}", mesh.boundary().len()).unwrap();
    for ([a, b], tag) in mesh.boundary() {
        let c = match tag {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
        };
        writeln!(s, "{a} {b} {c}").unwrap();
    }
    s
}
