//! Newest-vertex bisection.
//!
//! Local vertex 0 of every triangle is its newest vertex and the opposite
//! edge is its refinement edge. A marked triangle has all three edges
//! marked; after closure every triangle with a marked edge also has its
//! refinement edge marked, which makes recursive bisection conforming.

use std::collections::{HashMap, HashSet};

use super::{build_mesh, BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

struct Bisector {
    vertices: Vec<Vec2>,
    marked: HashSet<(usize, usize)>,
    midpoints: HashMap<(usize, usize), usize>,
    out: Vec<[usize; 3]>,
}

impl Bisector {
    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let vs = &mut self.vertices;
        *self.midpoints.entry(key(a, b)).or_insert_with(|| {
            vs.push((vs[a] + vs[b]) * 0.5);
            vs.len() - 1
        })
    }

    fn bisect(&mut self, [p, a, b]: [usize; 3]) {
        if !self.marked.contains(&key(a, b)) {
            self.out.push([p, a, b]);
            return;
        }
        let m = self.midpoint(a, b);
        self.bisect([m, p, a]);
        self.bisect([m, b, p]);
    }

    fn split_boundary(&self, [a, b]: [usize; 2], tag: BoundaryTag, out: &mut Vec<([usize; 2], BoundaryTag)>) {
        match self.midpoints.get(&key(a, b)) {
            Some(&m) => {
                self.split_boundary([a, m], tag, out);
                self.split_boundary([m, b], tag, out);
            }
            None => out.push(([a, b], tag)),
        }
    }
}

/// Bisects every marked element twice (into four children) plus whatever
/// neighbours conformity requires. Boundary tags are inherited.
pub fn refine(mesh: &Mesh, marked: &[bool]) -> Result<Mesh> {
    if marked.len() != mesh.n_elements() {
        return Err(Error::InvalidArgument(format!(
            "marker length {} does not match {} elements",
            marked.len(),
            mesh.n_elements()
        )));
    }
    let tris = mesh.triangles();
    let mut edges = HashSet::new();
    for (t, _) in tris.iter().zip(marked).filter(|(_, &m)| m) {
        for i in 0..3 {
            edges.insert(key(t[i], t[(i + 1) % 3]));
        }
    }
    loop {
        let mut changed = false;
        for t in tris {
            let r = key(t[1], t[2]);
            if !edges.contains(&r)
                && (edges.contains(&key(t[0], t[1])) || edges.contains(&key(t[2], t[0])))
            {
                edges.insert(r);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut b = Bisector {
        vertices: mesh.vertices().to_vec(),
        marked: edges,
        midpoints: HashMap::new(),
        out: Vec::with_capacity(tris.len() * 2),
    };
    for &t in tris {
        b.bisect(t);
    }
    let mut boundary = Vec::with_capacity(mesh.boundary().len() * 2);
    for &(e, tag) in mesh.boundary() {
        b.split_boundary(e, tag, &mut boundary);
    }
    build_mesh(b.vertices, b.out, boundary)
}

pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    refine(mesh, &vec![true; mesh.n_elements()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{jittered_square, structured_square, Diagonal};

    fn min_angle(m: &Mesh) -> f64 {
        (0..m.n_elements())
            .flat_map(|k| {
                let c = m.corners(k);
                (0..3).map(move |i| {
                    let (u, v) = (c[(i + 1) % 3] - c[i], c[(i + 2) % 3] - c[i]);
                    (u.dot(v) / (u.norm() * v.norm())).acos()
                })
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn uniform_refinement_halves_h() {
        let m = structured_square(1, Diagonal::Right, |_| BoundaryTag::Dirichlet).unwrap();
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.n_elements(), 8);
        assert!((r.h_max() - 0.5 * m.h_max()).abs() < 1e-12);
        let r2 = refine_uniform(&r).unwrap();
        assert_eq!(r2.n_elements(), 32);
        assert!((r2.h_max() - 0.25 * m.h_max()).abs() < 1e-12);
        assert_eq!(r2.boundary().len(), 16);
    }

    #[test]
    fn local_refinement_is_conforming_and_shape_regular() {
        let mut m = jittered_square(4, 0.2, 11, |p| {
            if p.x > 1.0 - 1e-12 {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            }
        })
        .unwrap();
        let angle0 = min_angle(&m);
        for step in 0..6 {
            let marked: Vec<bool> = (0..m.n_elements())
                .map(|k| {
                    let c = m.centroid(k);
                    c.x + c.y < 0.3 || k % (7 + step) == 0
                })
                .collect();
            m = refine(&m, &marked).unwrap();
            let total: f64 = (0..m.n_elements()).map(|k| m.area(k)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(min_angle(&m) > 0.2 * angle0);
        let neumann = m
            .boundary()
            .iter()
            .filter(|(_, t)| *t == BoundaryTag::Neumann)
            .count();
        assert!(neumann >= 4);
    }
}
