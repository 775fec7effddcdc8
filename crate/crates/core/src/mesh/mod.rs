//! Conforming triangulations of polygonal domains with tagged boundaries.

mod format;
mod generate;
mod patch;
mod refine;

use std::collections::HashMap;

pub use format::{read_mesh, write_mesh};
pub use generate::{jittered_square, label_longest_edge, structured_square, Diagonal};
pub use patch::{PatchKind, StarPatch};
pub use refine::{refine, refine_uniform};

use crate::error::{Error, Result};
use crate::geometry::{orient, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FacetKind {
    Interior,
    Dirichlet,
    Neumann,
}

/// An edge of the triangulation.
///
/// `vertices = [s, e]` is the counter-clockwise traversal of the edge in
/// the minus element, so `(e - s).rot_cw()` is parallel to `normal`.
/// The minus element is the lower element id; `normal` points out of it.
#[derive(Clone, Debug)]
pub struct Facet {
    pub vertices: [usize; 2],
    pub minus: usize,
    pub plus: Option<usize>,
    pub kind: FacetKind,
    pub length: f64,
    pub normal: Vec2,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.plus.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<([usize; 2], BoundaryTag)>,
    facets: Vec<Facet>,
    element_facets: Vec<[usize; 3]>,
    signs: Vec<[i8; 3]>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
    patches: Vec<StarPatch>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Builds a mesh; clockwise triangles are reoriented by swapping their last two vertices.
///
/// Local facet `i` of a triangle is the edge opposite local vertex `i`.
pub fn build_mesh(
    vertices: Vec<Vec2>,
    mut triangles: Vec<[usize; 3]>,
    boundary: Vec<([usize; 2], BoundaryTag)>,
) -> Result<Mesh> {
    let nv = vertices.len();
    if nv == 0 || triangles.is_empty() {
        return Err(Error::InvalidMesh("empty mesh".into()));
    }
    let (mut lo, mut hi) = (vertices[0], vertices[0]);
    for p in &vertices {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let bbox_area = (hi.x - lo.x) * (hi.y - lo.y);
    let mut used = vec![false; nv];
    let mut areas = Vec::with_capacity(triangles.len());
    let mut diameters = Vec::with_capacity(triangles.len());
    for (k, t) in triangles.iter_mut().enumerate() {
        if t.iter().any(|&i| i >= nv) {
            return Err(Error::InvalidMesh(format!("triangle {k} references a missing vertex")));
        }
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(Error::InvalidMesh(format!("triangle {k} repeats a vertex")));
        }
        let mut o = orient(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
        if o < 0.0 {
            t.swap(1, 2);
            o = -o;
        }
        if 0.5 * o < 1e-14 * bbox_area {
            return Err(Error::InvalidMesh(format!("triangle {k} is degenerate")));
        }
        areas.push(0.5 * o);
        let d = (0..3)
            .map(|i| (vertices[t[(i + 1) % 3]] - vertices[t[(i + 2) % 3]]).norm())
            .fold(0.0, f64::max);
        diameters.push(d);
        for &i in t.iter() {
            used[i] = true;
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Error::InvalidMesh(format!("vertex {i} belongs to no triangle")));
    }

    let mut tags: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    for &([a, b], tag) in &boundary {
        if a >= nv || b >= nv {
            return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) references a missing vertex")));
        }
        if tags.insert(edge_key(a, b), tag).is_some() {
            return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) tagged twice")));
        }
    }

    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut facets: Vec<Facet> = Vec::new();
    let mut element_facets = vec![[0usize; 3]; triangles.len()];
    let mut signs = vec![[0i8; 3]; triangles.len()];
    for (k, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (s, e) = (t[(i + 1) % 3], t[(i + 2) % 3]);
            let key = edge_key(s, e);
            match index.get(&key) {
                None => {
                    let id = facets.len();
                    index.insert(key, id);
                    let d = vertices[e] - vertices[s];
                    let length = d.norm();
                    facets.push(Facet {
                        vertices: [s, e],
                        minus: k,
                        plus: None,
                        kind: FacetKind::Interior,
                        length,
                        normal: d.rot_cw() * (1.0 / length),
                    });
                    element_facets[k][i] = id;
                    signs[k][i] = 1;
                }
                Some(&id) => {
                    let f = &mut facets[id];
                    if f.plus.is_some() {
                        return Err(Error::InvalidMesh(format!("edge ({s}, {e}) shared by more than two triangles")));
                    }
                    if f.vertices != [e, s] {
                        return Err(Error::InvalidMesh(format!("inconsistent orientation across edge ({s}, {e})")));
                    }
                    f.plus = Some(k);
                    element_facets[k][i] = id;
                    signs[k][i] = -1;
                }
            }
        }
    }
    for f in facets.iter_mut() {
        let key = edge_key(f.vertices[0], f.vertices[1]);
        match (f.plus, tags.remove(&key)) {
            (None, Some(BoundaryTag::Dirichlet)) => f.kind = FacetKind::Dirichlet,
            (None, Some(BoundaryTag::Neumann)) => f.kind = FacetKind::Neumann,
            (None, None) => {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge ({}, {}) has no tag",
                    f.vertices[0], f.vertices[1]
                )))
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidMesh(format!(
                    "interior edge ({}, {}) carries a boundary tag",
                    f.vertices[0], f.vertices[1]
                )))
            }
            (Some(_), None) => {}
        }
    }
    if let Some((&(a, b), _)) = tags.iter().next() {
        return Err(Error::InvalidMesh(format!("tagged edge ({a}, {b}) is not a mesh edge")));
    }
    check_hanging_nodes(&vertices, &facets)?;

    let mut mesh = Mesh {
        vertices,
        triangles,
        boundary,
        facets,
        element_facets,
        signs,
        areas,
        diameters,
        patches: Vec::new(),
    };
    mesh.patches = patch::build_patches(&mesh)?;
    Ok(mesh)
}

/// Rejects vertices lying in the relative interior of a boundary edge.
fn check_hanging_nodes(vertices: &[Vec2], facets: &[Facet]) -> Result<()> {
    let mut on_boundary: Vec<usize> = facets
        .iter()
        .filter(|f| f.is_boundary())
        .flat_map(|f| f.vertices)
        .collect();
    on_boundary.sort_unstable();
    on_boundary.dedup();
    for f in facets.iter().filter(|f| f.is_boundary()) {
        let (a, b) = (vertices[f.vertices[0]], vertices[f.vertices[1]]);
        let d = b - a;
        let l2 = d.dot(d);
        for &v in &on_boundary {
            if f.vertices.contains(&v) {
                continue;
            }
            let p = vertices[v] - a;
            let t = p.dot(d) / l2;
            if t > 1e-12 && t < 1.0 - 1e-12 && p.cross(d).abs() <= 1e-12 * l2 {
                return Err(Error::InvalidMesh(format!("hanging vertex {v} on edge ({}, {})", f.vertices[0], f.vertices[1])));
            }
        }
    }
    Ok(())
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, k: usize) -> [usize; 3] {
        self.triangles[k]
    }

    pub fn boundary(&self) -> &[([usize; 2], BoundaryTag)] {
        &self.boundary
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    /// Global facet ids of element `k`; entry `i` is opposite local vertex `i`.
    pub fn element_facets(&self, k: usize) -> [usize; 3] {
        self.element_facets[k]
    }

    /// `+1` when `k` is the minus element of its local facet `i`, `-1` otherwise.
    pub fn sign(&self, k: usize, i: usize) -> f64 {
        f64::from(self.signs[k][i])
    }

    pub fn local_facet(&self, k: usize, f: usize) -> Option<usize> {
        self.element_facets[k].iter().position(|&g| g == f)
    }

    pub fn area(&self, k: usize) -> f64 {
        self.areas[k]
    }

    pub fn diameter(&self, k: usize) -> f64 {
        self.diameters[k]
    }

    pub fn h_max(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn corners(&self, k: usize) -> [Vec2; 3] {
        self.triangles[k].map(|i| self.vertices[i])
    }

    pub fn centroid(&self, k: usize) -> Vec2 {
        let [a, b, c] = self.corners(k);
        (a + b + c) * (1.0 / 3.0)
    }

    /// Outward unit normal of local facet `i` of element `k`.
    pub fn outward_normal(&self, k: usize, i: usize) -> Vec2 {
        self.facets[self.element_facets[k][i]].normal * self.sign(k, i)
    }

    pub fn patches(&self) -> &[StarPatch] {
        &self.patches
    }

    pub fn patch(&self, z: usize) -> &StarPatch {
        &self.patches[z]
    }

    /// Elements sharing at least one vertex with `k`, including `k`.
    pub fn element_neighborhood(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.triangles[k]
            .iter()
            .flat_map(|&z| self.patches[z].elements.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Test hook: flips one orientation sign, producing an inconsistent mesh.
    #[doc(hidden)]
    pub fn with_flipped_sign(mut self, k: usize, i: usize) -> Mesh {
        self.signs[k][i] = -self.signs[k][i];
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Mesh {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let t = vec![[0, 1, 2], [0, 2, 3]];
        let b = vec![
            ([0, 1], BoundaryTag::Dirichlet),
            ([1, 2], BoundaryTag::Neumann),
            ([2, 3], BoundaryTag::Neumann),
            ([3, 0], BoundaryTag::Dirichlet),
        ];
        build_mesh(v, t, b).unwrap()
    }

    #[test]
    fn facets_and_orientation() {
        let m = square();
        assert_eq!(m.n_facets(), 5);
        let diag = m.facets().iter().find(|f| f.plus.is_some()).unwrap();
        assert_eq!(diag.minus, 0);
        assert_eq!(diag.plus, Some(1));
        for k in 0..2 {
            let c = m.centroid(k);
            for i in 0..3 {
                let f = m.facet(m.element_facets(k)[i]);
                let mid = (m.vertex(f.vertices[0]) + m.vertex(f.vertices[1])) * 0.5;
                assert!(m.outward_normal(k, i).dot(mid - c) > 0.0);
            }
        }
        let s: Vec<f64> = (0..3).map(|i| m.sign(1, i)).collect();
        assert_eq!(s.iter().filter(|&&x| x < 0.0).count(), 1);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)];
        let b = vec![
            ([0, 1], BoundaryTag::Dirichlet),
            ([1, 2], BoundaryTag::Dirichlet),
            ([2, 0], BoundaryTag::Dirichlet),
        ];
        let m = build_mesh(v, vec![[0, 1, 2]], b).unwrap();
        assert_eq!(m.triangle(0), [0, 2, 1]);
        assert!((m.area(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        let b = vec![
            ([0, 1], BoundaryTag::Dirichlet),
            ([1, 2], BoundaryTag::Dirichlet),
            ([2, 0], BoundaryTag::Dirichlet),
        ];
        assert!(build_mesh(v, vec![[0, 1, 2]], b).is_err());

        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let b = vec![([0, 1], BoundaryTag::Dirichlet), ([1, 2], BoundaryTag::Dirichlet)];
        let err = build_mesh(v, vec![[0, 1, 2]], b).unwrap_err();
        assert!(err.to_string().contains("no tag"));
    }

    #[test]
    fn rejects_hanging_vertex() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, -1.0),
        ];
        let t = vec![[0, 1, 2], [0, 4, 3], [3, 4, 1]];
        let b = vec![
            ([0, 1], BoundaryTag::Dirichlet),
            ([1, 2], BoundaryTag::Dirichlet),
            ([2, 0], BoundaryTag::Dirichlet),
            ([0, 4], BoundaryTag::Dirichlet),
            ([4, 1], BoundaryTag::Dirichlet),
            ([0, 3], BoundaryTag::Dirichlet),
            ([3, 1], BoundaryTag::Dirichlet),
        ];
        let err = build_mesh(v, t, b).unwrap_err();
        assert!(err.to_string().contains("hanging"), "{err}");
    }
}
