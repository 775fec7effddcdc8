//! Per-element quadrature and oriented facet geometry.

use super::quadrature::{edge_rule, triangle_rule};
use crate::geometry::Vec2;
use crate::mesh::Mesh;

/// Local facet `i` of element `k`, seen from `k` but carrying the global orientation.
///
/// The orientation is derived from the element's sign, so `start`/`end`
/// and `normal` agree with the facet record of a consistent mesh.
#[derive(Clone, Copy, Debug)]
pub struct LocalFacet {
    pub global: usize,
    pub local: usize,
    pub sign: f64,
    pub start: Vec2,
    pub end: Vec2,
    pub normal: Vec2,
    pub length: f64,
}

impl LocalFacet {
    pub fn new(mesh: &Mesh, k: usize, i: usize) -> Self {
        let c = mesh.corners(k);
        let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
        let d = b - a;
        let length = d.norm();
        let outward = d.rot_cw() * (1.0 / length);
        let sign = mesh.sign(k, i);
        let (start, end) = if sign > 0.0 { (a, b) } else { (b, a) };
        Self {
            global: mesh.element_facets(k)[i],
            local: i,
            sign,
            start,
            end,
            normal: outward * sign,
            length,
        }
    }

    pub fn outward(&self) -> Vec2 {
        self.normal * self.sign
    }

    pub fn point(&self, t: f64) -> Vec2 {
        self.start + (self.end - self.start) * t
    }

    /// Quadrature points, parameters `t` in `[0, 1]` and weights including the length.
    pub fn quadrature(&self, degree: usize) -> FacetQuad {
        FacetQuad::along(self.start, self.end, degree)
    }
}

#[derive(Clone, Debug)]
pub struct FacetQuad {
    pub points: Vec<Vec2>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FacetQuad {
    pub fn along(start: Vec2, end: Vec2, degree: usize) -> Self {
        let r = edge_rule(degree);
        let len = (end - start).norm();
        Self {
            points: r.points.iter().map(|&t| start + (end - start) * t).collect(),
            params: r.points.clone(),
            weights: r.weights.iter().map(|w| w * len).collect(),
        }
    }

    /// Rule on a global facet, parameterized from its start to its end vertex.
    pub fn on_facet(mesh: &Mesh, f: usize, degree: usize) -> Self {
        let [s, e] = mesh.facet(f).vertices;
        Self::along(mesh.vertex(s), mesh.vertex(e), degree)
    }
}

#[derive(Clone, Debug)]
pub struct ElementQuad {
    pub points: Vec<Vec2>,
    /// Weights including the element area.
    pub weights: Vec<f64>,
}

impl ElementQuad {
    pub fn new(mesh: &Mesh, k: usize, degree: usize) -> Self {
        let r = triangle_rule(degree);
        let c = mesh.corners(k);
        let area = mesh.area(k);
        Self {
            points: r
                .points
                .iter()
                .map(|l| c[0] * l[0] + c[1] * l[1] + c[2] * l[2])
                .collect(),
            weights: r.weights.iter().map(|w| w * area).collect(),
        }
    }

    pub fn integrate(&self, mut g: impl FnMut(Vec2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, w)| w * g(x)).sum()
    }
}

/// Barycentric coordinates of `x` in element `k`.
pub fn barycentric(mesh: &Mesh, k: usize, x: Vec2) -> [f64; 3] {
    let [a, b, c] = mesh.corners(k);
    let d = 2.0 * mesh.area(k);
    let l1 = (x - a).cross(c - a) / d;
    let l2 = (b - a).cross(x - a) / d;
    [1.0 - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{jittered_square, BoundaryTag};

    #[test]
    fn local_facets_agree_with_global_records() {
        let m = jittered_square(5, 0.2, 1, |_| BoundaryTag::Dirichlet).unwrap();
        for k in 0..m.n_elements() {
            for i in 0..3 {
                let lf = LocalFacet::new(&m, k, i);
                let f = m.facet(lf.global);
                assert!((lf.normal - f.normal).norm() < 1e-14);
                assert!((lf.start - m.vertex(f.vertices[0])).norm() < 1e-15);
                assert!((lf.outward() - m.outward_normal(k, i)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn barycentric_of_corners() {
        let m = jittered_square(2, 0.2, 1, |_| BoundaryTag::Dirichlet).unwrap();
        let c = m.corners(3);
        for i in 0..3 {
            let l = barycentric(&m, 3, c[i]);
            for j in 0..3 {
                assert!((l[j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }
}
