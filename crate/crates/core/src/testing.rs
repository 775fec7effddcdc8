//! Fixtures shared by unit tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::fem::element::ElementQuad;
use crate::fem::FemSpace;
use crate::geometry::{Tensor2, Vec2};
use crate::mesh::{build_mesh, BoundaryTag, Mesh};
use crate::problem::{DiffusionProblem, ExactSolution};

/// Unit square split along the diagonal from (0,0) to (1,1).
pub fn two_element_mesh(tag: impl Fn(Vec2) -> BoundaryTag) -> Mesh {
    quad_mesh([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)], tag)
}

/// Quadrilateral `v` split along the diagonal from `v[0]` to `v[2]`.
pub fn quad_mesh(v: [Vec2; 4], tag: impl Fn(Vec2) -> BoundaryTag) -> Mesh {
    let v = v.to_vec();
    let edges = [[0, 1], [1, 2], [2, 3], [3, 0]];
    let boundary = edges.iter().map(|&[a, b]| ([a, b], tag((v[a] + v[b]) * 0.5))).collect();
    build_mesh(v, vec![[0, 1, 2], [0, 2, 3]], boundary).unwrap()
}

/// Problem with scalar coefficient `a(x)`, source `f` and exact solution `u`.
pub fn scalar_problem(
    a: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    f: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    u: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    grad: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    tag: impl Fn(Vec2) -> BoundaryTag + Send + Sync + 'static,
) -> DiffusionProblem {
    let a = Arc::new(a);
    let grad: Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync> = Arc::new(grad);
    let u: Arc<dyn Fn(Vec2) -> f64 + Send + Sync> = Arc::new(u);
    let (ac, gc) = (a.clone(), grad.clone());
    DiffusionProblem {
        name: "fixture".into(),
        coefficient: Arc::new(move |x| Tensor2::scalar(a(x))),
        source: Arc::new(f),
        dirichlet: u.clone(),
        neumann: Arc::new(move |x, n| -ac(x) * gc(x).dot(n)),
        boundary: Arc::new(tag),
        exact: Some(ExactSolution { value: u, gradient: grad }),
        kappa: 1.0,
    }
}

/// Dof values of the elementwise `L^2` projection of `g(k, x)`; requires
/// element-local dofs (the DG space).
pub fn elementwise_values(space: &FemSpace, mesh: &Mesh, g: impl Fn(usize, Vec2) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    for k in 0..mesh.n_elements() {
        let frame = crate::fem::poly::Frame::of_element(mesh, k);
        let q = ElementQuad::new(mesh, k, 2 * space.degree() + 4);
        let t = space.tabulate(&frame, k, &q.points);
        let n = t.val.nrows();
        let mut m = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (qi, (&x, &w)) in q.points.iter().zip(&q.weights).enumerate() {
            let gx = g(k, x);
            for i in 0..n {
                b[i] += w * gx * t.val[(i, qi)];
                for j in 0..n {
                    m[(i, j)] += w * t.val[(i, qi)] * t.val[(j, qi)];
                }
            }
        }
        let c = m.lu().solve(&b).unwrap();
        for (i, &d) in space.dofs(k).iter().enumerate() {
            out[d] = c[i];
        }
    }
    out
}

pub fn all_dirichlet(_: Vec2) -> BoundaryTag {
    BoundaryTag::Dirichlet
}
