//! Discrete trial spaces: conforming Lagrange, nonconforming
//! (odd-order Legendre-moment elements and the quadratic Fortin-Soulie
//! element) and discontinuous Lagrange.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::element::{ElementQuad, FacetQuad, LocalFacet};
use super::lagrange::{dual_basis, interior_lattice, lattice, nodal_basis, to_point};
use super::legendre::legendre_all;
use super::poly::{n_mono, Frame, ScalarPoly};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::mesh::{FacetKind, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Cg,
    Nc,
    Dg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cg => "cg",
            Method::Nc => "nc",
            Method::Dg => "dg",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cg" => Ok(Method::Cg),
            "nc" => Ok(Method::Nc),
            "dg" => Ok(Method::Dg),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

/// Basis functions evaluated at a set of points; entry `(i, q)` is
/// local function `i` at point `q`.
pub struct Tabulation {
    pub val: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
}

/// Monomials of `degree` and their gradients at `points`; entry `(m, q)`.
pub fn monomial_table(frame: &Frame, degree: usize, points: &[Vec2]) -> Tabulation {
    let n = n_mono(degree);
    let nq = points.len();
    let mut val = DMatrix::zeros(n, nq);
    let mut dx = DMatrix::zeros(n, nq);
    let mut dy = DMatrix::zeros(n, nq);
    let (mut v, mut gx, mut gy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (q, &x) in points.iter().enumerate() {
        frame.values_and_grads(degree, x, &mut v, &mut gx, &mut gy);
        for m in 0..n {
            val[(m, q)] = v[m];
            dx[(m, q)] = gx[m];
            dy[(m, q)] = gy[m];
        }
    }
    Tabulation { val, dx, dy }
}

#[derive(Clone, Debug)]
pub struct FemSpace {
    method: Method,
    order: usize,
    degree: usize,
    n_dofs: usize,
    dofs: Vec<Vec<usize>>,
    basis: Vec<DMatrix<f64>>,
}

fn cg_dofs(mesh: &Mesh, k: usize, order: usize) -> Vec<usize> {
    let nv = mesh.n_vertices();
    let nf = mesh.n_facets();
    let per_edge = order - 1;
    let per_cell = interior_lattice(order).len();
    let mut out: Vec<usize> = mesh.triangle(k).to_vec();
    for (i, &f) in mesh.element_facets(k).iter().enumerate() {
        let forward = mesh.sign(k, i) > 0.0;
        for j in 0..per_edge {
            let g = if forward { j } else { per_edge - 1 - j };
            out.push(nv + f * per_edge + g);
        }
    }
    for l in 0..per_cell {
        out.push(nv + nf * per_edge + k * per_cell + l);
    }
    out
}

fn cg_count(mesh: &Mesh, order: usize) -> usize {
    mesh.n_vertices() + mesh.n_facets() * (order - 1) + mesh.n_elements() * interior_lattice(order).len()
}

fn lagrange_local(mesh: &Mesh, k: usize, order: usize) -> Result<DMatrix<f64>> {
    let c = mesh.corners(k);
    let nodes: Vec<Vec2> = lattice(order).iter().map(|&l| to_point(&c, l)).collect();
    nodal_basis(&Frame::of_element(mesh, k), order, &nodes)
}

/// Nodal basis of `P_{k-3}` at the interior lattice points of degree `k`.
pub fn nc_interior_tests(mesh: &Mesh, el: usize, k: usize) -> Result<DMatrix<f64>> {
    let c = mesh.corners(el);
    let nodes: Vec<Vec2> = interior_lattice(k).iter().map(|&l| to_point(&c, l)).collect();
    nodal_basis(&Frame::of_element(mesh, el), k - 3, &nodes)
}

fn nc_local(mesh: &Mesh, el: usize, k: usize) -> Result<DMatrix<f64>> {
    let frame = Frame::of_element(mesh, el);
    let n = n_mono(k);
    let mut d = DMatrix::zeros(n, n);
    let mut leg = vec![0.0; k];
    for i in 0..3 {
        let lf = LocalFacet::new(mesh, el, i);
        let q = lf.quadrature(2 * k + 1);
        let tab = monomial_table(&frame, k, &q.points);
        for (qi, (&t, &w)) in q.params.iter().zip(&q.weights).enumerate() {
            legendre_all(k - 1, t, &mut leg);
            for j in 0..k {
                for m in 0..n {
                    d[(i * k + j, m)] += w * leg[j] * tab.val[(m, qi)];
                }
            }
        }
    }
    if k >= 3 {
        let tests = nc_interior_tests(mesh, el, k)?;
        let q = ElementQuad::new(mesh, el, 2 * k + 2);
        let tab = monomial_table(&frame, k, &q.points);
        let ttab = monomial_table(&frame, k - 3, &q.points);
        let pv = &tests * &ttab.val;
        for l in 0..tests.nrows() {
            for m in 0..n {
                d[(3 * k + l, m)] = (0..q.weights.len()).map(|qi| q.weights[qi] * pv[(l, qi)] * tab.val[(m, qi)]).sum();
            }
        }
    }
    dual_basis(d)
}

fn fs2_local(mesh: &Mesh, k: usize) -> Result<DMatrix<f64>> {
    let lag = lagrange_local(mesh, k, 2)?;
    let mut b = DMatrix::zeros(7, 6);
    b.view_mut((0, 0), (6, 6)).copy_from(&lag);
    for i in 0..6 {
        let node = if i < 3 { -1.0 } else { 0.5 };
        for m in 0..6 {
            b[(6, m)] += node * lag[(i, m)];
        }
    }
    Ok(b)
}

impl FemSpace {
    /// Builds the space. `Nc` accepts odd orders and order 2 (Fortin-Soulie).
    pub fn new(mesh: &Mesh, method: Method, order: usize) -> Result<Self> {
        let unsupported = Error::UnsupportedOrder { method: method.name(), order };
        if order == 0 || order > 8 {
            return Err(unsupported);
        }
        let ne = mesh.n_elements();
        let (n_dofs, dofs, basis, degree): (usize, Vec<Vec<usize>>, Result<Vec<_>>, usize) = match method {
            Method::Cg => (
                cg_count(mesh, order),
                (0..ne).map(|k| cg_dofs(mesh, k, order)).collect(),
                (0..ne).into_par_iter().map(|k| lagrange_local(mesh, k, order)).collect(),
                order,
            ),
            Method::Dg => {
                let n = n_mono(order);
                (
                    ne * n,
                    (0..ne).map(|k| (k * n..(k + 1) * n).collect()).collect(),
                    (0..ne).into_par_iter().map(|k| lagrange_local(mesh, k, order)).collect(),
                    order,
                )
            }
            Method::Nc if order == 2 => {
                let base = cg_count(mesh, 2);
                (
                    base + ne,
                    (0..ne)
                        .map(|k| {
                            let mut d = cg_dofs(mesh, k, 2);
                            d.push(base + k);
                            d
                        })
                        .collect(),
                    (0..ne).into_par_iter().map(|k| fs2_local(mesh, k)).collect(),
                    2,
                )
            }
            Method::Nc if order % 2 == 1 => {
                let nf = mesh.n_facets();
                let m = interior_lattice(order).len();
                (
                    nf * order + ne * m,
                    (0..ne)
                        .map(|k| {
                            let mut d: Vec<usize> = mesh
                                .element_facets(k)
                                .iter()
                                .flat_map(|&f| (0..order).map(move |j| f * order + j))
                                .collect();
                            d.extend((0..m).map(|l| nf * order + k * m + l));
                            d
                        })
                        .collect(),
                    (0..ne).into_par_iter().map(|k| nc_local(mesh, k, order)).collect(),
                    order,
                )
            }
            Method::Nc => return Err(unsupported),
        };
        Ok(Self { method, order, degree, n_dofs, dofs, basis: basis? })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Polynomial degree of the local functions.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_fortin_soulie(&self) -> bool {
        self.method == Method::Nc && self.order == 2
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn dofs(&self, k: usize) -> &[usize] {
        &self.dofs[k]
    }

    /// Row `i` holds the monomial coefficients of local function `i`.
    pub fn basis(&self, k: usize) -> &DMatrix<f64> {
        &self.basis[k]
    }

    pub fn local_function(&self, k: usize, i: usize) -> ScalarPoly {
        ScalarPoly { degree: self.degree, coeffs: self.basis[k].row(i).iter().copied().collect() }
    }

    pub fn tabulate(&self, frame: &Frame, k: usize, points: &[Vec2]) -> Tabulation {
        let m = monomial_table(frame, self.degree, points);
        let b = &self.basis[k];
        Tabulation { val: b * &m.val, dx: b * &m.dx, dy: b * &m.dy }
    }

    /// Restriction of a global coefficient vector to element `k`.
    pub fn local_poly(&self, k: usize, coeffs: &[f64]) -> ScalarPoly {
        let b = &self.basis[k];
        let mut out = vec![0.0; b.ncols()];
        for (i, &g) in self.dofs[k].iter().enumerate() {
            let c = coeffs[g];
            if c != 0.0 {
                for m in 0..b.ncols() {
                    out[m] += c * b[(i, m)];
                }
            }
        }
        ScalarPoly { degree: self.degree, coeffs: out }
    }

    fn lagrange_points(&self, mesh: &Mesh, k: usize) -> Vec<Vec2> {
        let order = if self.is_fortin_soulie() { 2 } else { self.order };
        let c = mesh.corners(k);
        lattice(order).iter().map(|&l| to_point(&c, l)).collect()
    }

    /// Degrees of freedom fixed by Dirichlet data and their values.
    pub fn dirichlet_values(&self, mesh: &Mesh, g: &dyn Fn(Vec2) -> f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        match self.method {
            Method::Dg => {}
            Method::Nc if !self.is_fortin_soulie() => {
                let k = self.order;
                let mut leg = vec![0.0; k];
                for (f, facet) in mesh.facets().iter().enumerate() {
                    if facet.kind != FacetKind::Dirichlet {
                        continue;
                    }
                    let q = FacetQuad::on_facet(mesh, f, 2 * k + 6);
                    let mut m = vec![0.0; k];
                    for ((&x, &t), &w) in q.points.iter().zip(&q.params).zip(&q.weights) {
                        legendre_all(k - 1, t, &mut leg);
                        let gx = g(x);
                        for j in 0..k {
                            m[j] += w * gx * leg[j];
                        }
                    }
                    out.extend(m.into_iter().enumerate().map(|(j, v)| (f * k + j, v)));
                }
            }
            _ => {
                let mut seen = vec![false; self.n_dofs];
                let order = if self.is_fortin_soulie() { 2 } else { self.order };
                for k in 0..mesh.n_elements() {
                    let pts = self.lagrange_points(mesh, k);
                    for i in 0..3 {
                        if mesh.facet(mesh.element_facets(k)[i]).kind != FacetKind::Dirichlet {
                            continue;
                        }
                        let mut local = vec![(i + 1) % 3, (i + 2) % 3];
                        local.extend((0..order - 1).map(|j| 3 + i * (order - 1) + j));
                        for l in local {
                            let d = self.dofs[k][l];
                            if !seen[d] {
                                seen[d] = true;
                                out.push((d, g(pts[l])));
                            }
                        }
                    }
                }
            }
        }
        out.sort_by_key(|p| p.0);
        out
    }

    /// Canonical interpolant: nodal for Lagrange-type spaces, moments for
    /// the odd-order nonconforming space. The Fortin-Soulie interpolant is
    /// the quadratic nodal one (bubble coefficient zero).
    pub fn interpolate(&self, mesh: &Mesh, f: &dyn Fn(Vec2) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        if self.method == Method::Nc && !self.is_fortin_soulie() {
            let k = self.order;
            let mut leg = vec![0.0; k];
            for el in 0..mesh.n_elements() {
                for i in 0..3 {
                    let lf = LocalFacet::new(mesh, el, i);
                    let q = lf.quadrature(2 * k + 6);
                    for ((&x, &t), &w) in q.points.iter().zip(&q.params).zip(&q.weights) {
                        legendre_all(k - 1, t, &mut leg);
                        let fx = f(x);
                        for j in 0..k {
                            out[lf.global * k + j] += w * fx * leg[j];
                        }
                    }
                }
                if k >= 3 {
                    let tests = nc_interior_tests(mesh, el, k).expect("unisolvent");
                    let frame = Frame::of_element(mesh, el);
                    let q = ElementQuad::new(mesh, el, 2 * k + 6);
                    let pv = &tests * monomial_table(&frame, k - 3, &q.points).val;
                    for l in 0..tests.nrows() {
                        out[self.dofs[el][3 * k + l]] =
                            (0..q.weights.len()).map(|qi| q.weights[qi] * pv[(l, qi)] * f(q.points[qi])).sum();
                    }
                }
            }
            // Every interior facet was visited from both sides.
            for (fid, facet) in mesh.facets().iter().enumerate() {
                if facet.plus.is_some() {
                    for j in 0..k {
                        out[fid * k + j] *= 0.5;
                    }
                }
            }
            return out;
        }
        for k in 0..mesh.n_elements() {
            for (l, x) in self.lagrange_points(mesh, k).into_iter().enumerate() {
                out[self.dofs[k][l]] = f(x);
            }
        }
        out
    }
}
