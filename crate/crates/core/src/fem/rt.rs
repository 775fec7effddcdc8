//! Raviart-Thomas spaces `RT(K, s) = P_s(K)^2 + x P_s(K)`.
//!
//! Degrees of freedom on `K`: for each local facet `F` and `j = 0..=s`,
//! `int_F tau . n_F L_{j,F}` (global facet orientation), then
//! `int_K tau . psi` for an `L^2(K)`-orthonormal basis `psi` of
//! `P_{s-1}(K)^2`, listed as all `(q, 0)` followed by all `(0, q)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::element::{ElementQuad, FacetQuad, LocalFacet};
use super::lagrange::dual_basis;
use super::legendre::legendre_all;
use super::poly::{mono_index, n_mono, Frame, ScalarPoly, VecPoly};
use super::space::monomial_table;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::mesh::Mesh;

/// `L^2(K)`-orthonormal basis of `P_p(K)`; row `r` holds monomial coefficients.
pub fn orthonormal_basis(mesh: &Mesh, k: usize, p: usize) -> DMatrix<f64> {
    let frame = Frame::of_element(mesh, k);
    let n = n_mono(p);
    let q = ElementQuad::new(mesh, k, 2 * p);
    let tab = monomial_table(&frame, p, &q.points);
    let mut g = DMatrix::zeros(n, n);
    for (qi, &w) in q.weights.iter().enumerate() {
        for a in 0..n {
            for b in 0..n {
                g[(a, b)] += w * tab.val[(a, qi)] * tab.val[(b, qi)];
            }
        }
    }
    let l = g.cholesky().expect("Gram matrix of monomials is SPD").l();
    l.try_inverse().expect("triangular factor is invertible")
}

/// Global coefficient vector of an `RT(s)` field.
#[derive(Clone, Debug, PartialEq)]
pub struct RtFlux {
    pub index: usize,
    /// `facet[f * (s + 1) + j]`.
    pub facet: Vec<f64>,
    /// `interior[k * s (s + 1) + l]`.
    pub interior: Vec<f64>,
}

impl RtFlux {
    pub fn zeros(mesh: &Mesh, s: usize) -> Self {
        Self {
            index: s,
            facet: vec![0.0; mesh.n_facets() * (s + 1)],
            interior: vec![0.0; mesh.n_elements() * s * (s + 1)],
        }
    }

    pub fn facet_moments(&self, f: usize) -> &[f64] {
        let m = self.index + 1;
        &self.facet[f * m..(f + 1) * m]
    }

    pub fn add_scaled(&mut self, s: f64, other: &RtFlux) -> Result<()> {
        if self.index != other.index {
            return Err(Error::IndexMismatch { expected: self.index, found: other.index });
        }
        for (a, b) in self.facet.iter_mut().zip(&other.facet) {
            *a += s * b;
        }
        for (a, b) in self.interior.iter_mut().zip(&other.interior) {
            *a += s * b;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RtSpace {
    s: usize,
    /// Per element: row `d` is the dual basis function `d` as `[cx | cy]`.
    basis: Vec<DMatrix<f64>>,
    /// Per element: orthonormal basis of `P_{s-1}(K)`.
    tests: Vec<DMatrix<f64>>,
    frames: Vec<Frame>,
}

impl RtSpace {
    pub fn new(mesh: &Mesh, s: usize) -> Result<Self> {
        let built: Result<Vec<_>> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|k| local_basis(mesh, k, s))
            .collect();
        let (basis, tests) = built?.into_iter().unzip();
        Ok(Self { s, basis, tests, frames: (0..mesh.n_elements()).map(|k| Frame::of_element(mesh, k)).collect() })
    }

    pub fn index(&self) -> usize {
        self.s
    }

    pub fn local_dim(&self) -> usize {
        (self.s + 1) * (self.s + 3)
    }

    pub fn n_interior(&self) -> usize {
        self.s * (self.s + 1)
    }

    pub fn n_dofs(&self, mesh: &Mesh) -> usize {
        mesh.n_facets() * (self.s + 1) + mesh.n_elements() * self.n_interior()
    }

    /// Global dof ids of element `k`, in local order.
    pub fn dofs(&self, mesh: &Mesh, k: usize) -> Vec<usize> {
        let m = self.s + 1;
        let ni = self.n_interior();
        let base = mesh.n_facets() * m;
        let mut out: Vec<usize> = mesh.element_facets(k).iter().flat_map(|&f| (0..m).map(move |j| f * m + j)).collect();
        out.extend((0..ni).map(|l| base + k * ni + l));
        out
    }

    pub fn frame(&self, k: usize) -> &Frame {
        &self.frames[k]
    }

    /// Orthonormal basis of `P_{s-1}(K)` used by the interior moments.
    pub fn tests(&self, k: usize) -> &DMatrix<f64> {
        &self.tests[k]
    }

    /// Local basis function `d` of element `k`.
    pub fn local_function(&self, k: usize, d: usize) -> VecPoly {
        let b = &self.basis[k];
        let n = n_mono(self.s + 1);
        VecPoly {
            degree: self.s + 1,
            cx: (0..n).map(|m| b[(d, m)]).collect(),
            cy: (0..n).map(|m| b[(d, n + m)]).collect(),
        }
    }

    pub fn local_moments(&self, mesh: &Mesh, flux: &RtFlux, k: usize) -> Vec<f64> {
        let m = self.s + 1;
        let ni = self.n_interior();
        let mut out: Vec<f64> = mesh.element_facets(k).iter().flat_map(|&f| flux.facet[f * m..(f + 1) * m].iter().copied()).collect();
        out.extend_from_slice(&flux.interior[k * ni..(k + 1) * ni]);
        out
    }

    /// The field on element `k`.
    pub fn field(&self, mesh: &Mesh, flux: &RtFlux, k: usize) -> Result<VecPoly> {
        if flux.index != self.s {
            return Err(Error::IndexMismatch { expected: self.s, found: flux.index });
        }
        let moments = self.local_moments(mesh, flux, k);
        let b = &self.basis[k];
        let n = n_mono(self.s + 1);
        let mut p = VecPoly::zero(self.s + 1);
        for (d, &c) in moments.iter().enumerate() {
            if c != 0.0 {
                for m in 0..n {
                    p.cx[m] += c * b[(d, m)];
                    p.cy[m] += c * b[(d, n + m)];
                }
            }
        }
        Ok(p)
    }

    /// Interior moments `(g, psi_l)_K` of a vector function.
    pub fn interior_moments(&self, mesh: &Mesh, k: usize, degree: usize, g: impl Fn(Vec2) -> Vec2) -> Vec<f64> {
        if self.s == 0 {
            return Vec::new();
        }
        let q = ElementQuad::new(mesh, k, degree);
        let t = &self.tests[k];
        let nt = t.nrows();
        let vals = t * monomial_table(&self.frames[k], self.s - 1, &q.points).val;
        let mut out = vec![0.0; 2 * nt];
        for (qi, (&x, &w)) in q.points.iter().zip(&q.weights).enumerate() {
            let gx = g(x);
            for r in 0..nt {
                out[r] += w * gx.x * vals[(r, qi)];
                out[nt + r] += w * gx.y * vals[(r, qi)];
            }
        }
        out
    }

    /// Canonical interpolant of a field given elementwise; facet moments
    /// are taken from the minus element.
    pub fn interpolate(&self, mesh: &Mesh, degree: usize, g: impl Fn(usize, Vec2) -> Vec2 + Sync) -> RtFlux {
        let s = self.s;
        let mut flux = RtFlux::zeros(mesh, s);
        let mut leg = vec![0.0; s + 1];
        for (f, facet) in mesh.facets().iter().enumerate() {
            let q = FacetQuad::on_facet(mesh, f, degree);
            for ((&x, &t), &w) in q.points.iter().zip(&q.params).zip(&q.weights) {
                legendre_all(s, t, &mut leg);
                let gn = g(facet.minus, x).dot(facet.normal);
                for j in 0..=s {
                    flux.facet[f * (s + 1) + j] += w * gn * leg[j];
                }
            }
        }
        let ni = self.n_interior();
        let interior: Vec<Vec<f64>> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|k| self.interior_moments(mesh, k, degree, |x| g(k, x)))
            .collect();
        for (k, m) in interior.into_iter().enumerate() {
            flux.interior[k * ni..(k + 1) * ni].copy_from_slice(&m);
        }
        flux
    }

    /// Re-expresses a field of a lower index in this space.
    pub fn embed(&self, mesh: &Mesh, from: &RtSpace, flux: &RtFlux) -> Result<RtFlux> {
        if from.s > self.s {
            return Err(Error::IndexMismatch { expected: self.s, found: from.s });
        }
        let fields: Vec<VecPoly> = (0..mesh.n_elements()).map(|k| from.field(mesh, flux, k)).collect::<Result<_>>()?;
        Ok(self.interpolate(mesh, 2 * self.s + 2, |k, x| fields[k].eval(&from.frames[k], x)))
    }
}

fn local_basis(mesh: &Mesh, k: usize, s: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let frame = Frame::of_element(mesh, k);
    let deg = s + 1;
    let nm = n_mono(deg);
    // Raw functions as [cx | cy] rows.
    let mut raw: Vec<Vec<f64>> = Vec::new();
    for m in 0..n_mono(s) {
        let mut r = vec![0.0; 2 * nm];
        r[m] = 1.0;
        raw.push(r);
        let mut r = vec![0.0; 2 * nm];
        r[nm + m] = 1.0;
        raw.push(r);
    }
    for b in 0..=s {
        let a = s - b;
        let mut r = vec![0.0; 2 * nm];
        r[mono_index(a + 1, b)] = 1.0;
        r[nm + mono_index(a, b + 1)] = 1.0;
        raw.push(r);
    }
    let n = raw.len();
    debug_assert_eq!(n, (s + 1) * (s + 3));

    let tests = if s > 0 { orthonormal_basis(mesh, k, s - 1) } else { DMatrix::zeros(0, 0) };
    let mut d = DMatrix::zeros(n, n);
    let mut leg = vec![0.0; s + 1];
    for i in 0..3 {
        let lf = LocalFacet::new(mesh, k, i);
        let q = lf.quadrature(2 * s + 2);
        let tab = monomial_table(&frame, deg, &q.points);
        for (qi, (&t, &w)) in q.params.iter().zip(&q.weights).enumerate() {
            legendre_all(s, t, &mut leg);
            for (r, coeffs) in raw.iter().enumerate() {
                let (mut vx, mut vy) = (0.0, 0.0);
                for m in 0..nm {
                    vx += coeffs[m] * tab.val[(m, qi)];
                    vy += coeffs[nm + m] * tab.val[(m, qi)];
                }
                let vn = vx * lf.normal.x + vy * lf.normal.y;
                for j in 0..=s {
                    d[(i * (s + 1) + j, r)] += w * vn * leg[j];
                }
            }
        }
    }
    if s > 0 {
        let q = ElementQuad::new(mesh, k, 2 * s + 2);
        let tab = monomial_table(&frame, deg, &q.points);
        let tv = &tests * monomial_table(&frame, s - 1, &q.points).val;
        let nt = tests.nrows();
        for (qi, &w) in q.weights.iter().enumerate() {
            for (r, coeffs) in raw.iter().enumerate() {
                let (mut vx, mut vy) = (0.0, 0.0);
                for m in 0..nm {
                    vx += coeffs[m] * tab.val[(m, qi)];
                    vy += coeffs[nm + m] * tab.val[(m, qi)];
                }
                for l in 0..nt {
                    d[(3 * (s + 1) + l, r)] += w * vx * tv[(l, qi)];
                    d[(3 * (s + 1) + nt + l, r)] += w * vy * tv[(l, qi)];
                }
            }
        }
    }
    let dual = dual_basis(d)?;
    let rawm = DMatrix::from_fn(n, 2 * nm, |r, c| raw[r][c]);
    Ok((dual * rawm, tests))
}

/// Scalar polynomial `q_r` of the orthonormal basis.
pub fn test_function(tests: &DMatrix<f64>, r: usize, degree: usize) -> ScalarPoly {
    ScalarPoly { degree, coeffs: tests.row(r).iter().copied().collect() }
}
