//! Vertex-patch correction for conforming solutions, index 0.
//!
//! On the patch of `z` with elements `K_1..K_T` and edges `F_1..F_E`
//! through `z`, the unknowns are `x_i = |F_i| sigma_z . n_{F_i} sign_z(F_i)`
//! and testing with `1_{K_i}` gives `x_i - x_{i+1} = r(lambda_z 1_{K_i})`.

use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;

use super::cg_orth::facet_coefficient;
use super::residual::ResidualOperator;
use crate::error::{Error, Result};
use crate::fem::element::ElementQuad;
use crate::fem::lagrange::poly_from_barycentric;
use crate::fem::rt::{RtFlux, RtSpace};
use crate::fem::Method;
use crate::mesh::{FacetKind, Mesh, PatchKind, StarPatch};
use crate::problem::Coefficients;

/// Particular solution of `x_i - x_{i+1} = r_i` (`i < E`) with
/// `sum_i a_i x_i = 0`: `x_1 = sum_{i<E} (Lambda_bar_i / Lambda) r_i` and
/// `x_m = x_1 - sum_{i<m} r_i`, where `Lambda_i = a_1 + .. + a_i`.
/// `r` holds the first `E - 1` equations.
pub fn closed_form(a: &[f64], r: &[f64]) -> Vec<f64> {
    let e = a.len();
    assert_eq!(r.len() + 1, e, "closed form needs E - 1 right-hand sides");
    let total: f64 = a.iter().sum();
    let mut partial = 0.0;
    let mut x1 = 0.0;
    for i in 0..e - 1 {
        partial += a[i];
        x1 += (total - partial) / total * r[i];
    }
    let mut x = Vec::with_capacity(e);
    x.push(x1);
    for i in 0..e - 1 {
        let next = x[i] - r[i];
        x.push(next);
    }
    x
}

/// The cyclic difference matrix `M_n`: rows `e_i - e_{i+1}`, last row `e_n - e_1`.
pub fn cyclic_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if j == (i + 1) % n {
            -1.0
        } else {
            0.0
        }
    })
}

/// The patch system: one row per element, one column per non-Neumann edge
/// through `z` (in patch order); also returns those columns' positions.
pub fn patch_system(mesh: &Mesh, z: usize) -> (DMatrix<f64>, Vec<usize>) {
    let patch = mesh.patch(z);
    let t = patch.elements.len();
    let e = patch.facets.len();
    let cols: Vec<usize> = (0..e).filter(|&i| mesh.facet(patch.facets[i]).kind != FacetKind::Neumann).collect();
    let mut m = DMatrix::zeros(t, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        // Element i has the edge as its entry (+1), element i - 1 as its exit (-1).
        if i < t {
            m[(i, c)] += 1.0;
        }
        let prev = if i == 0 { if patch.is_interior() { Some(t - 1) } else { None } } else { Some(i - 1) };
        if let Some(p) = prev {
            m[(p, c)] -= 1.0;
        }
    }
    (m, cols)
}

/// Numerical kernel dimension of the patch system of `z`.
pub fn kernel_dimension(mesh: &Mesh, z: usize) -> usize {
    let (m, cols) = patch_system(mesh, z);
    if cols.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let tol = 1e-10 * sv.max().max(1.0);
    cols.len() - sv.iter().filter(|&&v| v > tol).count()
}

#[derive(Clone, Debug)]
pub struct PatchCorrection {
    pub vertex: usize,
    pub kind: PatchKind,
    /// `r(lambda_z 1_{K_i})` in patch order.
    pub residuals: Vec<f64>,
    /// Particular solution `x_i` in patch order.
    pub particular: Vec<f64>,
    /// Normalized kernel vector and the multiplier `mu_z`; present when the
    /// patch system has a one-dimensional kernel.
    pub null: Option<NullComponent>,
}

#[derive(Clone, Debug)]
pub struct NullComponent {
    pub x: Vec<f64>,
    pub mu: f64,
}

impl PatchCorrection {
    /// Edge unknowns after removing `mu_z` times the kernel vector.
    pub fn corrected(&self) -> Vec<f64> {
        match &self.null {
            Some(n) => self.particular.iter().zip(&n.x).map(|(p, q)| p - n.mu * q).collect(),
            None => self.particular.clone(),
        }
    }
}

/// `(A^{-1} tau_i, tau_j)_K` for the lowest-order basis with unit facet moments.
pub fn rt0_mass(mesh: &Mesh, rt0: &RtSpace, coeffs: &Coefficients, k: usize) -> Matrix3<f64> {
    let ainv = coeffs.tensor[k].inverse();
    let q = ElementQuad::new(mesh, k, 2);
    let fns: Vec<_> = (0..3).map(|d| rt0.local_function(k, d)).collect();
    let mut m = Matrix3::zeros();
    for (&x, &w) in q.points.iter().zip(&q.weights) {
        let v: Vec<_> = fns.iter().map(|p| p.eval(rt0.frame(k), x)).collect();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] += w * ainv.apply(v[i]).dot(v[j]);
            }
        }
    }
    m
}

/// Weighted inner product `(A^{-1} tau, rho)_{omega_z}` of two patch fields
/// given by their edge unknowns.
pub fn patch_inner(mesh: &Mesh, patch: &StarPatch, masses: &[Matrix3<f64>], x: &[f64], y: &[f64]) -> f64 {
    let e = patch.facets.len();
    let mut total = 0.0;
    for (i, &el) in patch.elements.iter().enumerate() {
        let mut u = [0.0; 3];
        let mut v = [0.0; 3];
        for j in [i, (i + 1) % e] {
            let f = patch.facets[j];
            let li = mesh.local_facet(el, f).expect("patch edge lies on the element");
            // Facet moment int_F tau . n_F = sign_z(F) x_F.
            u[li] = patch.signs[j] * x[j];
            v[li] = patch.signs[j] * y[j];
        }
        let m = &masses[el];
        for a in 0..3 {
            for b in 0..3 {
                total += u[a] * m[(a, b)] * v[b];
            }
        }
    }
    total
}

/// `floor` bounds the round-off in the residuals: `sum_K (||f||_K + ||sigma~||_{H(div),K}) |K|^{1/2}`.
fn solve_patch(
    mesh: &Mesh,
    coeffs: &Coefficients,
    patch: &StarPatch,
    r: &[f64],
    floor: f64,
    masses: &[Matrix3<f64>],
) -> Result<PatchCorrection> {
    let e = patch.facets.len();
    let t = patch.elements.len();
    let scale = r.iter().map(|v| v.abs()).sum::<f64>().max(1e-4 * floor).max(f64::MIN_POSITIVE);
    let compat = r.iter().sum::<f64>();
    let (particular, null) = match patch.kind {
        PatchKind::Interior | PatchKind::DirichletDirichlet => {
            if patch.kind == PatchKind::Interior && compat.abs() > 1e-8 * scale {
                return Err(Error::InconsistentPatch { vertex: patch.vertex, defect: compat });
            }
            let a: Vec<f64> = patch.facets.iter().map(|&f| 1.0 / facet_coefficient(coeffs, mesh, f)).collect();
            let x = closed_form(&a, &r[..e - 1]);
            // Kernel of the difference operator: all unknowns equal.
            let ones = vec![1.0; e];
            let norm = patch_inner(mesh, patch, masses, &ones, &ones).sqrt();
            let null: Vec<f64> = ones.iter().map(|v| v / norm).collect();
            let mu = patch_inner(mesh, patch, masses, &x, &null);
            (x, Some(NullComponent { x: null, mu }))
        }
        PatchKind::NeumannNeumann => {
            if compat.abs() > 1e-8 * scale {
                return Err(Error::InconsistentPatch { vertex: patch.vertex, defect: compat });
            }
            // x_1 = x_E = 0; keep the first T - 1 element equations.
            let mut x = vec![0.0; e];
            if t > 1 {
                let b = cyclic_matrix(t + 1).view((0, 1), (t - 1, t - 1)).into_owned();
                let sol = b
                    .lu()
                    .solve(&DVector::from_column_slice(&r[..t - 1]))
                    .ok_or_else(|| Error::Solver(format!("singular Neumann patch at vertex {}", patch.vertex)))?;
                x[1..t].copy_from_slice(sol.as_slice());
            }
            (x, None)
        }
        PatchKind::Mixed { neumann_first } => {
            // Drop the column of the Neumann terminal edge of M_{T x (T+1)}.
            let full = DMatrix::from_fn(t, t + 1, |i, j| if i == j { 1.0 } else if j == i + 1 { -1.0 } else { 0.0 });
            let c = if neumann_first { full.columns(1, t).into_owned() } else { full.columns(0, t).into_owned() };
            let sol = c
                .lu()
                .solve(&DVector::from_column_slice(r))
                .ok_or_else(|| Error::Solver(format!("singular mixed patch at vertex {}", patch.vertex)))?;
            let mut x = vec![0.0; e];
            let off = usize::from(neumann_first);
            x[off..off + t].copy_from_slice(sol.as_slice());
            (x, None)
        }
    };
    Ok(PatchCorrection { vertex: patch.vertex, kind: patch.kind, residuals: r.to_vec(), particular, null })
}

/// `r(lambda_z 1_K)` for every element of the patch, in patch order.
pub fn patch_residuals(op: &ResidualOperator, z: usize) -> Vec<f64> {
    let mesh = op.sol.mesh;
    mesh.patch(z)
        .elements
        .iter()
        .map(|&el| {
            let lv = mesh.triangle(el).iter().position(|&v| v == z).unwrap();
            op.apply(el, &poly_from_barycentric(mesh, el, 1, |l| l[lv]))
        })
        .collect()
}

pub fn cg_pou_correction(op: &ResidualOperator) -> Result<(RtFlux, Vec<PatchCorrection>)> {
    let sol = op.sol;
    if sol.method() != Method::Cg {
        return Err(Error::IncompatibleRecovery { recovery: "cg-pou", method: sol.method().name(), order: sol.order() });
    }
    let mesh = sol.mesh;
    let rt0 = RtSpace::new(mesh, 0)?;
    let masses: Vec<Matrix3<f64>> = (0..mesh.n_elements()).into_par_iter().map(|k| rt0_mass(mesh, &rt0, &sol.coeffs, k)).collect();
    let patches: Vec<PatchCorrection> = (0..mesh.n_vertices())
        .into_par_iter()
        .map(|z| {
            let patch = mesh.patch(z);
            let floor = patch.elements.iter().map(|&k| op.scale(k) * mesh.area(k).sqrt()).sum();
            solve_patch(mesh, &sol.coeffs, patch, &patch_residuals(op, z), floor, &masses)
        })
        .collect::<Result<_>>()?;
    let mut flux = RtFlux::zeros(mesh, 0);
    for pc in &patches {
        let patch = mesh.patch(pc.vertex);
        for (j, x) in pc.corrected().into_iter().enumerate() {
            flux.facet[patch.facets[j]] += patch.signs[j] * x;
        }
    }
    Ok((flux, patches))
}
