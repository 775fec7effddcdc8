//! Explicit corrections for nonconforming solutions. Each facet moment is
//! a multiple of the residual of the facet basis function restricted to
//! the minus element.

use rayon::prelude::*;

use super::residual::ResidualOperator;
use crate::error::{Error, Result};
use crate::fem::legendre::legendre_norm2;
use crate::fem::poly::ScalarPoly;
use crate::fem::rt::RtFlux;
use crate::fem::Method;
use crate::mesh::FacetKind;

fn require_odd(op: &ResidualOperator) -> Result<usize> {
    let k = op.sol.order();
    if op.sol.method() != Method::Nc || k % 2 == 0 {
        return Err(Error::UnsupportedOrder { method: "nc (odd-order correction)", order: k });
    }
    Ok(k)
}

/// `phi_{i,F}` restricted to the minus element of `f`, for odd orders.
pub fn facet_basis_minus(op: &ResidualOperator, f: usize, i: usize) -> (usize, ScalarPoly) {
    let sol = op.sol;
    let el = sol.mesh.facet(f).minus;
    let li = sol.mesh.local_facet(el, f).expect("minus element owns the facet");
    (el, sol.space.local_function(el, li * sol.order() + i))
}

/// Facet moments `m(f, i)` on every non-Neumann facet, zero elsewhere.
fn facet_flux(op: &ResidualOperator, s: usize, moment: impl Fn(usize, usize) -> f64 + Sync) -> RtFlux {
    let mesh = op.sol.mesh;
    let m = s + 1;
    let vals: Vec<Vec<f64>> = (0..mesh.n_facets())
        .into_par_iter()
        .map(|f| match mesh.facet(f).kind {
            FacetKind::Neumann => vec![0.0; m],
            _ => (0..m).map(|i| moment(f, i)).collect(),
        })
        .collect();
    let mut flux = RtFlux::zeros(mesh, s);
    for (f, v) in vals.into_iter().enumerate() {
        flux.facet[f * m..(f + 1) * m].copy_from_slice(&v);
    }
    flux
}

/// Index `k - 1`: `int_F sigma . n_F L_i = ||L_i||_F^2 r(phi_{i,F}^-)`, `i < k`.
pub fn nc_facet_correction(op: &ResidualOperator) -> Result<RtFlux> {
    let k = require_odd(op)?;
    let mesh = op.sol.mesh;
    Ok(facet_flux(op, k - 1, |f, i| {
        let (el, phi) = facet_basis_minus(op, f, i);
        mesh.facet(f).length * legendre_norm2(i) * op.apply(el, &phi)
    }))
}

/// Index 0: `int_F sigma . n_F = |F| r(phi_{0,F}^-)`.
pub fn nc_rt0_correction(op: &ResidualOperator) -> Result<RtFlux> {
    require_odd(op)?;
    let mesh = op.sol.mesh;
    Ok(facet_flux(op, 0, |f, _| {
        let (el, phi) = facet_basis_minus(op, f, 0);
        mesh.facet(f).length * op.apply(el, &phi)
    }))
}

/// `phi_F = lambda_a lambda_b` on the minus element of `f`.
pub fn fs2_facet_function(op: &ResidualOperator, f: usize) -> (usize, ScalarPoly) {
    let sol = op.sol;
    let el = sol.mesh.facet(f).minus;
    let li = sol.mesh.local_facet(el, f).expect("minus element owns the facet");
    // The quadratic Lagrange function of the facet midpoint is 4 lambda_a lambda_b.
    let mut p = sol.space.local_function(el, 3 + li);
    p.coeffs.iter_mut().for_each(|c| *c *= 0.25);
    (el, p)
}

/// Fortin-Soulie order 2, index 0: `int_F sigma . n_F = 6 r(phi_F^-)`.
pub fn nc_fs2_correction(op: &ResidualOperator) -> Result<RtFlux> {
    if !op.sol.space.is_fortin_soulie() {
        return Err(Error::UnsupportedOrder { method: "nc-fs2 (needs nc order 2)", order: op.sol.order() });
    }
    Ok(facet_flux(op, 0, |f, _| {
        let (el, phi) = fs2_facet_function(op, f);
        6.0 * op.apply(el, &phi)
    }))
}
