//! Explicit correction for interior penalty solutions: penalty jumps on
//! the facets, the `delta` consistency term in the interior moments.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::element::FacetQuad;
use crate::fem::legendre::legendre_all;
use crate::fem::rt::{RtFlux, RtSpace};
use crate::fem::space::monomial_table;
use crate::fem::{FemSolution, Method};
use crate::mesh::FacetKind;
use crate::problem::alpha_weights;

/// `[[u_h]]` at `x` on facet `f`; Dirichlet facets subtract the boundary data.
pub fn solution_jump(sol: &FemSolution, f: usize, x: crate::geometry::Vec2) -> f64 {
    let facet = sol.mesh.facet(f);
    let minus = sol.value(facet.minus, x);
    match (facet.plus, facet.kind) {
        (Some(p), _) => minus - sol.value(p, x),
        (None, FacetKind::Dirichlet) => minus - (sol.problem.dirichlet)(x),
        (None, _) => 0.0,
    }
}

pub fn dg_correction(sol: &FemSolution, rt: &RtSpace) -> Result<RtFlux> {
    let params = match (sol.method(), sol.dg) {
        (Method::Dg, Some(p)) => p,
        _ => return Err(Error::InvalidArgument("the DG correction needs a DG solution".into())),
    };
    let mesh = sol.mesh;
    let s = rt.index();
    let k = sol.order();
    if s > k {
        return Err(Error::InvalidArgument(format!("correction index {s} exceeds the solution order {k}")));
    }
    let m = s + 1;
    let fdeg = 2 * k + 1;
    let facet: Vec<Vec<f64>> = (0..mesh.n_facets())
        .into_par_iter()
        .map(|f| {
            let facet = mesh.facet(f);
            let mut out = vec![0.0; m];
            if facet.kind == FacetKind::Neumann {
                return out;
            }
            let pen = params.gamma * alpha_weights(&sol.coeffs, mesh, f).alpha_min / facet.length;
            let q = FacetQuad::on_facet(mesh, f, fdeg);
            let mut leg = vec![0.0; m];
            for ((&x, &t), &w) in q.points.iter().zip(&q.params).zip(&q.weights) {
                let j = solution_jump(sol, f, x);
                legendre_all(s, t, &mut leg);
                for (o, l) in out.iter_mut().zip(&leg) {
                    *o += w * pen * j * l;
                }
            }
            out
        })
        .collect();
    let mut flux = RtFlux::zeros(mesh, s);
    for (f, mom) in facet.into_iter().enumerate() {
        flux.facet[f * m..(f + 1) * m].copy_from_slice(&mom);
    }
    if s == 0 || params.delta == 0.0 {
        return Ok(flux);
    }
    // (sigma, psi)_K = -delta sum_F int_F w_K (A psi . n_F) [[u_h]], psi = q e_x or q e_y.
    let ni = rt.n_interior();
    let interior: Vec<Vec<f64>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|el| {
            let tests = rt.tests(el);
            let nt = tests.nrows();
            let a = sol.coeffs.tensor[el];
            let mut out = vec![0.0; 2 * nt];
            for &f in &mesh.element_facets(el) {
                let facet = mesh.facet(f);
                if facet.kind == FacetKind::Neumann {
                    continue;
                }
                let aw = alpha_weights(&sol.coeffs, mesh, f);
                let weight = if facet.minus == el { aw.w_minus } else { aw.w_plus };
                let an = a.apply(facet.normal);
                let q = FacetQuad::on_facet(mesh, f, fdeg);
                let vals = tests * monomial_table(rt.frame(el), s - 1, &q.points).val;
                for (qi, (&x, &w)) in q.points.iter().zip(&q.weights).enumerate() {
                    let c = -params.delta * w * weight * solution_jump(sol, f, x);
                    for r in 0..nt {
                        out[r] += c * an.x * vals[(r, qi)];
                        out[nt + r] += c * an.y * vals[(r, qi)];
                    }
                }
            }
            out
        })
        .collect();
    for (el, mom) in interior.into_iter().enumerate() {
        flux.interior[el * ni..(el + 1) * ni].copy_from_slice(&mom);
    }
    Ok(flux)
}
