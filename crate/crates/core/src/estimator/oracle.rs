//! Reference minimizer: the flux of smallest distance to `-A grad_h u_h`
//! among RT fields with prescribed divergence moments and Neumann trace,
//! computed from the KKT system of the constrained least-squares problem.

use rayon::prelude::*;

use crate::earm::{check_equilibration, EquilibrationChecks};
use crate::error::{Error, Result};
use crate::fem::element::ElementQuad;
use crate::fem::poly::n_mono;
use crate::fem::rt::{orthonormal_basis, RtFlux, RtSpace};
use crate::fem::space::monomial_table;
use crate::fem::sparse::{relative_residual, solve_general, Triplets};
use crate::fem::FemSolution;
use crate::mesh::FacetKind;

use super::flux_distance;

#[derive(Clone, Debug)]
pub struct OracleFlux {
    pub flux: RtFlux,
    pub space: RtSpace,
    pub conservation_index: usize,
    pub eta_local: Vec<f64>,
    /// The minimal objective `||A^{-1/2}(tau + A grad_h u_h)||`.
    pub eta: f64,
    pub checks: EquilibrationChecks,
    /// Relative residual of the KKT solve.
    pub kkt_residual: f64,
}

struct ElementBlock {
    dofs: Vec<usize>,
    mass: Vec<f64>,
    load: Vec<f64>,
    /// `(div psi_d, q_l)_K`, row-major `l * n + d`.
    div: Vec<f64>,
    source: Vec<f64>,
}

/// Minimizes over `RT(index)` subject to `Pi_s div tau = f_s` and Neumann
/// moments equal to the projected data. Intended for small meshes.
pub fn oracle_equilibrated_flux(sol: &FemSolution, index: usize, s: usize) -> Result<OracleFlux> {
    if s > index {
        return Err(Error::InvalidArgument(format!("conservation index {s} exceeds the flux index {index}")));
    }
    let mesh = sol.mesh;
    let space = RtSpace::new(mesh, index)?;
    let m = index + 1;
    let n_rt = space.n_dofs(mesh);

    // Fixed Neumann moments, the same projection the averaging uses.
    let mut fixed: Vec<Option<f64>> = vec![None; n_rt];
    for f in 0..mesh.n_facets() {
        if mesh.facet(f).kind == FacetKind::Neumann {
            let g = sol.neumann_data(f);
            for j in 0..m {
                fixed[f * m + j] = Some(g.get(j).copied().unwrap_or(0.0));
            }
        }
    }
    let mut free = vec![usize::MAX; n_rt];
    let mut n_free = 0;
    for (i, v) in fixed.iter().enumerate() {
        if v.is_none() {
            free[i] = n_free;
            n_free += 1;
        }
    }
    let nq = n_mono(s);
    let n = n_free + mesh.n_elements() * nq;
    let deg = sol.quad_degree().max(2 * index + 2);

    let blocks: Vec<ElementBlock> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let frame = space.frame(k);
            let dofs = space.dofs(mesh, k);
            let nd = dofs.len();
            let fns: Vec<_> = (0..nd).map(|d| space.local_function(k, d)).collect();
            let ainv = sol.coeffs.tensor[k].inverse();
            let q = ElementQuad::new(mesh, k, deg);
            let tests = orthonormal_basis(mesh, k, s);
            let tv = &tests * monomial_table(frame, s, &q.points).val;
            let mut b = ElementBlock { dofs, mass: vec![0.0; nd * nd], load: vec![0.0; nd], div: vec![0.0; nq * nd], source: vec![0.0; nq] };
            for (qi, (&x, &w)) in q.points.iter().zip(&q.weights).enumerate() {
                let vals: Vec<_> = fns.iter().map(|p| p.eval(frame, x)).collect();
                let divs: Vec<_> = fns.iter().map(|p| p.div(frame, x)).collect();
                let g = sol.grad(k, x);
                let f = (sol.problem.source)(x);
                for i in 0..nd {
                    let ai = ainv.apply(vals[i]);
                    b.load[i] += w * vals[i].dot(g);
                    for j in 0..nd {
                        b.mass[i * nd + j] += w * ai.dot(vals[j]);
                    }
                }
                for l in 0..nq {
                    let t = tv[(l, qi)];
                    b.source[l] += w * f * t;
                    for d in 0..nd {
                        b.div[l * nd + d] += w * divs[d] * t;
                    }
                }
            }
            b
        })
        .collect();

    let mut kkt = Triplets::new(n, n);
    let mut rhs = vec![0.0; n];
    for (k, b) in blocks.iter().enumerate() {
        let nd = b.dofs.len();
        for i in 0..nd {
            let Some(fi) = free.get(b.dofs[i]).copied().filter(|&v| v != usize::MAX) else { continue };
            rhs[fi] -= b.load[i];
            for j in 0..nd {
                match fixed[b.dofs[j]] {
                    Some(v) => rhs[fi] -= b.mass[i * nd + j] * v,
                    None => kkt.push(fi, free[b.dofs[j]], b.mass[i * nd + j]),
                }
            }
        }
        for l in 0..nq {
            let row = n_free + k * nq + l;
            rhs[row] = b.source[l];
            for d in 0..nd {
                let v = b.div[l * nd + d];
                match fixed[b.dofs[d]] {
                    Some(c) => rhs[row] -= v * c,
                    None => {
                        kkt.push(row, free[b.dofs[d]], v);
                        kkt.push(free[b.dofs[d]], row, v);
                    }
                }
            }
        }
    }
    let x = solve_general(&kkt, &rhs)?;
    let kkt_residual = relative_residual(&kkt, &x, &rhs);
    if kkt_residual > 1e-8 {
        return Err(Error::Solver(format!("oracle constraints inconsistent (KKT residual {kkt_residual:.2e})")));
    }

    let mut flux = RtFlux::zeros(mesh, index);
    let nf = mesh.n_facets() * m;
    for i in 0..n_rt {
        let v = fixed[i].unwrap_or_else(|| x[free[i]]);
        if i < nf {
            flux.facet[i] = v;
        } else {
            flux.interior[i - nf] = v;
        }
    }
    let fields: Vec<_> = (0..mesh.n_elements()).map(|k| space.field(mesh, &flux, k)).collect::<Result<_>>()?;
    let eta_local = flux_distance(sol, |k, x| fields[k].eval(space.frame(k), x));
    let eta = eta_local.iter().map(|e| e * e).sum::<f64>().sqrt();
    let checks = check_equilibration(sol, &space, &flux, s)?;
    Ok(OracleFlux { flux, space, conservation_index: s, eta_local, eta, checks, kkt_residual })
}
