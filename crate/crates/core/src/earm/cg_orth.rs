//! Global correction in the orthogonal complement of the divergence-free
//! fields: find `w` in the quotient of `DG(s)` by the continuous functions
//! vanishing on `Gamma_D` with
//! `sum_F int_F A_F h_F^{-1} [[w]] [[v]] = r(v)`, then set
//! `sigma . n_F = A_F h_F^{-1} [[w]]`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::residual::ResidualOperator;
use crate::error::{Error, Result};
use crate::fem::element::FacetQuad;
use crate::fem::lagrange::{interior_lattice, lattice, nodal_basis, to_point};
use crate::fem::legendre::legendre_all;
use crate::fem::poly::Frame;
use crate::fem::rt::RtFlux;
use crate::fem::space::monomial_table;
use crate::fem::sparse::{solve_spd, Triplets};
use crate::fem::Method;
use crate::mesh::{FacetKind, Mesh};
use crate::problem::{alpha_weights, Coefficients};

/// `A_F`: the smaller neighbouring coefficient on interior facets, the
/// minus-side coefficient on boundary facets.
pub fn facet_coefficient(coeffs: &Coefficients, mesh: &Mesh, f: usize) -> f64 {
    alpha_weights(coeffs, mesh, f).alpha_min
}

/// Lagrange basis of `P_s(K)` at the degree-`s` lattice (the constant for `s = 0`).
pub fn dg_lagrange_basis(mesh: &Mesh, k: usize, s: usize) -> DMatrix<f64> {
    if s == 0 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let c = mesh.corners(k);
    let nodes: Vec<_> = lattice(s).iter().map(|&l| to_point(&c, l)).collect();
    nodal_basis(&Frame::of_element(mesh, k), s, &nodes).expect("lattice is unisolvent")
}

/// Local dofs fixed to zero to select one representative per quotient class:
/// element-interior nodes; plus-side copies of interior-facet nodes; the only
/// copy of Neumann-facet nodes; for every vertex off the closed Dirichlet
/// boundary, its copy in the patch element of largest coefficient (lowest id
/// on ties). Nothing is fixed for `s = 0`.
pub fn quotient_pins(mesh: &Mesh, coeffs: &Coefficients, s: usize) -> Vec<bool> {
    let n_loc = (s + 1) * (s + 2) / 2;
    let mut pinned = vec![false; mesh.n_elements() * n_loc];
    if s == 0 {
        return pinned;
    }
    let per_edge = s - 1;
    let n_int = interior_lattice(s).len();
    for k in 0..mesh.n_elements() {
        for l in 0..n_int {
            pinned[k * n_loc + 3 + 3 * per_edge + l] = true;
        }
    }
    let mut on_dirichlet = vec![false; mesh.n_vertices()];
    for (f, facet) in mesh.facets().iter().enumerate() {
        if facet.kind == FacetKind::Dirichlet {
            on_dirichlet[facet.vertices[0]] = true;
            on_dirichlet[facet.vertices[1]] = true;
        }
        let owner = match (facet.kind, facet.plus) {
            (FacetKind::Interior, Some(p)) => p,
            (FacetKind::Neumann, _) => facet.minus,
            _ => continue,
        };
        let li = mesh.local_facet(owner, f).expect("facet belongs to its element");
        for j in 0..per_edge {
            pinned[owner * n_loc + 3 + li * per_edge + j] = true;
        }
    }
    for z in 0..mesh.n_vertices() {
        if on_dirichlet[z] {
            continue;
        }
        let patch = mesh.patch(z);
        let kz = patch
            .elements
            .iter()
            .copied()
            .min_by(|&a, &b| coeffs.alpha[b].total_cmp(&coeffs.alpha[a]).then(a.cmp(&b)))
            .expect("every vertex has a patch");
        let lv = mesh.triangle(kz).iter().position(|&v| v == z).unwrap();
        pinned[kz * n_loc + lv] = true;
    }
    pinned
}

/// Returns the correction and the quotient representative `w` (local Lagrange values).
pub fn cg_orth_correction(op: &ResidualOperator, s: usize) -> Result<(RtFlux, Vec<f64>)> {
    let sol = op.sol;
    let k = sol.order();
    if sol.method() != Method::Cg || s + 1 > k {
        return Err(Error::IncompatibleRecovery { recovery: "cg-orth", method: sol.method().name(), order: k });
    }
    let mesh = sol.mesh;
    let n_loc = (s + 1) * (s + 2) / 2;
    let bases: Vec<DMatrix<f64>> = (0..mesh.n_elements()).into_par_iter().map(|el| dg_lagrange_basis(mesh, el, s)).collect();
    let pinned = quotient_pins(mesh, &sol.coeffs, s);
    let mut index = vec![usize::MAX; pinned.len()];
    let mut n = 0;
    for (i, &p) in pinned.iter().enumerate() {
        if !p {
            index[i] = n;
            n += 1;
        }
    }
    let fdeg = 2 * s + 2;
    let facet_blocks: Vec<Vec<(usize, usize, f64)>> = (0..mesh.n_facets())
        .into_par_iter()
        .map(|f| {
            let facet = mesh.facet(f);
            if facet.kind == FacetKind::Neumann {
                return Vec::new();
            }
            let c = facet_coefficient(&sol.coeffs, mesh, f) / facet.length;
            let q = FacetQuad::on_facet(mesh, f, fdeg);
            let mut sides = vec![(facet.minus, 1.0)];
            if let Some(p) = facet.plus {
                sides.push((p, -1.0));
            }
            let vals: Vec<DMatrix<f64>> = sides
                .iter()
                .map(|&(el, _)| &bases[el] * monomial_table(&Frame::of_element(mesh, el), s, &q.points).val)
                .collect();
            let mut out = Vec::new();
            for (a, &(ea, sa)) in sides.iter().enumerate() {
                for (b, &(eb, sb)) in sides.iter().enumerate() {
                    for i in 0..n_loc {
                        for j in 0..n_loc {
                            let v: f64 = (0..q.weights.len()).map(|qi| q.weights[qi] * vals[a][(i, qi)] * vals[b][(j, qi)]).sum();
                            out.push((ea * n_loc + i, eb * n_loc + j, c * sa * sb * v));
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut mat = Triplets::new(n, n);
    for block in facet_blocks {
        for (i, j, v) in block {
            if index[i] != usize::MAX && index[j] != usize::MAX {
                mat.push(index[i], index[j], v);
            }
        }
    }
    let mut rhs = vec![0.0; n];
    let loads: Vec<Vec<f64>> = (0..mesh.n_elements()).into_par_iter().map(|el| op.apply_rows(el, &bases[el], s)).collect();
    for (el, r) in loads.iter().enumerate() {
        for (i, &v) in r.iter().enumerate() {
            let g = index[el * n_loc + i];
            if g != usize::MAX {
                rhs[g] = v;
            }
        }
    }
    let x = solve_spd(&mat, &rhs).map_err(|e| match e {
        Error::Indefinite => Error::Solver("singular quotient representation in the cg-orth system".into()),
        e => e,
    })?;
    let w: Vec<f64> = index.iter().map(|&g| if g == usize::MAX { 0.0 } else { x[g] }).collect();

    Ok((s_trace(mesh, &sol.coeffs, &bases, s, &w), w))
}

/// `int_F A_F h_F^{-1} [[w]] L_j` on every non-Neumann facet, with `w` given by
/// its local values in `bases` (one row per node).
pub fn s_trace(mesh: &Mesh, coeffs: &Coefficients, bases: &[DMatrix<f64>], s: usize, w: &[f64]) -> RtFlux {
    let n_loc = (s + 1) * (s + 2) / 2;
    let fdeg = 2 * s + 2;
    let m = s + 1;
    let moments: Vec<Vec<f64>> = (0..mesh.n_facets())
        .into_par_iter()
        .map(|f| {
            let facet = mesh.facet(f);
            let mut out = vec![0.0; m];
            if facet.kind == FacetKind::Neumann {
                return out;
            }
            let c = facet_coefficient(coeffs, mesh, f) / facet.length;
            let q = FacetQuad::on_facet(mesh, f, fdeg);
            let eval = |el: usize| -> Vec<f64> {
                let coeffs = bases[el].transpose() * nalgebra::DVector::from_column_slice(&w[el * n_loc..(el + 1) * n_loc]);
                let t = monomial_table(&Frame::of_element(mesh, el), s, &q.points);
                (0..q.weights.len()).map(|qi| (0..coeffs.len()).map(|mm| coeffs[mm] * t.val[(mm, qi)]).sum()).collect()
            };
            let wm = eval(facet.minus);
            let wp = facet.plus.map(eval);
            let mut leg = vec![0.0; m];
            for (qi, (&t, &wt)) in q.params.iter().zip(&q.weights).enumerate() {
                let jump = wm[qi] - wp.as_ref().map_or(0.0, |v| v[qi]);
                legendre_all(s, t, &mut leg);
                for j in 0..m {
                    out[j] += wt * c * jump * leg[j];
                }
            }
            out
        })
        .collect();
    let mut flux = RtFlux::zeros(mesh, s);
    for (f, v) in moments.into_iter().enumerate() {
        flux.facet[f * m..(f + 1) * m].copy_from_slice(&v);
    }
    flux
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earm::{equilibrate, Recovery};
    use crate::fem::{solve_problem, FemSpace};
    use crate::geometry::Vec2;
    use crate::mesh::jittered_square;
    use crate::problem::{BenchmarkCase, BenchmarkKind};
    use crate::testing::{all_dirichlet, quad_mesh, scalar_problem};

    #[test]
    fn s_trace_of_a_unit_jump() {
        let v = [Vec2::new(0.0, 0.0), Vec2::new(0.25, -0.4), Vec2::new(0.5, 0.0), Vec2::new(0.25, 0.4)];
        let mesh = quad_mesh(v, all_dirichlet);
        let p = scalar_problem(|_| 2.0, |_| 0.0, |_| 0.0, |_| Vec2::default(), all_dirichlet);
        let coeffs = Coefficients::new(&mesh, &p);
        let f = (0..mesh.n_facets()).find(|&f| mesh.facet(f).plus.is_some()).unwrap();
        assert!((mesh.facet(f).length - 0.5).abs() < 1e-15);
        let bases: Vec<_> = (0..2).map(|k| dg_lagrange_basis(&mesh, k, 0)).collect();
        let mut w = vec![0.0; 2];
        w[mesh.facet(f).minus] = 1.0;
        let flux = s_trace(&mesh, &coeffs, &bases, 0, &w);
        assert!((flux.facet[f] / 0.5 - 4.0).abs() < 1e-13);
    }

    #[test]
    fn quotient_has_the_right_dimension() {
        for kind in [BenchmarkKind::Mixed, BenchmarkKind::Smooth, BenchmarkKind::Checkerboard] {
            let case = BenchmarkCase::new(kind, 100.0);
            let tags = case.problem.boundary.clone();
            let mesh = jittered_square(5, 0.2, 1, move |x| tags(x)).unwrap();
            let coeffs = Coefficients::new(&mesh, &case.problem);
            for s in 1..=3 {
                let pins = quotient_pins(&mesh, &coeffs, s);
                let free = pins.iter().filter(|p| !**p).count();
                let cg = FemSpace::new(&mesh, Method::Cg, s).unwrap();
                let conforming = cg.n_dofs() - cg.dirichlet_values(&mesh, &|_| 0.0).len();
                assert_eq!(free, pins.len() - conforming, "{} s={s}", kind.name());
            }
        }
    }

    #[test]
    fn linear_solution_needs_no_correction() {
        let case = BenchmarkCase::new(BenchmarkKind::Patch, 1.0);
        let mesh = case.mesh(3).unwrap();
        for k in 1..=3 {
            let sol = solve_problem(&mesh, &case.problem, Method::Cg, k, None).unwrap();
            for s in 0..k {
                let eq = equilibrate(&sol, Recovery::CgOrth, Some(s)).unwrap();
                let worst = eq.correction.flux.facet.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                assert!(worst < 1e-11, "k={k} s={s}: {worst:e}");
            }
        }
    }

    #[test]
    fn rejects_index_at_the_order() {
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        let mesh = case.mesh(2).unwrap();
        let sol = solve_problem(&mesh, &case.problem, Method::Cg, 2, None).unwrap();
        assert!(equilibrate(&sol, Recovery::CgOrth, Some(2)).is_err());
    }
}
