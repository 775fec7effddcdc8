//! Weighted averaging flux: the `RT(s)` field whose facet moments are
//! `-int_F {A grad u_h . n_F}_w L_j` (Neumann facets: moments of the
//! Neumann data) and whose interior moments are `-(A grad u_h, psi)_K`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::element::FacetQuad;
use crate::fem::legendre::legendre_all;
use crate::fem::rt::{RtFlux, RtSpace};
use crate::fem::solve::legendre_expand;
use crate::fem::FemSolution;
use crate::mesh::FacetKind;
use crate::problem::alpha_weights;

#[derive(Clone, Debug)]
pub struct AveragingFlux {
    pub flux: RtFlux,
    /// Polynomial degree `k` of the source solution.
    pub source_order: usize,
    /// `max_F ||g - g_{s,F}||_F` over Neumann facets.
    pub neumann_defect: f64,
}

impl AveragingFlux {
    pub fn index(&self) -> usize {
        self.flux.index
    }
}

pub fn weighted_averaging_flux(sol: &FemSolution, rt: &RtSpace) -> Result<AveragingFlux> {
    let s = rt.index();
    let k = sol.order();
    if s > k {
        return Err(Error::InvalidArgument(format!("averaging index {s} exceeds the solution order {k}")));
    }
    let mesh = sol.mesh;
    let m = s + 1;
    let fdeg = 2 * k + 1;
    let facet: Vec<(Vec<f64>, f64)> = (0..mesh.n_facets())
        .into_par_iter()
        .map(|f| {
            let facet = mesh.facet(f);
            let q = FacetQuad::on_facet(mesh, f, fdeg.max(2 * s + 1));
            let mut leg = vec![0.0; m];
            let mut out = vec![0.0; m];
            if facet.kind == FacetKind::Neumann {
                let g = sol.neumann_data(f);
                for j in 0..m.min(g.len()) {
                    out[j] = g[j];
                }
                let proj = &out[..m.min(g.len())];
                let dq = FacetQuad::on_facet(mesh, f, 2 * k + 8);
                let defect = dq
                    .points
                    .iter()
                    .zip(&dq.params)
                    .zip(&dq.weights)
                    .map(|((&x, &t), &w)| {
                        let d = (sol.problem.neumann)(x, facet.normal) - legendre_expand(proj, facet.length, t);
                        w * d * d
                    })
                    .sum::<f64>()
                    .sqrt();
                return (out, defect);
            }
            let aw = alpha_weights(&sol.coeffs, mesh, f);
            let am = sol.coeffs.tensor[facet.minus];
            for ((&x, &t), &w) in q.points.iter().zip(&q.params).zip(&q.weights) {
                let fm = am.apply(sol.grad(facet.minus, x)).dot(facet.normal);
                let fp = match facet.plus {
                    Some(p) => sol.coeffs.tensor[p].apply(sol.grad(p, x)).dot(facet.normal),
                    None => 0.0,
                };
                let avg = aw.average(fm, fp);
                legendre_all(s, t, &mut leg);
                for j in 0..m {
                    out[j] -= w * avg * leg[j];
                }
            }
            (out, 0.0)
        })
        .collect();
    let mut flux = RtFlux::zeros(mesh, s);
    let mut defect: f64 = 0.0;
    for (f, (mom, d)) in facet.into_iter().enumerate() {
        flux.facet[f * m..(f + 1) * m].copy_from_slice(&mom);
        defect = defect.max(d);
    }
    if s > 0 {
        let ni = rt.n_interior();
        let interior: Vec<Vec<f64>> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                let a = sol.coeffs.tensor[e];
                rt.interior_moments(mesh, e, 2 * k + 2, |x| -a.apply(sol.grad(e, x)))
            })
            .collect();
        for (e, mom) in interior.into_iter().enumerate() {
            flux.interior[e * ni..(e + 1) * ni].copy_from_slice(&mom);
        }
    }
    Ok(AveragingFlux { flux, source_order: k, neumann_defect: defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earm::check_equilibration;
    use crate::fem::{solve_problem, FemSpace, Method};
    use crate::geometry::Vec2;
    use crate::mesh::{jittered_square, BoundaryTag};
    use crate::problem::{BenchmarkCase, BenchmarkKind};
    use crate::testing::{all_dirichlet, elementwise_values, scalar_problem, two_element_mesh};
    use proptest::prelude::*;

    #[test]
    fn globally_linear_gives_constant_flux() {
        let mesh = jittered_square(4, 0.2, 3, all_dirichlet).unwrap();
        let p = scalar_problem(|_| 1.0, |_| 0.0, |x| x.x, |_| Vec2::new(1.0, 0.0), all_dirichlet);
        for k in 1..=2 {
            let space = FemSpace::new(&mesh, Method::Cg, k).unwrap();
            let values = space.interpolate(&mesh, &|x| x.x);
            let sol = FemSolution::from_values(&mesh, &p, space, values, None);
            for s in 0..=k {
                let rt = RtSpace::new(&mesh, s).unwrap();
                let av = weighted_averaging_flux(&sol, &rt).unwrap();
                for el in 0..mesh.n_elements() {
                    let field = rt.field(&mesh, &av.flux, el).unwrap();
                    for x in mesh.corners(el).into_iter().chain([mesh.centroid(el)]) {
                        let v = field.eval(rt.frame(el), x);
                        assert!((v.x + 1.0).abs() < 1e-12 && v.y.abs() < 1e-12, "k={k} s={s}: {v:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn weighted_average_on_two_elements() {
        let mesh = two_element_mesh(all_dirichlet);
        let f = (0..mesh.n_facets()).find(|&f| mesh.facet(f).plus.is_some()).unwrap();
        let facet = mesh.facet(f).clone();
        let coef = if facet.minus == 0 { [1.0, 4.0] } else { [4.0, 1.0] };
        // The element below the diagonal is element 0.
        let p = scalar_problem(move |x| if x.x > x.y { coef[0] } else { coef[1] }, |_| 0.0, |_| 0.0, |_| Vec2::default(), all_dirichlet);
        let space = FemSpace::new(&mesh, Method::Dg, 1).unwrap();
        let n = facet.normal;
        // A grad u . n_F is 2 on the minus side and 1 on the plus side.
        let values = elementwise_values(&space, &mesh, |k, x| {
            let a = coef[k];
            let target = if k == facet.minus { 2.0 } else { 1.0 };
            target / a * x.dot(n)
        });
        let sol = FemSolution::from_values(&mesh, &p, space, values, None);
        let rt = RtSpace::new(&mesh, 0).unwrap();
        let av = weighted_averaging_flux(&sol, &rt).unwrap();
        assert!((av.flux.facet[f] / facet.length + 1.8).abs() < 1e-12, "{}", av.flux.facet[f]);
    }

    #[test]
    fn neumann_constant_is_copied() {
        let tag = |x: Vec2| if x.y > 0.999 { BoundaryTag::Neumann } else { BoundaryTag::Dirichlet };
        let mesh = two_element_mesh(tag);
        let mut p = scalar_problem(|_| 1.0, |_| 0.0, |_| 0.0, |_| Vec2::default(), tag);
        p.neumann = std::sync::Arc::new(|_, _| 3.0);
        let space = FemSpace::new(&mesh, Method::Cg, 1).unwrap();
        let n = space.n_dofs();
        let sol = FemSolution::from_values(&mesh, &p, space, vec![0.0; n], None);
        let rt = RtSpace::new(&mesh, 0).unwrap();
        let av = weighted_averaging_flux(&sol, &rt).unwrap();
        let f = (0..mesh.n_facets()).find(|&f| mesh.facet(f).kind == FacetKind::Neumann).unwrap();
        assert!((av.flux.facet[f] - 3.0 * mesh.facet(f).length).abs() < 1e-14);
        assert!(av.neumann_defect < 1e-14);
    }

    #[test]
    fn rejects_index_above_order() {
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        let mesh = case.mesh(2).unwrap();
        let sol = solve_problem(&mesh, &case.problem, Method::Cg, 1, None).unwrap();
        let rt = RtSpace::new(&mesh, 2).unwrap();
        assert!(weighted_averaging_flux(&sol, &rt).is_err());
    }

    #[test]
    fn averaged_flux_is_conforming() {
        let case = BenchmarkCase::new(BenchmarkKind::Checkerboard, 100.0);
        let tags = case.problem.boundary.clone();
        let mesh = jittered_square(6, 0.2, 5, move |x| tags(x)).unwrap();
        for (m, k) in [(Method::Cg, 2), (Method::Nc, 3), (Method::Dg, 2)] {
            let sol = solve_problem(&mesh, &case.problem, m, k, None).unwrap();
            let rt = RtSpace::new(&mesh, k).unwrap();
            let av = weighted_averaging_flux(&sol, &rt).unwrap();
            let checks = check_equilibration(&sol, &rt, &av.flux, 0).unwrap();
            assert!(checks.max_trace_jump < 1e-12, "{m:?}{k}: {}", checks.max_trace_jump);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn averaging_is_linear(seed in 0u64..1000, beta in -3.0f64..3.0, s in 0usize..3) {
            let mesh = jittered_square(3, 0.2, seed, all_dirichlet).unwrap();
            let p = scalar_problem(|x| 1.0 + x.x * 9.0, |_| 0.0, |_| 0.0, |_| Vec2::default(), all_dirichlet);
            let space = FemSpace::new(&mesh, Method::Dg, 2).unwrap();
            let n = space.n_dofs();
            let u: Vec<f64> = (0..n).map(|i| ((i as f64 + seed as f64) * 0.7).sin()).collect();
            let v: Vec<f64> = (0..n).map(|i| ((i as f64) * 1.3 + 0.2).cos()).collect();
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + beta * b).collect();
            let rt = RtSpace::new(&mesh, s).unwrap();
            let run = |vals: Vec<f64>| {
                let sol = FemSolution::from_values(&mesh, &p, space.clone(), vals, None);
                weighted_averaging_flux(&sol, &rt).unwrap().flux
            };
            let (fu, fv, fw) = (run(u), run(v), run(w));
            for i in 0..fu.facet.len() {
                prop_assert!((fw.facet[i] - fu.facet[i] - beta * fv.facet[i]).abs() < 1e-11);
            }
            for i in 0..fu.interior.len() {
                prop_assert!((fw.interior[i] - fu.interior[i] - beta * fv.interior[i]).abs() < 1e-11);
            }
        }
    }
}
