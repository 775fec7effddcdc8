//! The averaging residual `r_K(v) = (f - div sigma~, v)_K`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::averaging::AveragingFlux;
use crate::error::Result;
use crate::fem::element::ElementQuad;
use crate::fem::poly::{ScalarPoly, VecPoly};
use crate::fem::rt::RtSpace;
use crate::fem::space::monomial_table;
use crate::fem::FemSolution;

/// Residual of an averaged flux, tabulated at the solve's quadrature
/// points so that `r` vanishes exactly on the trial space when it should.
pub struct ResidualOperator<'s, 'a> {
    pub sol: &'s FemSolution<'a>,
    /// Index of the averaged flux the residual is built on.
    pub index: usize,
    quads: Vec<ElementQuad>,
    /// `f - div sigma~` at the points of `quads[k]`.
    values: Vec<Vec<f64>>,
    /// `||f||_K + ||sigma~||_{H(div),K}`, the scale for relative checks.
    scales: Vec<f64>,
}

impl<'s, 'a> ResidualOperator<'s, 'a> {
    pub fn new(sol: &'s FemSolution<'a>, rt: &RtSpace, averaged: &AveragingFlux) -> Result<Self> {
        let mesh = sol.mesh;
        let deg = sol.quad_degree();
        let fields: Vec<VecPoly> = (0..mesh.n_elements())
            .map(|k| rt.field(mesh, &averaged.flux, k))
            .collect::<Result<_>>()?;
        let per: Vec<(ElementQuad, Vec<f64>, f64)> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|k| {
                let q = ElementQuad::new(mesh, k, deg);
                let (mut ff, mut dd, mut ss) = (0.0, 0.0, 0.0);
                let v = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(&x, &w)| {
                        let f = (sol.problem.source)(x);
                        let d = fields[k].div(rt.frame(k), x);
                        let v = fields[k].eval(rt.frame(k), x);
                        ff += w * f * f;
                        dd += w * d * d;
                        ss += w * v.dot(v);
                        f - d
                    })
                    .collect();
                (q, v, ff.sqrt() + (ss + dd).sqrt())
            })
            .collect();
        let mut quads = Vec::with_capacity(per.len());
        let mut values = Vec::with_capacity(per.len());
        let mut scales = Vec::with_capacity(per.len());
        for (q, v, s) in per {
            quads.push(q);
            values.push(v);
            scales.push(s);
        }
        Ok(Self { sol, index: rt.index(), quads, values, scales })
    }

    /// `r_K(v)` for a polynomial `v` in the frame of element `k`.
    pub fn apply(&self, k: usize, v: &ScalarPoly) -> f64 {
        let q = &self.quads[k];
        let t = monomial_table(self.sol.frame(k), v.degree, &q.points);
        (0..q.weights.len())
            .map(|qi| {
                let vq: f64 = v.coeffs.iter().enumerate().map(|(m, c)| c * t.val[(m, qi)]).sum();
                q.weights[qi] * self.values[k][qi] * vq
            })
            .sum()
    }

    /// `r_K` applied to each row of `basis` (monomial coefficients of `degree`).
    pub fn apply_rows(&self, k: usize, basis: &DMatrix<f64>, degree: usize) -> Vec<f64> {
        let q = &self.quads[k];
        let vals = basis * monomial_table(self.sol.frame(k), degree, &q.points).val;
        (0..basis.nrows())
            .map(|r| (0..q.weights.len()).map(|qi| q.weights[qi] * self.values[k][qi] * vals[(r, qi)]).sum())
            .collect()
    }

    /// `||v||_K` for a polynomial in the frame of `k`, on the same rule.
    pub fn norm(&self, k: usize, v: &ScalarPoly) -> f64 {
        let q = &self.quads[k];
        q.points.iter().zip(&q.weights).map(|(&x, &w)| w * v.eval(self.sol.frame(k), x).powi(2)).sum::<f64>().sqrt()
    }

    pub fn scale(&self, k: usize) -> f64 {
        self.scales[k]
    }

    /// `r(phi_d)` for every global trial basis function `phi_d`, together with
    /// `sum_K (||f||_K + ||sigma~||_{H(div),K}) ||phi_d||_K` over its support.
    pub fn trial_residuals(&self) -> (Vec<f64>, Vec<f64>) {
        let space = &self.sol.space;
        let n = space.n_dofs();
        let per: Vec<(Vec<f64>, Vec<f64>)> = (0..self.sol.mesh.n_elements())
            .into_par_iter()
            .map(|k| {
                let basis = space.basis(k);
                let r = self.apply_rows(k, basis, space.degree());
                let norms = (0..basis.nrows())
                    .map(|i| self.scales[k] * self.norm(k, &space.local_function(k, i)))
                    .collect();
                (r, norms)
            })
            .collect();
        let (mut res, mut scale) = (vec![0.0; n], vec![0.0; n]);
        for (k, (r, s)) in per.into_iter().enumerate() {
            for (i, &d) in space.dofs(k).iter().enumerate() {
                res[d] += r[i];
                scale[d] += s[i];
            }
        }
        (res, scale)
    }

    /// Largest `|r(phi)| / scale(phi)` over trial functions that vanish on
    /// the Dirichlet boundary; zero when the residual is compatible.
    pub fn compatibility_defect(&self) -> f64 {
        let (r, scale) = self.trial_residuals();
        let mut fixed = vec![false; r.len()];
        for (d, _) in self.sol.space.dirichlet_values(self.sol.mesh, &|_| 0.0) {
            fixed[d] = true;
        }
        (0..r.len()).filter(|&d| !fixed[d]).map(|d| r[d].abs() / scale[d].max(1e-300)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::weighted_averaging_flux;
    use crate::fem::element::FacetQuad;
    use crate::fem::poly::n_mono;
    use crate::fem::{solve_problem, DgParams, Method};
    use crate::mesh::{jittered_square, refine_uniform, FacetKind, Mesh};
    use crate::problem::{alpha_weights, BenchmarkCase, BenchmarkKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_free_residual(sol: &FemSolution, index: usize) -> f64 {
        let rt = RtSpace::new(sol.mesh, index).unwrap();
        let av = weighted_averaging_flux(sol, &rt).unwrap();
        ResidualOperator::new(sol, &rt, &av).unwrap().compatibility_defect()
    }

    fn smooth_meshes(case: &BenchmarkCase) -> Vec<Mesh> {
        let tags = case.problem.boundary.clone();
        let mut meshes = vec![jittered_square(4, 0.2, 11, move |x| tags(x)).unwrap()];
        for _ in 0..2 {
            let next = refine_uniform(meshes.last().unwrap()).unwrap();
            meshes.push(next);
        }
        meshes
    }

    #[test]
    fn linear_solution_has_zero_residual() {
        let case = BenchmarkCase::new(BenchmarkKind::Patch, 1.0);
        let mesh = case.mesh(4).unwrap();
        let sol = solve_problem(&mesh, &case.problem, Method::Cg, 1, None).unwrap();
        for s in 0..=1 {
            let rt = RtSpace::new(&mesh, s).unwrap();
            let av = weighted_averaging_flux(&sol, &rt).unwrap();
            let op = ResidualOperator::new(&sol, &rt, &av).unwrap();
            let (r, _) = op.trial_residuals();
            assert!(r.iter().all(|v| v.abs() < 1e-12), "s={s}");
        }
    }

    #[test]
    fn compatibility_on_trial_space() {
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        for mesh in smooth_meshes(&case) {
            for (m, k) in [(Method::Cg, 1), (Method::Cg, 2), (Method::Cg, 3), (Method::Nc, 1), (Method::Nc, 2), (Method::Nc, 3)] {
                let sol = solve_problem(&mesh, &case.problem, m, k, None).unwrap();
                let worst = max_free_residual(&sol, k);
                assert!(worst < 1e-10, "{m:?}{k} on {} elements: {worst:e}", mesh.n_elements());
            }
        }
    }

    #[test]
    fn averaging_below_the_order_is_not_compatible() {
        // Interior moments of RT(k-1) do not reach grad P_k, so r fails to vanish.
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        let tags = case.problem.boundary.clone();
        let mesh = jittered_square(8, 0.2, 11, move |x| tags(x)).unwrap();
        for (m, k) in [(Method::Cg, 1), (Method::Cg, 2), (Method::Nc, 1)] {
            let sol = solve_problem(&mesh, &case.problem, m, k, None).unwrap();
            assert!(max_free_residual(&sol, k - 1) > 1e-4, "{m:?}{k}");
        }
    }

    #[test]
    fn dg_residual_matches_facet_terms() {
        let case = BenchmarkCase::new(BenchmarkKind::Checkerboard, 100.0);
        let tags = case.problem.boundary.clone();
        let mesh = jittered_square(5, 0.2, 2, move |x| tags(x)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (k, delta) in [(1, -1.0), (2, -1.0), (2, 1.0), (2, 0.0)] {
            let dg = DgParams { gamma: DgParams::default_for(k).gamma, delta };
            let sol = solve_problem(&mesh, &case.problem, Method::Dg, k, Some(dg)).unwrap();
            for s in 0..=k {
                let rt = RtSpace::new(&mesh, s).unwrap();
                let av = weighted_averaging_flux(&sol, &rt).unwrap();
                let op = ResidualOperator::new(&sol, &rt, &av).unwrap();
                let v: Vec<ScalarPoly> = (0..mesh.n_elements())
                    .map(|_| ScalarPoly { degree: s, coeffs: (0..n_mono(s)).map(|_| rng.gen_range(-1.0..1.0)).collect() })
                    .collect();
                let lhs: f64 = (0..mesh.n_elements()).map(|el| op.apply(el, &v[el])).sum();
                let mut rhs = 0.0;
                for f in 0..mesh.n_facets() {
                    let facet = mesh.facet(f);
                    if facet.kind == FacetKind::Neumann {
                        continue;
                    }
                    let aw = alpha_weights(&sol.coeffs, &mesh, f);
                    let pen = dg.gamma * aw.alpha_min / facet.length;
                    let q = FacetQuad::on_facet(&mesh, f, 2 * k + 4);
                    let km = facet.minus;
                    for (&x, &w) in q.points.iter().zip(&q.weights) {
                        let an = |el: usize| sol.coeffs.tensor[el].apply(v[el].grad(sol.frame(el), x)).dot(facet.normal);
                        let (ju, jv, avg) = match facet.plus {
                            Some(kp) => (
                                sol.value(km, x) - sol.value(kp, x),
                                v[km].eval(sol.frame(km), x) - v[kp].eval(sol.frame(kp), x),
                                aw.w_minus * an(km) + aw.w_plus * an(kp),
                            ),
                            None => (sol.value(km, x) - (case.problem.dirichlet)(x), v[km].eval(sol.frame(km), x), an(km)),
                        };
                        rhs += w * ju * (pen * jv + delta * avg);
                    }
                }
                let scale = lhs.abs().max(rhs.abs()).max(1.0);
                assert!((lhs - rhs).abs() < 1e-11 * scale, "k={k} s={s} delta={delta}: {lhs} vs {rhs}");
            }
        }
    }
}
