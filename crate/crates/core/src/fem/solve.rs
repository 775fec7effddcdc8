//! Assembly and solution of the conforming, nonconforming and
//! interior-penalty discretizations.

use rayon::prelude::*;

use super::element::{ElementQuad, FacetQuad, LocalFacet};
use super::legendre::{legendre_all, legendre_norm2};
use super::poly::{Frame, ScalarPoly};
use super::sparse::{relative_residual, solve, Factorization, Triplets};
use super::space::{FemSpace, Method};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::mesh::{FacetKind, Mesh};
use crate::problem::{alpha_weights, Coefficients, DiffusionProblem};

/// Symmetric interior penalty family: `delta = -1` is SIPG, `+1` NIPG, `0` IIPG.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DgParams {
    pub gamma: f64,
    pub delta: f64,
}

impl DgParams {
    /// `gamma = 10 (k + 1)^2`, `delta = -1`.
    pub fn default_for(order: usize) -> Self {
        let k1 = (order + 1) as f64;
        Self { gamma: 10.0 * k1 * k1, delta: -1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SolverStats {
    pub unknowns: usize,
    pub factorization: Factorization,
    pub relative_residual: f64,
}

/// Legendre moments `int_F g L_j ds`, `j < n`, of the Neumann data on facet `f`.
/// Degree of the rule for source integrals. Every residual and check reuses
/// it, so the discrete equations and the equilibration see the same `f`;
/// the margin over `2k` keeps that `f` within round-off of the exact one
/// for smooth data.
pub fn source_degree(order: usize) -> usize {
    2 * order + 8
}

pub fn neumann_moments(mesh: &Mesh, problem: &DiffusionProblem, f: usize, n: usize) -> Vec<f64> {
    let normal = mesh.facet(f).normal;
    let q = FacetQuad::on_facet(mesh, f, 2 * n + 8);
    let mut leg = vec![0.0; n.max(1)];
    let mut m = vec![0.0; n];
    for ((&x, &t), &w) in q.points.iter().zip(&q.params).zip(&q.weights) {
        if n == 0 {
            break;
        }
        legendre_all(n - 1, t, &mut leg);
        let g = (problem.neumann)(x, normal);
        for j in 0..n {
            m[j] += w * g * leg[j];
        }
    }
    m
}

/// Evaluates `sum_j m_j L_j(t) / ||L_j||^2_F`, the `L^2(F)` projection with moments `m`.
pub fn legendre_expand(moments: &[f64], length: f64, t: f64) -> f64 {
    let n = moments.len();
    if n == 0 {
        return 0.0;
    }
    let mut leg = vec![0.0; n];
    legendre_all(n - 1, t, &mut leg);
    (0..n).map(|j| moments[j] * leg[j] / (length * legendre_norm2(j))).sum()
}

pub struct FemSolution<'a> {
    pub mesh: &'a Mesh,
    pub problem: &'a DiffusionProblem,
    pub space: FemSpace,
    pub coeffs: Coefficients,
    pub values: Vec<f64>,
    pub dg: Option<DgParams>,
    pub stats: Option<SolverStats>,
    polys: Vec<ScalarPoly>,
    frames: Vec<Frame>,
}

impl<'a> FemSolution<'a> {
    /// Wraps a coefficient vector without solving; used for interpolants in tests and checks.
    pub fn from_values(mesh: &'a Mesh, problem: &'a DiffusionProblem, space: FemSpace, values: Vec<f64>, dg: Option<DgParams>) -> Self {
        let polys = (0..mesh.n_elements()).into_par_iter().map(|k| space.local_poly(k, &values)).collect();
        let frames = (0..mesh.n_elements()).map(|k| Frame::of_element(mesh, k)).collect();
        Self {
            mesh,
            problem,
            coeffs: Coefficients::new(mesh, problem),
            space,
            values,
            dg,
            stats: None,
            polys,
            frames,
        }
    }

    pub fn method(&self) -> Method {
        self.space.method()
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn ndof(&self) -> usize {
        self.space.n_dofs()
    }

    /// Triangle rule degree used for every load and residual integral.
    pub fn quad_degree(&self) -> usize {
        source_degree(self.order())
    }

    /// Edge rule degree used for facet integrals.
    pub fn facet_degree(&self) -> usize {
        2 * self.order() + 1
    }

    pub fn poly(&self, k: usize) -> &ScalarPoly {
        &self.polys[k]
    }

    pub fn frame(&self, k: usize) -> &Frame {
        &self.frames[k]
    }

    pub fn value(&self, k: usize, x: Vec2) -> f64 {
        self.polys[k].eval(&self.frames[k], x)
    }

    pub fn grad(&self, k: usize, x: Vec2) -> Vec2 {
        self.polys[k].grad(&self.frames[k], x)
    }

    /// Neumann moments matching the data used in the solve (projection onto `P_{k-1}(F)`).
    pub fn neumann_data(&self, f: usize) -> Vec<f64> {
        neumann_moments(self.mesh, self.problem, f, self.order())
    }

    /// Elementwise `||A^{1/2} grad_h (u - u_h)||_K` against the exact solution.
    pub fn energy_error(&self) -> Option<Vec<f64>> {
        let ex = self.problem.exact.as_ref()?;
        let deg = 2 * self.order() + 6;
        Some(
            (0..self.mesh.n_elements())
                .into_par_iter()
                .map(|k| {
                    let a = self.coeffs.tensor[k];
                    let q = ElementQuad::new(self.mesh, k, deg);
                    q.integrate(|x| {
                        let e = (ex.gradient)(x) - self.grad(k, x);
                        a.apply(e).dot(e)
                    })
                    .max(0.0)
                    .sqrt()
                })
                .collect(),
        )
    }

    pub fn total_energy_error(&self) -> Option<f64> {
        self.energy_error().map(|v| v.iter().map(|e| e * e).sum::<f64>().sqrt())
    }
}

#[derive(Default)]
struct Local {
    entries: Vec<(usize, usize, f64)>,
    load: Vec<(usize, f64)>,
}

fn element_system(space: &FemSpace, mesh: &Mesh, problem: &DiffusionProblem, coeffs: &Coefficients, k: usize, qdeg: usize) -> Local {
    let frame = Frame::of_element(mesh, k);
    let q = ElementQuad::new(mesh, k, qdeg);
    let tab = space.tabulate(&frame, k, &q.points);
    let a = coeffs.tensor[k];
    let n = tab.val.nrows();
    let mut mat = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (qi, (&x, &w)) in q.points.iter().zip(&q.weights).enumerate() {
        let f = (problem.source)(x);
        for i in 0..n {
            let gi = a.apply(Vec2::new(tab.dx[(i, qi)], tab.dy[(i, qi)]));
            rhs[i] += w * f * tab.val[(i, qi)];
            for j in 0..n {
                mat[i * n + j] += w * (gi.x * tab.dx[(j, qi)] + gi.y * tab.dy[(j, qi)]);
            }
        }
    }
    let dofs = space.dofs(k);
    Local {
        entries: (0..n * n).map(|ij| (dofs[ij / n], dofs[ij % n], mat[ij])).collect(),
        load: dofs.iter().copied().zip(rhs).collect(),
    }
}

/// Neumann load `-int_F g_{k-1} v`.
fn neumann_load(space: &FemSpace, mesh: &Mesh, problem: &DiffusionProblem, f: usize, fdeg: usize) -> Local {
    let facet = mesh.facet(f);
    let k = facet.minus;
    let i = mesh.local_facet(k, f).unwrap();
    let lf = LocalFacet::new(mesh, k, i);
    let q = lf.quadrature(fdeg);
    let tab = space.tabulate(&Frame::of_element(mesh, k), k, &q.points);
    let moments = neumann_moments(mesh, problem, f, space.order());
    let n = tab.val.nrows();
    let mut rhs = vec![0.0; n];
    for (qi, (&t, &w)) in q.params.iter().zip(&q.weights).enumerate() {
        let g = legendre_expand(&moments, lf.length, t);
        for a in 0..n {
            rhs[a] -= w * g * tab.val[(a, qi)];
        }
    }
    Local { entries: Vec::new(), load: space.dofs(k).iter().copied().zip(rhs).collect() }
}

struct Side {
    dofs: Vec<usize>,
    val: nalgebra::DMatrix<f64>,
    /// `A grad phi . n_F` at the facet points.
    flux: nalgebra::DMatrix<f64>,
    weight: f64,
    sign: f64,
}

fn dg_facet(space: &FemSpace, mesh: &Mesh, problem: &DiffusionProblem, coeffs: &Coefficients, f: usize, params: DgParams, fdeg: usize) -> Local {
    let facet = mesh.facet(f);
    let aw = alpha_weights(coeffs, mesh, f);
    let q = FacetQuad::on_facet(mesh, f, fdeg);
    let n_f = facet.normal;
    let side = |k: usize, weight: f64, sign: f64| {
        let tab = space.tabulate(&Frame::of_element(mesh, k), k, &q.points);
        let a = coeffs.tensor[k];
        let an = a.apply(n_f);
        let flux = &tab.dx * an.x + &tab.dy * an.y;
        Side { dofs: space.dofs(k).to_vec(), val: tab.val, flux, weight, sign }
    };
    let mut sides = vec![side(facet.minus, aw.w_minus, 1.0)];
    if let Some(p) = facet.plus {
        sides.push(side(p, aw.w_plus, -1.0));
    }
    let pen = params.gamma * aw.alpha_min / facet.length;
    let mut out = Local::default();
    for ta in &sides {
        for tb in &sides {
            for i in 0..ta.dofs.len() {
                for j in 0..tb.dofs.len() {
                    let mut v = 0.0;
                    for (qi, &w) in q.weights.iter().enumerate() {
                        let (pi, pj) = (ta.val[(i, qi)], tb.val[(j, qi)]);
                        v += w
                            * (pen * ta.sign * tb.sign * pi * pj - tb.weight * tb.flux[(j, qi)] * ta.sign * pi
                                + params.delta * ta.weight * ta.flux[(i, qi)] * tb.sign * pj);
                    }
                    out.entries.push((ta.dofs[i], tb.dofs[j], v));
                }
            }
        }
    }
    if facet.kind == FacetKind::Dirichlet {
        let s = &sides[0];
        out.load = (0..s.dofs.len())
            .map(|i| {
                let r = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .enumerate()
                    .map(|(qi, (&x, &w))| w * (problem.dirichlet)(x) * (pen * s.val[(i, qi)] + params.delta * s.flux[(i, qi)]))
                    .sum();
                (s.dofs[i], r)
            })
            .collect();
    }
    out
}

/// Solves the discrete problem. `dg` is required for `Method::Dg` and ignored otherwise.
pub fn solve_problem<'a>(
    mesh: &'a Mesh,
    problem: &'a DiffusionProblem,
    method: Method,
    order: usize,
    dg: Option<DgParams>,
) -> Result<FemSolution<'a>> {
    if !mesh.facets().iter().any(|f| f.kind == FacetKind::Dirichlet) {
        return Err(Error::InvalidArgument("the Dirichlet boundary must be nonempty".into()));
    }
    let space = FemSpace::new(mesh, method, order)?;
    let coeffs = Coefficients::new(mesh, problem);
    if !coeffs.is_spd() {
        return Err(Error::InvalidArgument("coefficient is not positive definite".into()));
    }
    let params = match method {
        Method::Dg => Some(dg.unwrap_or_else(|| DgParams::default_for(order))),
        _ => None,
    };
    let qdeg = source_degree(order);
    let fdeg = 2 * order + 1;
    let mut locals: Vec<Local> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| element_system(&space, mesh, problem, &coeffs, k, qdeg))
        .collect();
    let facet_locals: Vec<Local> = (0..mesh.n_facets())
        .into_par_iter()
        .filter_map(|f| match (mesh.facet(f).kind, params) {
            (FacetKind::Neumann, _) => Some(neumann_load(&space, mesh, problem, f, fdeg)),
            (_, Some(p)) => Some(dg_facet(&space, mesh, problem, &coeffs, f, p, fdeg)),
            _ => None,
        })
        .collect();
    locals.extend(facet_locals);

    let n = space.n_dofs();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for (d, v) in space.dirichlet_values(mesh, &*problem.dirichlet) {
        fixed[d] = Some(v);
    }
    let mut free_index = vec![usize::MAX; n];
    let mut n_free = 0;
    for d in 0..n {
        if fixed[d].is_none() {
            free_index[d] = n_free;
            n_free += 1;
        }
    }
    let mut a = Triplets::new(n_free, n_free);
    let mut b = vec![0.0; n_free];
    for l in &locals {
        for &(i, j, v) in &l.entries {
            let fi = free_index[i];
            if fi == usize::MAX {
                continue;
            }
            match fixed[j] {
                Some(g) => b[fi] -= v * g,
                None => a.push(fi, free_index[j], v),
            }
        }
        for &(d, r) in &l.load {
            if free_index[d] != usize::MAX {
                b[free_index[d]] += r;
            }
        }
    }
    let kind = match params {
        Some(p) if p.delta != -1.0 => Factorization::Lu,
        _ => Factorization::Cholesky,
    };
    let x = solve(&a, &b, kind)?;
    let stats = SolverStats { unknowns: n_free, factorization: kind, relative_residual: relative_residual(&a, &x, &b) };
    let mut values = vec![0.0; n];
    for d in 0..n {
        values[d] = match fixed[d] {
            Some(g) => g,
            None => x[free_index[d]],
        };
    }
    let mut sol = FemSolution::from_values(mesh, problem, space, values, params);
    sol.coeffs = coeffs;
    sol.stats = Some(stats);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BenchmarkCase, BenchmarkKind};

    #[test]
    fn patch_test_reproduces_linears() {
        let case = BenchmarkCase::new(BenchmarkKind::Patch, 1.0);
        let mesh = crate::mesh::jittered_square(4, 0.2, 2, |p| (case.problem.boundary)(p)).unwrap();
        for (method, k) in [(Method::Cg, 1), (Method::Cg, 2), (Method::Nc, 1), (Method::Nc, 2), (Method::Nc, 3), (Method::Dg, 1), (Method::Dg, 2)] {
            let sol = solve_problem(&mesh, &case.problem, method, k, None).unwrap();
            let e = sol.total_energy_error().unwrap();
            assert!(e < 1e-10, "{method:?} {k}: {e:e}");
            assert!(sol.stats.as_ref().unwrap().relative_residual < 1e-10);
        }
    }

    fn rate(case: &BenchmarkCase, method: Method, k: usize) -> f64 {
        let errs: Vec<f64> = [4, 8]
            .iter()
            .map(|&n| {
                let mesh = case.mesh(n).unwrap();
                solve_problem(&mesh, &case.problem, method, k, None).unwrap().total_energy_error().unwrap()
            })
            .collect();
        (errs[0] / errs[1]).log2()
    }

    #[test]
    fn smooth_rates() {
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        for (method, k) in [(Method::Cg, 1), (Method::Cg, 2), (Method::Nc, 1), (Method::Nc, 2), (Method::Nc, 3), (Method::Dg, 1), (Method::Dg, 2)] {
            let r = rate(&case, method, k);
            assert!((r - k as f64).abs() < 0.25, "{method:?} {k}: {r}");
        }
    }

    #[test]
    fn mixed_boundary_rates() {
        let case = BenchmarkCase::new(BenchmarkKind::Mixed, 1.0);
        for (method, k) in [(Method::Cg, 1), (Method::Nc, 1), (Method::Dg, 2)] {
            let r = rate(&case, method, k);
            assert!((r - k as f64).abs() < 0.25, "{method:?} {k}: {r}");
        }
    }

    #[test]
    fn nonsymmetric_penalty_uses_lu() {
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        let mesh = case.mesh(4).unwrap();
        let sol = solve_problem(&mesh, &case.problem, Method::Dg, 1, Some(DgParams { gamma: 10.0, delta: 1.0 })).unwrap();
        assert_eq!(sol.stats.unwrap().factorization, Factorization::Lu);
    }

    #[test]
    fn tiny_penalty_is_indefinite() {
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        let mesh = case.mesh(4).unwrap();
        let r = solve_problem(&mesh, &case.problem, Method::Dg, 2, Some(DgParams { gamma: 0.01, delta: -1.0 }));
        assert!(matches!(r, Err(Error::Indefinite)));
    }
}
