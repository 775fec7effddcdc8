//! `earm verify`: the invariant suite on small fixed meshes, reported as a
//! margin table. Any violation makes the command fail.

use earm::averaging::weighted_averaging_flux;
use earm::earm::{closed_form, equilibrate, kernel_dimension, Recovery, ResidualOperator};
use earm::estimator::{indicator, oracle_equilibrated_flux};
use earm::fem::rt::RtSpace;
use earm::fem::{solve_problem, Method};
use earm::mesh::{jittered_square, Mesh, PatchKind};
use earm::problem::{BenchmarkCase, BenchmarkKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

#[derive(Clone, Debug)]
pub struct Check {
    pub module: &'static str,
    pub invariant: &'static str,
    pub case: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }

    /// `tolerance - value`; negative on violation.
    pub fn margin(&self) -> f64 {
        self.tolerance - self.value
    }
}

/// Test hook: orientation sign to flip in every fixture mesh.
#[derive(Clone, Copy, Debug)]
pub struct SignFlip {
    pub element: usize,
    pub local: usize,
}

const PAIRS: [(Method, usize, Recovery); 13] = [
    (Method::Cg, 1, Recovery::CgOrth),
    (Method::Cg, 1, Recovery::CgPou),
    (Method::Cg, 2, Recovery::CgOrth),
    (Method::Cg, 2, Recovery::CgPou),
    (Method::Cg, 3, Recovery::CgOrth),
    (Method::Nc, 1, Recovery::NcFacet),
    (Method::Nc, 1, Recovery::NcRt0),
    (Method::Nc, 2, Recovery::NcFs2),
    (Method::Nc, 3, Recovery::NcFacet),
    (Method::Nc, 3, Recovery::NcRt0),
    (Method::Dg, 1, Recovery::Dg),
    (Method::Dg, 2, Recovery::Dg),
    (Method::Dg, 3, Recovery::Dg),
];

struct Suite {
    checks: Vec<Check>,
    flip: Option<SignFlip>,
    seed: u64,
}

impl Suite {
    fn push(&mut self, module: &'static str, invariant: &'static str, case: String, value: f64, tolerance: f64) {
        // NaN counts as a violation.
        let value = if value.is_nan() { f64::INFINITY } else { value };
        self.checks.push(Check { module, invariant, case, value, tolerance });
    }

    fn mesh(&self, case: &BenchmarkCase, n: usize) -> Mesh {
        let tags = case.problem.boundary.clone();
        let mesh = jittered_square(n, 0.2, self.seed, move |x| tags(x)).expect("fixture mesh");
        match self.flip {
            Some(f) if f.element < mesh.n_elements() && f.local < 3 => mesh.with_flipped_sign(f.element, f.local),
            _ => mesh,
        }
    }

    fn equilibration(&mut self, kappa: f64) {
        for kind in [BenchmarkKind::Checkerboard, BenchmarkKind::Mixed] {
            let case = BenchmarkCase::new(kind, kappa);
            let mesh = self.mesh(&case, 6);
            for (m, k, rec) in PAIRS {
                let label = format!("{} {}{k} {rec}", kind.name(), m.name());
                let checks = solve_problem(&mesh, &case.problem, m, k, None)
                    .and_then(|sol| equilibrate(&sol, rec, None).map(|e| e.equilibrated.checks));
                let (div, jump, neu) = match checks {
                    Ok(c) => (c.max_div_residual, c.max_trace_jump, c.neumann_trace_defect),
                    Err(_) => (f64::INFINITY, f64::INFINITY, f64::INFINITY),
                };
                self.push("earm", "conservation", label.clone(), div, 1e-10);
                self.push("earm", "conformity", label.clone(), jump, 1e-11);
                if kind == BenchmarkKind::Mixed {
                    self.push("earm", "neumann-trace", label, neu, 1e-12);
                }
            }
        }
    }

    fn compatibility(&mut self) {
        let case = BenchmarkCase::new(BenchmarkKind::Smooth, 1.0);
        let mesh = self.mesh(&case, 6);
        for (m, k) in [(Method::Cg, 1), (Method::Cg, 2), (Method::Cg, 3), (Method::Nc, 1), (Method::Nc, 2), (Method::Nc, 3)] {
            let defect = solve_problem(&mesh, &case.problem, m, k, None)
                .and_then(|sol| {
                    let rt = RtSpace::new(&mesh, k)?;
                    let av = weighted_averaging_flux(&sol, &rt)?;
                    Ok(ResidualOperator::new(&sol, &rt, &av)?.compatibility_defect())
                })
                .unwrap_or(f64::INFINITY);
            self.push("earm", "compatibility", format!("smooth {}{k}", m.name()), defect, 1e-10);
        }
    }

    fn oracle(&mut self, kappa: f64) {
        let case = BenchmarkCase::new(BenchmarkKind::Checkerboard, kappa);
        let mesh = self.mesh(&case, 5);
        for (m, k, rec) in PAIRS.into_iter().filter(|p| p.1 <= 2) {
            let label = format!("checkerboard {}{k} {rec}", m.name());
            let out = solve_problem(&mesh, &case.problem, m, k, None).and_then(|sol| {
                let eq = equilibrate(&sol, rec, None)?.equilibrated;
                let eta = indicator(&sol, &eq, kappa)?.eta;
                let o = oracle_equilibrated_flux(&sol, eq.index(), eq.conservation_index)?;
                Ok((eta, o.eta, o.checks.max_div_residual))
            });
            let (excess, div) = match out {
                Ok((eta, oracle, div)) => ((oracle - eta).max(0.0) / oracle.max(1e-300), div),
                Err(_) => (f64::INFINITY, f64::INFINITY),
            };
            self.push("estimator", "oracle-dominance", label.clone(), excess, 1e-12);
            self.push("estimator", "oracle-divergence", label, div, 1e-10);
        }
    }

    fn additivity(&mut self, kappa: f64) {
        let case = BenchmarkCase::new(BenchmarkKind::Checkerboard, kappa);
        let mesh = self.mesh(&case, 6);
        let worst = PAIRS
            .iter()
            .map(|&(m, k, rec)| {
                solve_problem(&mesh, &case.problem, m, k, None)
                    .and_then(|sol| {
                        let eq = equilibrate(&sol, rec, None)?;
                        let r = indicator(&sol, &eq.equilibrated, kappa)?;
                        let sum: f64 = r.eta_local.iter().map(|e| e * e).sum();
                        Ok((r.eta * r.eta - sum).abs() / sum.max(1e-300))
                    })
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max);
        self.push("estimator", "additivity", "checkerboard, all pairs".into(), worst, 1e-13);
    }

    /// Closed form against a direct solve of the cyclic system with the weight row.
    fn pou_closed_form(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut worst = 0.0_f64;
        for _ in 0..200 {
            let t = rng.gen_range(3..=8);
            let a: Vec<f64> = (0..t).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
            let mut r: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = r.iter().sum::<f64>() / t as f64;
            r.iter_mut().for_each(|v| *v -= mean);
            let x = closed_form(&a, &r[..t - 1]);
            let mut m = DMatrix::zeros(t, t);
            let mut b = DVector::zeros(t);
            for i in 0..t - 1 {
                m[(i, i)] = 1.0;
                m[(i, i + 1)] = -1.0;
                b[i] = r[i];
            }
            for j in 0..t {
                m[(t - 1, j)] = a[j];
            }
            let y = m.lu().solve(&b).unwrap_or_else(|| DVector::from_element(t, f64::INFINITY));
            let scale = y.amax().max(1.0);
            worst = worst.max(x.iter().zip(y.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / scale);
        }
        self.push("earm", "pou-closed-form", "200 random interior patches".into(), worst, 1e-12);
    }

    fn kernels(&mut self) {
        let case = BenchmarkCase::new(BenchmarkKind::Mixed, 1.0);
        let mesh = self.mesh(&case, 5);
        let wrong = (0..mesh.n_vertices())
            .filter(|&z| {
                let expected = match mesh.patch(z).kind {
                    PatchKind::Interior | PatchKind::DirichletDirichlet => 1,
                    _ => 0,
                };
                kernel_dimension(&mesh, z) != expected
            })
            .count();
        self.push("mesh", "patch-kernel-dimension", format!("mixed, {} vertices", mesh.n_vertices()), wrong as f64, 0.0);
    }
}

pub fn verify(cfg: &RunConfig, flip: Option<SignFlip>) -> Vec<Check> {
    let mut suite = Suite { checks: Vec::new(), flip, seed: cfg.seed };
    suite.equilibration(cfg.jump);
    suite.compatibility();
    suite.oracle(cfg.jump);
    suite.additivity(cfg.jump);
    suite.pou_closed_form();
    suite.kernels();
    suite.checks
}

pub fn print_table(checks: &[Check]) {
    println!("{:<10} {:<24} {:<32} {:>11} {:>9} {:>11}  status", "module", "invariant", "case", "value", "tol", "margin");
    for c in checks {
        println!(
            "{:<10} {:<24} {:<32} {:>11.3e} {:>9.1e} {:>11.3e}  {}",
            c.module,
            c.invariant,
            c.case,
            c.value,
            c.tolerance,
            c.margin(),
            if c.passed() { "ok" } else { "VIOLATED" }
        );
    }
}
