//! Solve, recover and estimate over a sequence of meshes.

use crate::earm::{equilibrate, Recovery};
use crate::error::{Error, Result};
use crate::fem::{solve_problem, DgParams, Method};
use crate::mesh::{refine, refine_uniform, Mesh};
use crate::problem::DiffusionProblem;

use super::{doerfler_marking, indicator, max_local_efficiency, EstimatorReport};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    pub method: Method,
    pub order: usize,
    pub recovery: Recovery,
    /// Conservation index; `None` picks the recovery's default.
    pub s: Option<usize>,
    pub dg: Option<DgParams>,
}

impl Discretization {
    pub fn new(method: Method, order: usize, recovery: Recovery) -> Self {
        Self { method, order, recovery, s: None, dg: None }
    }

    pub fn with_default_recovery(method: Method, order: usize) -> Self {
        Self::new(method, order, Recovery::default_for(method, order))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.recovery.supports(self.method, self.order) {
            return Err(Error::InvalidArgument(format!(
                "recovery '{}' is incompatible with method '{}' of order {}",
                self.recovery,
                self.method.name(),
                self.order
            )));
        }
        self.recovery.correction_index(self.method, self.order, self.s).map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinementMode {
    Uniform,
    Adaptive,
}

impl std::str::FromStr for RefinementMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "adaptive" => Ok(Self::Adaptive),
            _ => Err(Error::InvalidArgument(format!("unknown refinement mode '{s}'"))),
        }
    }
}

/// Estimator report plus the largest local efficiency ratio.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub level: usize,
    pub report: EstimatorReport,
    pub max_local_ratio: Option<f64>,
}

pub fn run_level(mesh: &Mesh, problem: &DiffusionProblem, disc: &Discretization, level: usize) -> Result<LevelResult> {
    disc.validate()?;
    let sol = solve_problem(mesh, problem, disc.method, disc.order, disc.dg)?;
    let eq = equilibrate(&sol, disc.recovery, disc.s)?;
    let report = indicator(&sol, &eq.equilibrated, problem.kappa)?;
    let max_local_ratio = max_local_efficiency(&sol, &report);
    Ok(LevelResult { level, report, max_local_ratio })
}

/// Runs `levels` levels starting from `mesh`. `observe` sees each mesh with
/// its result before the next refinement; its error aborts the run.
pub fn run_levels<E: From<Error>>(
    mesh: Mesh,
    problem: &DiffusionProblem,
    disc: &Discretization,
    mode: RefinementMode,
    theta: f64,
    levels: usize,
    mut observe: impl FnMut(&Mesh, &LevelResult) -> std::result::Result<(), E>,
) -> std::result::Result<Vec<LevelResult>, E> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {theta}")).into());
    }
    let mut mesh = mesh;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let result = run_level(&mesh, problem, disc, level)?;
        observe(&mesh, &result)?;
        if level + 1 < levels {
            mesh = match mode {
                RefinementMode::Uniform => refine_uniform(&mesh)?,
                RefinementMode::Adaptive => {
                    let mut marked = vec![false; mesh.n_elements()];
                    for k in doerfler_marking(&result.report.eta_local, theta) {
                        marked[k] = true;
                    }
                    refine(&mesh, &marked)?
                }
            };
        }
        out.push(result);
    }
    Ok(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// One row of an efficiency table.
#[derive(Clone, Debug)]
pub struct EfficiencyRow {
    pub h_max: f64,
    pub kappa: f64,
    pub error: Option<f64>,
    pub eta: f64,
    pub effectivity: super::Effectivity,
    pub max_local_ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EfficiencyTable {
    pub rows: Vec<EfficiencyRow>,
    /// Largest over smallest effectivity across the kappa sweep at the finest level.
    pub kappa_spread: Option<f64>,
    /// `kappa_spread > 2`.
    pub drift: bool,
}

/// Uniform refinement study for every `kappa`, built by `problem(kappa)`.
pub fn efficiency_study(
    mesh: &Mesh,
    problem: impl Fn(f64) -> DiffusionProblem,
    disc: &Discretization,
    refinements: usize,
    kappas: &[f64],
) -> Result<EfficiencyTable> {
    let mut rows = Vec::new();
    let mut finest = Vec::new();
    for &kappa in kappas {
        let p = problem(kappa);
        let levels = run_levels(mesh.clone(), &p, disc, RefinementMode::Uniform, 1.0, refinements + 1, |_, _| Ok::<_, Error>(()))?;
        for r in &levels {
            rows.push(EfficiencyRow {
                h_max: r.report.h_max,
                kappa,
                error: r.report.error,
                eta: r.report.eta,
                effectivity: r.report.effectivity,
                max_local_ratio: r.max_local_ratio,
            });
        }
        finest.extend(levels.last().and_then(|r| r.report.effectivity.value()));
    }
    let kappa_spread = (finest.len() == kappas.len() && !finest.is_empty()).then(|| {
        let hi = finest.iter().copied().fold(f64::MIN, f64::max);
        let lo = finest.iter().copied().fold(f64::MAX, f64::min);
        hi / lo
    });
    Ok(EfficiencyTable { rows, drift: kappa_spread.is_some_and(|s| s > 2.0), kappa_spread })
}
