//! `earm run`: solve, recover and estimate on each level, writing CSV
//! files and mesh snapshots.

use std::fs;
use std::path::Path;

use earm::estimator::study::{run_levels, LevelResult};
use earm::estimator::{Effectivity, EstimatorReport};
use earm::mesh::{jittered_square, structured_square, write_mesh, Diagonal, Mesh};
use earm::problem::BenchmarkCase;

use crate::config::RunConfig;
use crate::CliError;

pub const COLUMNS: [&str; 13] = [
    "level", "h_max", "ndof", "kappa", "method", "recovery", "s", "error", "eta", "effectivity", "osc", "max_div_residual",
    "max_trace_jump",
];

pub fn initial_mesh(cfg: &RunConfig, case: &BenchmarkCase) -> Result<Mesh, CliError> {
    let tags = case.problem.boundary.clone();
    let mesh = if cfg.jitter > 0.0 {
        jittered_square(cfg.mesh_size, cfg.jitter, cfg.seed, move |x| tags(x))?
    } else {
        structured_square(cfg.mesh_size, Diagonal::Right, move |x| tags(x))?
    };
    Ok(mesh)
}

fn num(v: f64) -> String {
    format!("{v:.10e}")
}

fn row(level: usize, r: &EstimatorReport) -> Vec<String> {
    vec![
        level.to_string(),
        num(r.h_max),
        r.ndof.to_string(),
        num(r.kappa),
        r.method.name().to_string(),
        r.recovery.name().to_string(),
        r.s.to_string(),
        r.error.map(num).unwrap_or_default(),
        num(r.eta),
        match r.effectivity {
            Effectivity::Ratio(v) => num(v),
            Effectivity::ExactCase => "exact".into(),
            Effectivity::Undefined => String::new(),
        },
        num(r.osc),
        num(r.max_div_residual),
        num(r.max_trace_jump),
    ]
}

fn write_indicators(path: &Path, r: &EstimatorReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["element", "eta", "osc", "error"])?;
    for k in 0..r.eta_local.len() {
        let err = r.error_local.as_ref().map(|e| num(e[k])).unwrap_or_default();
        w.write_record([k.to_string(), num(r.eta_local[k]), num(r.osc_local[k]), err])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<Vec<LevelResult>, CliError> {
    let case = BenchmarkCase::new(cfg.problem, cfg.jump);
    let mesh = initial_mesh(cfg, &case)?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_config_text())?;
    let mut csv = csv::Writer::from_path(cfg.out.join("estimator.csv"))?;
    csv.write_record(COLUMNS)?;
    println!("{:>5} {:>10} {:>8} {:>12} {:>12} {:>12}", "level", "h_max", "ndof", "error", "eta", "effectivity");
    let results = run_levels(mesh, &case.problem, &cfg.discretization(), cfg.mode, cfg.theta, cfg.levels, |mesh, res| {
        let r = &res.report;
        csv.write_record(row(res.level, r))?;
        csv.flush()?;
        fs::write(cfg.out.join(format!("mesh_level_{:02}.txt", res.level)), write_mesh(mesh))?;
        write_indicators(&cfg.out.join(format!("indicators_level_{:02}.csv", res.level)), r)?;
        let eff = match r.effectivity {
            Effectivity::Ratio(v) => format!("{v:.4}"),
            Effectivity::ExactCase => "exact".into(),
            Effectivity::Undefined => "-".into(),
        };
        let err = r.error.map(|e| format!("{e:.4e}")).unwrap_or_else(|| "-".into());
        println!("{:>5} {:>10.4e} {:>8} {:>12} {:>12.4e} {:>12}", res.level, r.h_max, r.ndof, err, r.eta, eff);
        Ok::<_, CliError>(())
    })?;
    Ok(results)
}
