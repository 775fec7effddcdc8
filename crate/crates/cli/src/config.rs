//! Run configuration: flat `key = value` files overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use earm::earm::Recovery;
use earm::estimator::study::{Discretization, RefinementMode};
use earm::fem::{DgParams, Method};
use earm::problem::BenchmarkKind;

use crate::CliError;

/// Options shared by every subcommand. Unset flags fall back to the config
/// file, then to the defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct Options {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Benchmark: smooth, patch, checkerboard or mixed.
    #[arg(long)]
    pub problem: Option<String>,
    /// Coefficient jump of the checkerboard benchmark.
    #[arg(long)]
    pub jump: Option<f64>,
    /// cg, nc or dg.
    #[arg(long)]
    pub method: Option<String>,
    /// Polynomial order k.
    #[arg(long)]
    pub order: Option<usize>,
    /// dg, nc-facet, nc-rt0, nc-fs2, cg-orth or cg-pou.
    #[arg(long)]
    pub recovery: Option<String>,
    /// Conservation index of the correction.
    #[arg(long)]
    pub rt_index: Option<usize>,
    /// Interior penalty parameter (DG only).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Symmetrization parameter in {-1, 0, 1} (DG only).
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// uniform or adaptive.
    #[arg(long)]
    pub mode: Option<String>,
    /// Doerfler parameter in (0, 1].
    #[arg(long)]
    pub theta: Option<f64>,
    /// Number of meshes, including the initial one.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Cells per side of the initial square mesh.
    #[arg(long)]
    pub mesh_size: Option<usize>,
    /// Vertex jitter of the initial mesh, in [0, 0.25); 0 keeps it structured.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the jittered mesh generator.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: BenchmarkKind,
    pub jump: f64,
    pub method: Method,
    pub order: usize,
    pub recovery: Recovery,
    pub rt_index: Option<usize>,
    pub dg: Option<DgParams>,
    pub mode: RefinementMode,
    pub theta: f64,
    pub levels: usize,
    pub mesh_size: usize,
    pub jitter: f64,
    pub out: PathBuf,
    pub seed: u64,
}

const KEYS: [&str; 15] = [
    "problem", "jump", "method", "order", "recovery", "rt-index", "gamma", "delta", "mode", "theta", "levels", "mesh-size",
    "jitter", "out", "seed",
];

/// Parses `key = value` lines; `#` starts a comment. Underscores in keys
/// are read as dashes.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key '{}'", i + 1, k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Config(format!("invalid value '{value}' for {key}")))
}

impl Options {
    fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let get = |k: &str| map.get(k).map(String::as_str);
        Ok(Self {
            config: None,
            problem: get("problem").map(str::to_string),
            jump: get("jump").map(|v| parse("jump", v)).transpose()?,
            method: get("method").map(str::to_string),
            order: get("order").map(|v| parse("order", v)).transpose()?,
            recovery: get("recovery").map(str::to_string),
            rt_index: get("rt-index").map(|v| parse("rt-index", v)).transpose()?,
            gamma: get("gamma").map(|v| parse("gamma", v)).transpose()?,
            delta: get("delta").map(|v| parse("delta", v)).transpose()?,
            mode: get("mode").map(str::to_string),
            theta: get("theta").map(|v| parse("theta", v)).transpose()?,
            levels: get("levels").map(|v| parse("levels", v)).transpose()?,
            mesh_size: get("mesh-size").map(|v| parse("mesh-size", v)).transpose()?,
            jitter: get("jitter").map(|v| parse("jitter", v)).transpose()?,
            out: get("out").map(PathBuf::from),
            seed: get("seed").map(|v| parse("seed", v)).transpose()?,
        })
    }

    /// Fields set here win over `base`.
    fn over(self, base: Options) -> Options {
        Options {
            config: self.config.or(base.config),
            problem: self.problem.or(base.problem),
            jump: self.jump.or(base.jump),
            method: self.method.or(base.method),
            order: self.order.or(base.order),
            recovery: self.recovery.or(base.recovery),
            rt_index: self.rt_index.or(base.rt_index),
            gamma: self.gamma.or(base.gamma),
            delta: self.delta.or(base.delta),
            mode: self.mode.or(base.mode),
            theta: self.theta.or(base.theta),
            levels: self.levels.or(base.levels),
            mesh_size: self.mesh_size.or(base.mesh_size),
            jitter: self.jitter.or(base.jitter),
            out: self.out.or(base.out),
            seed: self.seed.or(base.seed),
        }
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let merged = match &self.config {
            Some(path) => {
                let text = read(path)?;
                self.clone().over(Options::from_map(&parse_config_text(&text)?)?)
            }
            None => self,
        };
        RunConfig::from_options(merged)
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

impl RunConfig {
    fn from_options(o: Options) -> Result<Self, CliError> {
        let problem: BenchmarkKind = o.problem.as_deref().unwrap_or("smooth").parse()?;
        let method: Method = o.method.as_deref().unwrap_or("cg").parse()?;
        let order = o.order.unwrap_or(1);
        if order == 0 {
            return Err(CliError::Config("order must be at least 1".into()));
        }
        let recovery = match o.recovery.as_deref() {
            Some(r) => r.parse()?,
            None => Recovery::default_for(method, order),
        };
        if !recovery.supports(method, order) {
            return Err(CliError::Config(format!(
                "recovery '{recovery}' cannot be combined with method '{}' of order {order}",
                method.name()
            )));
        }
        let dg = match method {
            Method::Dg => {
                let base = DgParams::default_for(order);
                let delta = o.delta.unwrap_or(base.delta);
                if ![-1.0, 0.0, 1.0].contains(&delta) {
                    return Err(CliError::Config(format!("delta must be -1, 0 or 1, got {delta}")));
                }
                Some(DgParams { gamma: o.gamma.unwrap_or(base.gamma), delta })
            }
            _ if o.gamma.is_some() || o.delta.is_some() => {
                return Err(CliError::Config(format!("gamma and delta apply to method 'dg', not '{}'", method.name())));
            }
            _ => None,
        };
        let jitter = o.jitter.unwrap_or(0.0);
        let theta = o.theta.unwrap_or(0.5);
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(CliError::Config(format!("theta must lie in (0, 1], got {theta}")));
        }
        let cfg = RunConfig {
            problem,
            jump: o.jump.unwrap_or(1.0),
            method,
            order,
            recovery,
            rt_index: o.rt_index,
            dg,
            mode: o.mode.as_deref().unwrap_or("uniform").parse()?,
            theta,
            levels: o.levels.unwrap_or(3).max(1),
            mesh_size: o.mesh_size.unwrap_or(4),
            jitter,
            out: o.out.unwrap_or_else(|| PathBuf::from("earm-out")),
            seed: o.seed.unwrap_or(0),
        };
        cfg.discretization().validate().map_err(|e| CliError::Config(format!("recovery '{recovery}' with rt-index {:?}: {e}", cfg.rt_index)))?;
        if cfg.jump <= 0.0 {
            return Err(CliError::Config(format!("jump must be positive, got {}", cfg.jump)));
        }
        Ok(cfg)
    }

    pub fn discretization(&self) -> Discretization {
        Discretization { method: self.method, order: self.order, recovery: self.recovery, s: self.rt_index, dg: self.dg }
    }

    /// The resolved configuration in the file format, so a run can be replayed.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("problem", self.problem.name().into());
        put("jump", format!("{:?}", self.jump));
        put("method", self.method.name().into());
        put("order", self.order.to_string());
        put("recovery", self.recovery.name().into());
        if let Some(s) = self.rt_index {
            put("rt-index", s.to_string());
        }
        if let Some(dg) = self.dg {
            put("gamma", format!("{:?}", dg.gamma));
            put("delta", format!("{:?}", dg.delta));
        }
        put("mode", match self.mode {
            RefinementMode::Uniform => "uniform".into(),
            RefinementMode::Adaptive => "adaptive".into(),
        });
        put("theta", format!("{:?}", self.theta));
        put("levels", self.levels.to_string());
        put("mesh-size", self.mesh_size.to_string());
        put("jitter", format!("{:?}", self.jitter));
        put("out", self.out.display().to_string());
        put("seed", self.seed.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_yield_to_flags() {
        let map = parse_config_text("# study\nmethod = dg\norder=2\nrt_index = 1 # trailing\njump = 100\n").unwrap();
        let file = Options::from_map(&map).unwrap();
        let flags = Options { order: Some(1), ..Default::default() };
        let cfg = RunConfig::from_options(flags.over(file)).unwrap();
        assert_eq!((cfg.method, cfg.order, cfg.rt_index, cfg.jump), (Method::Dg, 1, Some(1), 100.0));
        assert_eq!(cfg.recovery, Recovery::Dg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("method").is_err());
    }

    #[test]
    fn incompatible_pair_is_named() {
        let o = Options { method: Some("nc".into()), order: Some(3), recovery: Some("nc-fs2".into()), ..Default::default() };
        let msg = RunConfig::from_options(o).unwrap_err().to_string();
        assert!(msg.contains("nc-fs2") && msg.contains("'nc'") && msg.contains('3'), "{msg}");
        let o = Options { method: Some("cg".into()), order: Some(2), recovery: Some("cg-orth".into()), rt_index: Some(2), ..Default::default() };
        assert!(RunConfig::from_options(o).is_err());
        let o = Options { method: Some("cg".into()), gamma: Some(3.0), ..Default::default() };
        assert!(RunConfig::from_options(o).is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let o = Options { method: Some("dg".into()), order: Some(2), mode: Some("adaptive".into()), theta: Some(0.3), ..Default::default() };
        let cfg = RunConfig::from_options(o).unwrap();
        let back = RunConfig::from_options(Options::from_map(&parse_config_text(&cfg.to_config_text()).unwrap()).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }
}
