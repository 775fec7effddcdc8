//! Corrections that turn the averaged flux into an equilibrated one, and
//! the checks that certify the result.

pub mod cg_orth;
pub mod cg_pou;
pub mod dg;
pub mod nc;
pub mod residual;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::averaging::{weighted_averaging_flux, AveragingFlux};
use crate::error::{Error, Result};
use crate::fem::element::{ElementQuad, FacetQuad};
use crate::fem::rt::{orthonormal_basis, RtFlux, RtSpace};
use crate::fem::space::monomial_table;
use crate::fem::{FemSolution, Method};
use crate::mesh::FacetKind;

pub use cg_pou::{closed_form, kernel_dimension, patch_system, PatchCorrection};
pub use residual::ResidualOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Recovery {
    Dg,
    NcFacet,
    NcRt0,
    NcFs2,
    CgOrth,
    CgPou,
}

impl Recovery {
    pub const ALL: [Recovery; 6] = [Self::Dg, Self::NcFacet, Self::NcRt0, Self::NcFs2, Self::CgOrth, Self::CgPou];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dg => "dg",
            Self::NcFacet => "nc-facet",
            Self::NcRt0 => "nc-rt0",
            Self::NcFs2 => "nc-fs2",
            Self::CgOrth => "cg-orth",
            Self::CgPou => "cg-pou",
        }
    }

    pub fn default_for(method: Method, order: usize) -> Recovery {
        match method {
            Method::Dg => Self::Dg,
            Method::Nc if order == 2 => Self::NcFs2,
            Method::Nc => Self::NcFacet,
            Method::Cg => Self::CgPou,
        }
    }

    /// Whether the recovery applies to `method` of `order` at all.
    pub fn supports(self, method: Method, order: usize) -> bool {
        match self {
            Self::Dg => method == Method::Dg,
            Self::NcFacet | Self::NcRt0 => method == Method::Nc && order % 2 == 1,
            Self::NcFs2 => method == Method::Nc && order == 2,
            Self::CgOrth | Self::CgPou => method == Method::Cg,
        }
    }

    /// Resolves the correction index `s` (conservation holds against `P_s`).
    pub fn correction_index(self, method: Method, order: usize, requested: Option<usize>) -> Result<usize> {
        if !self.supports(method, order) {
            return Err(Error::IncompatibleRecovery { recovery: self.name(), method: method.name(), order });
        }
        let fixed = |s: usize| match requested {
            Some(r) if r != s => Err(Error::InvalidArgument(format!("recovery {} uses rt-index {s}, got {r}", self.name()))),
            _ => Ok(s),
        };
        let bounded = |default: usize, max: usize| {
            let s = requested.unwrap_or(default);
            if s > max {
                Err(Error::InvalidArgument(format!("recovery {} needs rt-index <= {max}, got {s}", self.name())))
            } else {
                Ok(s)
            }
        };
        match self {
            Self::Dg => bounded(order - 1, order),
            Self::NcFacet => fixed(order - 1),
            Self::NcRt0 | Self::NcFs2 => fixed(0),
            Self::CgOrth => bounded(order - 1, order - 1),
            Self::CgPou => bounded(0, order - 1),
        }
    }

    /// Index of the averaged flux the residual is built on. For conforming
    /// and nonconforming solutions it is `k`: with `k - 1` the residual does
    /// not vanish on the trial space, which every correction relies on.
    pub fn averaging_index(self, order: usize, s: usize) -> usize {
        match self {
            Self::Dg => s,
            _ => order,
        }
    }
}

impl fmt::Display for Recovery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Recovery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown recovery '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct CorrectionFlux {
    pub flux: RtFlux,
    /// The construction actually used; `cg-pou` above index 0 runs `cg-orth`.
    pub construction: Recovery,
    /// Per-vertex data of the patch construction.
    pub patches: Vec<PatchCorrection>,
    /// Local Lagrange values of the quotient representative of `cg-orth`.
    pub quotient: Option<Vec<f64>>,
}

/// Builds the correction of index `s` from the residual operator.
pub fn correction(op: &ResidualOperator, recovery: Recovery, s: usize) -> Result<CorrectionFlux> {
    let sol = op.sol;
    let plain = |flux, construction| CorrectionFlux { flux, construction, patches: Vec::new(), quotient: None };
    match recovery {
        Recovery::Dg => Ok(plain(dg::dg_correction(sol, &RtSpace::new(sol.mesh, s)?)?, recovery)),
        Recovery::NcFacet => Ok(plain(nc::nc_facet_correction(op)?, recovery)),
        Recovery::NcRt0 => Ok(plain(nc::nc_rt0_correction(op)?, recovery)),
        Recovery::NcFs2 => Ok(plain(nc::nc_fs2_correction(op)?, recovery)),
        Recovery::CgPou if s == 0 => {
            let (flux, patches) = cg_pou::cg_pou_correction(op)?;
            Ok(CorrectionFlux { flux, construction: recovery, patches, quotient: None })
        }
        Recovery::CgOrth | Recovery::CgPou => {
            let (flux, w) = cg_orth::cg_orth_correction(op, s)?;
            Ok(CorrectionFlux { flux, construction: Recovery::CgOrth, patches: Vec::new(), quotient: Some(w) })
        }
    }
}

/// Certification of an equilibrated flux.
#[derive(Clone, Copy, Debug, Default)]
pub struct EquilibrationChecks {
    /// `max_K ||Pi_s (div sigma - f)||_K / (||f||_K + ||sigma||_{H(div),K})`.
    pub max_div_residual: f64,
    /// Largest normal-trace jump over interior facet quadrature points,
    /// relative to the largest normal trace (or 1 if that is smaller).
    pub max_trace_jump: f64,
    /// Largest difference between the Neumann moments of the flux and the
    /// projected Neumann data.
    pub neumann_trace_defect: f64,
}

#[derive(Clone, Debug)]
pub struct EquilibratedFlux {
    pub flux: RtFlux,
    pub space: RtSpace,
    pub recovery: Recovery,
    /// Divergence moments match `f` against `P_s`.
    pub conservation_index: usize,
    /// `||g - g_{s,F}||_F`, the largest over Neumann facets.
    pub neumann_defect: f64,
    pub checks: EquilibrationChecks,
}

impl EquilibratedFlux {
    pub fn index(&self) -> usize {
        self.flux.index
    }
}

/// `sigma_hat = sigma~ + sigma_delta`, in the space of the averaged flux.
pub fn assemble_equilibrated(
    sol: &FemSolution,
    space: RtSpace,
    averaged: &AveragingFlux,
    correction: &CorrectionFlux,
    recovery: Recovery,
) -> Result<EquilibratedFlux> {
    let s = correction.flux.index;
    if averaged.index() != space.index() {
        return Err(Error::IndexMismatch { expected: space.index(), found: averaged.index() });
    }
    if s > space.index() {
        return Err(Error::IndexMismatch { expected: space.index(), found: s });
    }
    let mesh = sol.mesh;
    let lifted = if s == space.index() {
        correction.flux.clone()
    } else {
        space.embed(mesh, &RtSpace::new(mesh, s)?, &correction.flux)?
    };
    let mut flux = averaged.flux.clone();
    flux.add_scaled(1.0, &lifted)?;
    let checks = check_equilibration(sol, &space, &flux, s)?;
    Ok(EquilibratedFlux { flux, space, recovery, conservation_index: s, neumann_defect: averaged.neumann_defect, checks })
}

pub fn check_equilibration(sol: &FemSolution, space: &RtSpace, flux: &RtFlux, s: usize) -> Result<EquilibrationChecks> {
    let mesh = sol.mesh;
    let fields: Vec<_> = (0..mesh.n_elements()).map(|k| space.field(mesh, flux, k)).collect::<Result<_>>()?;
    let deg = sol.quad_degree().max(2 * space.index() + 2);
    let max_div_residual = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let frame = space.frame(k);
            let q = ElementQuad::new(mesh, k, deg);
            let tests = orthonormal_basis(mesh, k, s);
            let tv = &tests * monomial_table(frame, s, &q.points).val;
            let mut res = vec![0.0; tests.nrows()];
            let (mut ff, mut ss, mut dd) = (0.0, 0.0, 0.0);
            for (qi, (&x, &w)) in q.points.iter().zip(&q.weights).enumerate() {
                let f = (sol.problem.source)(x);
                let d = fields[k].div(frame, x);
                let v = fields[k].eval(frame, x);
                ff += w * f * f;
                dd += w * d * d;
                ss += w * v.dot(v);
                for (r, out) in res.iter_mut().enumerate() {
                    *out += w * (d - f) * tv[(r, qi)];
                }
            }
            let scale = ff.sqrt() + (ss + dd).sqrt();
            let num = res.iter().map(|v| v * v).sum::<f64>().sqrt();
            if scale > 0.0 {
                num / scale
            } else {
                num
            }
        })
        .reduce(|| 0.0, f64::max);

    let fdeg = 2 * space.index() + 2;
    let (jump, trace) = (0..mesh.n_facets())
        .into_par_iter()
        .map(|f| {
            let facet = mesh.facet(f);
            let q = FacetQuad::on_facet(mesh, f, fdeg);
            let (mut j, mut t) = (0.0_f64, 0.0_f64);
            for &x in &q.points {
                let m = fields[facet.minus].eval(space.frame(facet.minus), x).dot(facet.normal);
                t = t.max(m.abs());
                if let Some(p) = facet.plus {
                    let pv = fields[p].eval(space.frame(p), x).dot(facet.normal);
                    j = j.max((m - pv).abs());
                }
            }
            (j, t)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));

    let a = space.index();
    let neumann_trace_defect = (0..mesh.n_facets())
        .filter(|&f| mesh.facet(f).kind == FacetKind::Neumann)
        .map(|f| {
            let g = sol.neumann_data(f);
            let m = flux.facet_moments(f);
            (0..=a).map(|j| (m[j] - g.get(j).copied().unwrap_or(0.0)).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(EquilibrationChecks { max_div_residual, max_trace_jump: jump / trace.max(1.0), neumann_trace_defect })
}

/// Everything produced by one recovery.
#[derive(Clone, Debug)]
pub struct Equilibration {
    pub averaged: AveragingFlux,
    pub correction: CorrectionFlux,
    pub equilibrated: EquilibratedFlux,
}

/// Averaging, residual, correction and assembly in one call.
pub fn equilibrate(sol: &FemSolution, recovery: Recovery, requested: Option<usize>) -> Result<Equilibration> {
    let s = recovery.correction_index(sol.method(), sol.order(), requested)?;
    let a = recovery.averaging_index(sol.order(), s);
    let space = RtSpace::new(sol.mesh, a)?;
    let averaged = weighted_averaging_flux(sol, &space)?;
    let op = ResidualOperator::new(sol, &space, &averaged)?;
    let correction = correction(&op, recovery, s)?;
    let equilibrated = assemble_equilibrated(sol, space, &averaged, &correction, recovery)?;
    Ok(Equilibration { averaged, correction, equilibrated })
}

/// Normal-moment sum `sum_F sign_K(F) int_F tau . n_F` for every element.
pub fn element_flux_balance(mesh: &crate::mesh::Mesh, flux: &RtFlux) -> Vec<f64> {
    let m = flux.index + 1;
    (0..mesh.n_elements())
        .map(|k| {
            mesh.element_facets(k)
                .iter()
                .enumerate()
                .map(|(i, &f)| mesh.sign(k, i) * flux.facet[f * m])
                .sum()
        })
        .collect()
}
