//! Diffusion problems `-div(A grad u) = f`, coefficient weights and the benchmark catalog.
//!
//! Neumann data is the prescribed normal flux `g = -A grad u . n`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::geometry::{Tensor2, Vec2};
use crate::mesh::{structured_square, BoundaryTag, Diagonal, Mesh};

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Vec2) -> Tensor2 + Send + Sync>;
/// `g(x, n)` for a boundary point `x` with outward normal `n`.
pub type FluxField = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;
pub type TagField = Arc<dyn Fn(Vec2) -> BoundaryTag + Send + Sync>;

#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarField,
    pub gradient: VectorField,
}

#[derive(Clone)]
pub struct DiffusionProblem {
    pub name: String,
    /// Sampled at element centroids; must be constant on each element.
    pub coefficient: TensorField,
    pub source: ScalarField,
    pub dirichlet: ScalarField,
    pub neumann: FluxField,
    /// Boundary tag as a function of the facet midpoint.
    pub boundary: TagField,
    pub exact: Option<ExactSolution>,
    /// Coefficient contrast, reported in study output.
    pub kappa: f64,
}

/// Per-element coefficient data.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub tensor: Vec<Tensor2>,
    /// Largest eigenvalue of `A_K`.
    pub alpha: Vec<f64>,
    /// Smallest eigenvalue of `A_K`.
    pub alpha_low: Vec<f64>,
}

impl Coefficients {
    pub fn new(mesh: &Mesh, problem: &DiffusionProblem) -> Self {
        let tensor: Vec<Tensor2> = (0..mesh.n_elements())
            .map(|k| (problem.coefficient)(mesh.centroid(k)))
            .collect();
        Self {
            alpha: tensor.iter().map(Tensor2::max_eigenvalue).collect(),
            alpha_low: tensor.iter().map(Tensor2::min_eigenvalue).collect(),
            tensor,
        }
    }

    /// True when every tensor is symmetric positive definite.
    pub fn is_spd(&self) -> bool {
        self.alpha_low.iter().all(|&a| a > 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaWeights {
    pub w_minus: f64,
    pub w_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl AlphaWeights {
    /// `w^- = alpha^+ / (alpha^- + alpha^+)`, `w^+ = alpha^- / (alpha^- + alpha^+)`.
    pub fn interior(alpha_minus: f64, alpha_plus: f64) -> Self {
        let s = alpha_minus + alpha_plus;
        Self {
            w_minus: alpha_plus / s,
            w_plus: alpha_minus / s,
            alpha_minus,
            alpha_plus,
            alpha_min: alpha_minus.min(alpha_plus),
            alpha_max: alpha_minus.max(alpha_plus),
        }
    }

    /// Boundary facets: the whole weight sits on the existing side.
    pub fn boundary(alpha_minus: f64) -> Self {
        Self {
            w_minus: 1.0,
            w_plus: 0.0,
            alpha_minus,
            alpha_plus: alpha_minus,
            alpha_min: alpha_minus,
            alpha_max: alpha_minus,
        }
    }

    /// Weighted average `w^- v^- + w^+ v^+`.
    pub fn average(&self, minus: f64, plus: f64) -> f64 {
        self.w_minus * minus + self.w_plus * plus
    }

    /// Conjugate average `w^+ v^- + w^- v^+`; zero on boundary facets.
    pub fn conjugate_average(&self, minus: f64, plus: f64) -> f64 {
        self.w_plus * minus + self.w_minus * plus
    }
}

pub fn alpha_weights(coeffs: &Coefficients, mesh: &Mesh, f: usize) -> AlphaWeights {
    let facet = mesh.facet(f);
    match facet.plus {
        Some(p) => AlphaWeights::interior(coeffs.alpha[facet.minus], coeffs.alpha[p]),
        None => AlphaWeights::boundary(coeffs.alpha[facet.minus]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    /// `A = I`, `u = sin(pi x) sin(pi y)`, pure Dirichlet.
    Smooth,
    /// `A = I`, `u = x + 2y`, Dirichlet on `x = 0` and `y = 0`, Neumann elsewhere.
    Patch,
    /// `A = kappa I` on the upper-right quadrant, `I` elsewhere, homogeneous Dirichlet.
    Checkerboard,
    /// `A = I`, `u = sin(pi x) e^y`, Dirichlet on `x = 0` and `y = 0`, Neumann elsewhere.
    Mixed,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 4] = [Self::Smooth, Self::Patch, Self::Checkerboard, Self::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Self::Smooth => "smooth",
            Self::Patch => "patch",
            Self::Checkerboard => "checkerboard",
            Self::Mixed => "mixed",
        }
    }
}

impl std::str::FromStr for BenchmarkKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown problem '{s}'")))
    }
}

fn mixed_tags(p: Vec2) -> BoundaryTag {
    if p.x < 1e-12 || p.y < 1e-12 {
        BoundaryTag::Dirichlet
    } else {
        BoundaryTag::Neumann
    }
}

fn identity_problem(name: &str, u: ScalarField, grad: VectorField, f: ScalarField, tags: TagField) -> DiffusionProblem {
    let g = grad.clone();
    DiffusionProblem {
        name: name.into(),
        coefficient: Arc::new(|_| Tensor2::scalar(1.0)),
        source: f,
        dirichlet: u.clone(),
        neumann: Arc::new(move |x, n| -g(x).dot(n)),
        boundary: tags,
        exact: Some(ExactSolution { value: u, gradient: grad }),
        kappa: 1.0,
    }
}

/// Quadrant coefficient of the checkerboard case.
pub fn checkerboard_coefficient(kappa: f64, x: Vec2) -> f64 {
    if x.x > 0.5 && x.y > 0.5 {
        kappa
    } else {
        1.0
    }
}

impl BenchmarkKind {
    /// `kappa` only affects the checkerboard case.
    pub fn problem(self, kappa: f64) -> DiffusionProblem {
        match self {
            Self::Smooth => identity_problem(
                "smooth",
                Arc::new(|x| (PI * x.x).sin() * (PI * x.y).sin()),
                Arc::new(|x| {
                    Vec2::new(
                        PI * (PI * x.x).cos() * (PI * x.y).sin(),
                        PI * (PI * x.x).sin() * (PI * x.y).cos(),
                    )
                }),
                Arc::new(|x| 2.0 * PI * PI * (PI * x.x).sin() * (PI * x.y).sin()),
                Arc::new(|_| BoundaryTag::Dirichlet),
            ),
            Self::Patch => identity_problem(
                "patch",
                Arc::new(|x| x.x + 2.0 * x.y),
                Arc::new(|_| Vec2::new(1.0, 2.0)),
                Arc::new(|_| 0.0),
                Arc::new(mixed_tags),
            ),
            Self::Mixed => identity_problem(
                "mixed",
                Arc::new(|x| (PI * x.x).sin() * x.y.exp()),
                Arc::new(|x| Vec2::new(PI * (PI * x.x).cos() * x.y.exp(), (PI * x.x).sin() * x.y.exp())),
                Arc::new(|x| (PI * PI - 1.0) * (PI * x.x).sin() * x.y.exp()),
                Arc::new(mixed_tags),
            ),
            Self::Checkerboard => {
                let w = 2.0 * PI;
                let psi = move |x: Vec2| (w * x.x).sin() * (w * x.y).sin();
                let dpsi = move |x: Vec2| {
                    Vec2::new(w * (w * x.x).cos() * (w * x.y).sin(), w * (w * x.x).sin() * (w * x.y).cos())
                };
                DiffusionProblem {
                    name: "checkerboard".into(),
                    coefficient: Arc::new(move |x| Tensor2::scalar(checkerboard_coefficient(kappa, x))),
                    source: Arc::new(move |x| 2.0 * w * w * psi(x)),
                    dirichlet: Arc::new(|_| 0.0),
                    neumann: Arc::new(|_, _| 0.0),
                    boundary: Arc::new(|_| BoundaryTag::Dirichlet),
                    exact: Some(ExactSolution {
                        value: Arc::new(move |x| psi(x) / checkerboard_coefficient(kappa, x)),
                        gradient: Arc::new(move |x| dpsi(x) * (1.0 / checkerboard_coefficient(kappa, x))),
                    }),
                    kappa,
                }
            }
        }
    }
}

/// A benchmark problem with its mesh family.
#[derive(Clone)]
pub struct BenchmarkCase {
    pub kind: BenchmarkKind,
    pub problem: DiffusionProblem,
}

impl BenchmarkCase {
    pub fn new(kind: BenchmarkKind, kappa: f64) -> Self {
        Self { kind, problem: kind.problem(kappa) }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Structured `n x n` mesh of the unit square tagged for this case.
    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        let tags = self.problem.boundary.clone();
        structured_square(n, Diagonal::Right, move |p| tags(p))
    }
}

pub fn benchmark_catalog(kappa: f64) -> Vec<BenchmarkCase> {
    BenchmarkKind::ALL.into_iter().map(|k| BenchmarkCase::new(k, kappa)).collect()
}
