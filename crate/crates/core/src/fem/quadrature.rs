//! Gauss-Legendre edge rules and collapsed (Duffy) triangle rules.
//!
//! Weights are normalized to sum to one, so an integral over an edge or a
//! triangle is its measure times the weighted sum.

use std::sync::OnceLock;

const MAX_DEGREE: usize = 40;

#[derive(Clone, Debug)]
pub struct EdgeRule {
    /// Points in `[0, 1]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TriangleRule {
    /// Barycentric coordinates `(l0, l1, l2)` of each point.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> EdgeRule {
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        points[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    EdgeRule { points, weights }
}

fn build_edge(degree: usize) -> EdgeRule {
    gauss_legendre(degree / 2 + 1)
}

fn build_triangle(degree: usize) -> TriangleRule {
    // (xi, eta) = (u, (1 - u) v); the Jacobian adds one degree in u.
    let gu = gauss_legendre((degree + 1) / 2 + 1);
    let gv = gauss_legendre(degree / 2 + 1);
    let mut points = Vec::with_capacity(gu.points.len() * gv.points.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for (&u, &wu) in gu.points.iter().zip(&gu.weights) {
        for (&v, &wv) in gv.points.iter().zip(&gv.weights) {
            let xi = u;
            let eta = (1.0 - u) * v;
            points.push([1.0 - xi - eta, xi, eta]);
            weights.push(2.0 * wu * wv * (1.0 - u));
        }
    }
    TriangleRule { points, weights }
}

/// Edge rule exact for polynomials of the given degree.
pub fn edge_rule(degree: usize) -> &'static EdgeRule {
    static RULES: OnceLock<Vec<EdgeRule>> = OnceLock::new();
    &RULES.get_or_init(|| (0..=MAX_DEGREE).map(build_edge).collect())[degree.min(MAX_DEGREE)]
}

/// Triangle rule exact for polynomials of the given degree.
pub fn triangle_rule(degree: usize) -> &'static TriangleRule {
    static RULES: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    &RULES.get_or_init(|| (0..=MAX_DEGREE).map(build_triangle).collect())[degree.min(MAX_DEGREE)]
}
