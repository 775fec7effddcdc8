//! Scaled monomials on an element.
//!
//! With `xi = (x - c) / h`, monomials of total degree at most `p` are
//! ordered by degree and then by the power of `eta`:
//! `1, xi, eta, xi^2, xi eta, eta^2, ...`. Degrees up to 15 are supported.

use crate::geometry::Vec2;
use crate::mesh::Mesh;

pub fn n_mono(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Number of monomials of exactly the given degree.
pub fn n_homogeneous(degree: usize) -> usize {
    degree + 1
}

pub fn exponents(degree: usize) -> Vec<(usize, usize)> {
    (0..=degree)
        .flat_map(|d| (0..=d).map(move |j| (d - j, j)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub center: Vec2,
    pub scale: f64,
}

impl Frame {
    pub fn of_element(mesh: &Mesh, k: usize) -> Frame {
        Frame {
            center: mesh.centroid(k),
            scale: mesh.diameter(k),
        }
    }

    pub fn local(&self, x: Vec2) -> (f64, f64) {
        ((x.x - self.center.x) / self.scale, (x.y - self.center.y) / self.scale)
    }

    /// Monomial values at `x`.
    pub fn values(&self, degree: usize, x: Vec2, out: &mut [f64]) {
        let (xi, eta) = self.local(x);
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        for p in 1..=degree {
            px[p] = px[p - 1] * xi;
            py[p] = py[p - 1] * eta;
        }
        let mut i = 0;
        for d in 0..=degree {
            for b in 0..=d {
                out[i] = px[d - b] * py[b];
                i += 1;
            }
        }
    }

    /// Monomial values and physical gradients at `x`.
    pub fn values_and_grads(&self, degree: usize, x: Vec2, v: &mut [f64], dx: &mut [f64], dy: &mut [f64]) {
        let (xi, eta) = self.local(x);
        let n = n_mono(degree);
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        for p in 1..=degree {
            px[p] = px[p - 1] * xi;
            py[p] = py[p - 1] * eta;
        }
        let s = 1.0 / self.scale;
        let mut i = 0;
        for d in 0..=degree {
            for b in 0..=d {
                let a = d - b;
                v[i] = px[a] * py[b];
                dx[i] = if a > 0 { a as f64 * px[a - 1] * py[b] * s } else { 0.0 };
                dy[i] = if b > 0 { b as f64 * px[a] * py[b - 1] * s } else { 0.0 };
                i += 1;
            }
        }
        debug_assert_eq!(i, n);
    }
}

/// Polynomial in the monomial basis of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarPoly {
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl ScalarPoly {
    pub fn zero(degree: usize) -> Self {
        Self { degree, coeffs: vec![0.0; n_mono(degree)] }
    }

    pub fn eval(&self, frame: &Frame, x: Vec2) -> f64 {
        let mut m = vec![0.0; self.coeffs.len()];
        frame.values(self.degree, x, &mut m);
        dot(&m, &self.coeffs)
    }

    pub fn grad(&self, frame: &Frame, x: Vec2) -> Vec2 {
        let n = self.coeffs.len();
        let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        frame.values_and_grads(self.degree, x, &mut v, &mut dx, &mut dy);
        Vec2::new(dot(&dx, &self.coeffs), dot(&dy, &self.coeffs))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_match_exponents() {
        let f = Frame { center: Vec2::new(0.2, -0.1), scale: 0.5 };
        for x in [Vec2::new(0.7, 0.3), Vec2::new(0.2, 0.4), Vec2::new(0.2, -0.1)] {
            let (xi, eta) = f.local(x);
            let mut v = vec![0.0; n_mono(4)];
            f.values(4, x, &mut v);
            for (i, (a, b)) in exponents(4).into_iter().enumerate() {
                assert!((v[i] - xi.powi(a as i32) * eta.powi(b as i32)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let f = Frame { center: Vec2::new(0.0, 0.0), scale: 2.0 };
        let p = ScalarPoly { degree: 3, coeffs: (0..10).map(|i| (i as f64).sin()).collect() };
        let x = Vec2::new(0.3, -0.4);
        let g = p.grad(&f, x);
        let e = 1e-6;
        let gx = (p.eval(&f, x + Vec2::new(e, 0.0)) - p.eval(&f, x - Vec2::new(e, 0.0))) / (2.0 * e);
        let gy = (p.eval(&f, x + Vec2::new(0.0, e)) - p.eval(&f, x - Vec2::new(0.0, e))) / (2.0 * e);
        assert!((g.x - gx).abs() < 1e-8 && (g.y - gy).abs() < 1e-8);
    }
}

/// Index of `xi^a eta^b` in the monomial ordering.
pub fn mono_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Vector polynomial `(cx, cy)` in the monomial basis of a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct VecPoly {
    pub degree: usize,
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
}

impl VecPoly {
    pub fn zero(degree: usize) -> Self {
        Self { degree, cx: vec![0.0; n_mono(degree)], cy: vec![0.0; n_mono(degree)] }
    }

    pub fn eval(&self, frame: &Frame, x: Vec2) -> Vec2 {
        let mut m = [0.0; 136];
        let n = self.cx.len();
        frame.values(self.degree, x, &mut m[..n]);
        Vec2::new(dot(&m[..n], &self.cx), dot(&m[..n], &self.cy))
    }

    pub fn div(&self, frame: &Frame, x: Vec2) -> f64 {
        let n = self.cx.len();
        let (mut v, mut dx, mut dy) = ([0.0; 136], [0.0; 136], [0.0; 136]);
        frame.values_and_grads(self.degree, x, &mut v[..n], &mut dx[..n], &mut dy[..n]);
        dot(&dx[..n], &self.cx) + dot(&dy[..n], &self.cy)
    }

    pub fn add_scaled(&mut self, s: f64, other: &VecPoly) {
        assert_eq!(self.degree, other.degree);
        for (a, b) in self.cx.iter_mut().zip(&other.cx) {
            *a += s * b;
        }
        for (a, b) in self.cy.iter_mut().zip(&other.cy) {
            *a += s * b;
        }
    }
}
