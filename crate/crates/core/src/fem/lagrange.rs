//! Lagrange lattices and dual-basis construction in scaled monomials.

use nalgebra::DMatrix;

use super::poly::{n_mono, Frame, ScalarPoly};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::mesh::Mesh;

/// Barycentric lattice of degree `k` in local order: the three vertices,
/// then the interior points of local facets 0, 1, 2 (facet `i` runs from
/// vertex `i + 1` to vertex `i + 2`), then the element-interior points.
pub fn lattice(k: usize) -> Vec<[f64; 3]> {
    assert!(k >= 1);
    let kf = k as f64;
    let mut pts = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for i in 0..3 {
        for j in 1..k {
            let mut l = [0.0; 3];
            l[(i + 1) % 3] = 1.0 - j as f64 / kf;
            l[(i + 2) % 3] = j as f64 / kf;
            pts.push(l);
        }
    }
    pts.extend(interior_lattice(k));
    pts
}

/// Lattice points of degree `k` with all barycentric coordinates positive.
pub fn interior_lattice(k: usize) -> Vec<[f64; 3]> {
    let kf = k as f64;
    let mut pts = Vec::new();
    for a in 1..k {
        for b in 1..k.saturating_sub(a) {
            let c = k - a - b;
            pts.push([a as f64 / kf, b as f64 / kf, c as f64 / kf]);
        }
    }
    pts
}

pub fn to_point(corners: &[Vec2; 3], l: [f64; 3]) -> Vec2 {
    corners[0] * l[0] + corners[1] * l[1] + corners[2] * l[2]
}

/// Coefficients of the basis dual to the functionals in `d`, where
/// `d[(i, m)]` is functional `i` applied to monomial `m`. Row `j` of the
/// result holds the monomial coefficients of basis function `j`.
pub fn dual_basis(d: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = d
        .try_inverse()
        .ok_or_else(|| Error::Solver("singular local degree-of-freedom matrix".into()))?;
    Ok(inv.transpose())
}

/// Nodal basis of `P_degree` for the given points.
pub fn nodal_basis(frame: &Frame, degree: usize, nodes: &[Vec2]) -> Result<DMatrix<f64>> {
    let n = n_mono(degree);
    assert_eq!(nodes.len(), n);
    let mut d = DMatrix::zeros(n, n);
    let mut buf = vec![0.0; n];
    for (i, &x) in nodes.iter().enumerate() {
        frame.values(degree, x, &mut buf);
        for m in 0..n {
            d[(i, m)] = buf[m];
        }
    }
    dual_basis(d)
}

/// Interpolates a function of barycentric coordinates on element `k`; exact for polynomials of `degree`.
pub fn poly_from_barycentric(mesh: &Mesh, k: usize, degree: usize, f: impl Fn([f64; 3]) -> f64) -> ScalarPoly {
    let frame = Frame::of_element(mesh, k);
    let c = mesh.corners(k);
    let lat = lattice(degree);
    let nodes: Vec<Vec2> = lat.iter().map(|&l| to_point(&c, l)).collect();
    let b = nodal_basis(&frame, degree, &nodes).expect("lattice is unisolvent");
    let vals: Vec<f64> = lat.iter().map(|&l| f(l)).collect();
    let coeffs = (0..n_mono(degree))
        .map(|m| (0..vals.len()).map(|i| vals[i] * b[(i, m)]).sum())
        .collect();
    ScalarPoly { degree, coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{jittered_square, BoundaryTag};

    #[test]
    fn lattice_sizes() {
        for k in 1..6 {
            assert_eq!(lattice(k).len(), n_mono(k));
            assert_eq!(interior_lattice(k).len(), (k - 1) * k.saturating_sub(2) / 2);
        }
    }

    #[test]
    fn nodal_basis_is_kronecker() {
        let m = jittered_square(2, 0.2, 5, |_| BoundaryTag::Dirichlet).unwrap();
        let f = Frame::of_element(&m, 2);
        let c = m.corners(2);
        let nodes: Vec<Vec2> = lattice(3).iter().map(|&l| to_point(&c, l)).collect();
        let b = nodal_basis(&f, 3, &nodes).unwrap();
        for (j, &x) in nodes.iter().enumerate() {
            for i in 0..nodes.len() {
                let p = ScalarPoly { degree: 3, coeffs: b.row(i).iter().copied().collect() };
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p.eval(&f, x) - e).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn barycentric_product_is_exact() {
        let m = jittered_square(2, 0.2, 5, |_| BoundaryTag::Dirichlet).unwrap();
        let p = poly_from_barycentric(&m, 1, 2, |l| l[0] * l[1]);
        let f = Frame::of_element(&m, 1);
        let c = m.corners(1);
        let l = [0.2, 0.5, 0.3];
        assert!((p.eval(&f, to_point(&c, l)) - 0.1).abs() < 1e-13);
    }
}
