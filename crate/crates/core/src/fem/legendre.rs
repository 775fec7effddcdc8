//! Legendre polynomials shifted to `[0, 1]`: `L_j(t) = P_j(2t - 1)`.
//!
//! On an edge of length `h`, `int L_i L_j ds = delta_ij h / (2j + 1)`.

/// Writes `L_0(t), ..., L_n(t)` into `out[..=n]`.
pub fn legendre_all(n: usize, t: f64, out: &mut [f64]) {
    let x = 2.0 * t - 1.0;
    out[0] = 1.0;
    if n >= 1 {
        out[1] = x;
    }
    for j in 2..=n {
        out[j] = ((2 * j - 1) as f64 * x * out[j - 1] - (j - 1) as f64 * out[j - 2]) / j as f64;
    }
}

pub fn legendre(j: usize, t: f64) -> f64 {
    let mut buf = vec![0.0; j + 1];
    legendre_all(j, t, &mut buf);
    buf[j]
}

/// `int_0^1 L_j^2 dt`.
pub fn legendre_norm2(j: usize) -> f64 {
    1.0 / (2 * j + 1) as f64
}
