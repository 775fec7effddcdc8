//! Doerfler marking.

/// Smallest set `M` with `sum_{K in M} eta_K^2 >= theta^2 sum_K eta_K^2`,
/// taken greedily by decreasing `eta_K^2` (ties: lower element id first).
pub fn doerfler_marking(eta: &[f64], theta: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| (eta[b] * eta[b]).total_cmp(&(eta[a] * eta[a])).then(a.cmp(&b)));
    let total: f64 = eta.iter().map(|e| e * e).sum();
    let target = theta * theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for k in order {
        if acc >= target && !marked.is_empty() {
            break;
        }
        acc += eta[k] * eta[k];
        marked.push(k);
    }
    marked.sort_unstable();
    marked
}
