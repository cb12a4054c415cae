//! Gauss–Legendre rules with a small cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use num_complex::Complex64 as C64;

/// Nodes and weights on `[-1, 1]`.
pub fn legendre(deg: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(deg.max(2))
        .or_insert_with(|| {
            let rule = GaussLegendre::new(deg.max(2)).expect("degree >= 2");
            Arc::new(rule.as_node_weight_pairs().to_vec())
        })
        .clone()
}

/// Nodes and weights mapped to `[a, b]`.
pub fn mapped(deg: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    legendre(deg)
        .iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

pub fn integrate(deg: usize, a: f64, b: f64, mut f: impl FnMut(f64) -> C64) -> C64 {
    mapped(deg, a, b).into_iter().map(|(x, w)| f(x) * w).sum()
}
