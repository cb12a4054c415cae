//! Unitary 3D discrete Fourier transform on cubic row-major arrays.
//!
//! The forward transform is `ψ̂[m] = N^{-3/2} Σ_j ψ[j] exp(-2πi m·j/N)`, the inverse uses the
//! conjugate kernel with the same prefactor, so both are unitary with respect to the plain
//! Euclidean inner product of the value arrays.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (
                planner.plan_fft(n, FftDirection::Forward),
                planner.plan_fft(n, FftDirection::Inverse),
            )
        })
        .clone()
}

/// In-place unitary forward transform of an `n³` array.
pub fn forward(data: &mut [C64], n: usize) {
    transform(data, n, false);
}

/// In-place unitary inverse transform of an `n³` array.
pub fn inverse(data: &mut [C64], n: usize) {
    transform(data, n, true);
}

fn transform(data: &mut [C64], n: usize, inv: bool) {
    assert_eq!(data.len(), n * n * n, "fft3: array length is not n^3");
    let (fwd, bwd) = plans(n);
    let plan = if inv { bwd } else { fwd };
    let mut scratch = vec![C64::default(); plan.get_inplace_scratch_len()];
    let n2 = n * n;

    // last axis: contiguous lines
    plan.process_with_scratch(data, &mut scratch);

    // middle axis: transpose each slab
    let mut buf = vec![C64::default(); n2];
    for i in 0..n {
        let slab = &mut data[i * n2..(i + 1) * n2];
        for j in 0..n {
            for k in 0..n {
                buf[k * n + j] = slab[j * n + k];
            }
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for j in 0..n {
            for k in 0..n {
                slab[j * n + k] = buf[k * n + j];
            }
        }
    }

    // first axis: gather (i, k) planes for fixed j
    for j in 0..n {
        for i in 0..n {
            let base = (i * n + j) * n;
            for k in 0..n {
                buf[k * n + i] = data[base + k];
            }
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for i in 0..n {
            let base = (i * n + j) * n;
            for k in 0..n {
                data[base + k] = buf[k * n + i];
            }
        }
    }

    let scale = 1.0 / ((n * n * n) as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Unitary 1D transform of a single line (used by the open-boundary free propagator).
pub fn forward_1d(line: &mut [C64]) {
    let n = line.len();
    let (fwd, _) = plans(n);
    fwd.process(line);
    let s = 1.0 / (n as f64).sqrt();
    line.iter_mut().for_each(|v| *v *= s);
}

pub fn inverse_1d(line: &mut [C64]) {
    let n = line.len();
    let (_, bwd) = plans(n);
    bwd.process(line);
    let s = 1.0 / (n as f64).sqrt();
    line.iter_mut().for_each(|v| *v *= s);
}

/// Smallest integer `>= n` whose prime factors are all in {2, 3, 5}, rounded up to even.
pub fn good_size(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 && m % 2 == 0 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_unitarity() {
        let n = 6;
        let mut data: Vec<C64> = (0..n * n * n)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = data.clone();
        let norm0: f64 = orig.iter().map(|v| v.norm_sqr()).sum();
        forward(&mut data, n);
        let norm1: f64 = data.iter().map(|v| v.norm_sqr()).sum();
        assert!((norm0 - norm1).abs() < 1e-12 * norm0);
        inverse(&mut data, n);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn good_sizes() {
        assert_eq!(good_size(7), 8);
        assert_eq!(good_size(49), 50);
        assert_eq!(good_size(61), 64);
        assert_eq!(good_size(72), 72);
    }
}
