//! Seeded random test fields.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{Field, Grid};
use crate::potentials::AnalyticPotential;

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` derived from a root seed.
pub fn stream(seed: u64, index: u64) -> TestRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Smooth compactly supported field: a bump window of radius `R ∈ [0.3l, 0.45l]` around a
/// centre inside the inner half-box, modulated by a few low-frequency plane waves.
pub fn bump_field(grid: Grid, rng: &mut impl Rng) -> Field {
    let l = grid.l();
    let radius = l * rng.random_range(0.3..0.45);
    let slack = 0.5 * l - radius;
    let center: [f64; 3] = std::array::from_fn(|_| rng.random_range(-slack..=slack));
    let k0 = std::f64::consts::PI / l;
    let waves: Vec<([f64; 3], C64)> = (0..3)
        .map(|_| {
            let k = std::array::from_fn(|_| k0 * rng.random_range(-2.0..2.0));
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (k, c)
        })
        .collect();
    let offset = C64::new(rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5));
    Field::from_fn(grid, |x| {
        let w = crate::potentials::bump_profile(x, center, radius);
        if w == 0.0 {
            return C64::default();
        }
        let m: C64 = waves
            .iter()
            .map(|(k, c)| c * C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]))
            .sum();
        (m + offset) * w
    })
}

/// Random builtin magnetic potential descriptor with moderate amplitude.
pub fn magnetic_descriptor(grid: Grid, rng: &mut impl Rng) -> AnalyticPotential {
    let l = grid.l();
    let width = l * rng.random_range(0.12..0.2);
    let center = std::array::from_fn(|_| rng.random_range(-0.1 * l..0.1 * l));
    let a_amp = rng.random_range(-1.5..1.5);
    let v_amp = rng.random_range(-1.0..1.0);
    if rng.random_bool(0.5) {
        AnalyticPotential::Gaussian {
            v_amp,
            a_amp,
            width,
            center,
        }
    } else {
        AnalyticPotential::Compact {
            v_amp,
            a_amp,
            radius: 2.5 * width,
            center,
        }
    }
}
