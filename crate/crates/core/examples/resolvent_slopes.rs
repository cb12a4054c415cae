//! Log–log slopes of the weighted resolvent norm at high and low energy.

use magdecay::decay::log_times;
use magdecay::resolvent::{asymptotic_probe, Probe, Regime, ResolventOptions};
use magdecay::{builtin_potential, Field, Grid, OperatorHandle, PotentialKind};
use num_complex::Complex64 as C64;

fn gaussian(g: Grid, w: f64) -> Field {
    Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp()
    })
}

fn main() -> magdecay::Result<()> {
    let g = Grid::new(24, 8.0)?;
    let p = builtin_potential(PotentialKind::GaussianBump, &[0.8, 0.6, 1.0], g)?;
    let opts = ResolventOptions::free_space(1e-10);

    let high: Vec<C64> = log_times(1e2, 1e4, 5)?
        .into_iter()
        .map(|l| C64::new(l, 1.0))
        .collect();
    let probe = Probe::Modulated {
        envelope: gaussian(g, 2.0),
        direction: [1.0, 0.0, 0.0],
    };
    let r = asymptotic_probe(
        &OperatorHandle::full(p.clone()),
        Regime::High,
        0,
        0,
        1.0,
        &probe,
        &high,
        opts,
    )?;
    println!("high energy, k = 0: slope {:.3} (expected -0.5)", r.slope);

    let low: Vec<C64> = log_times(1e-3, 1e-1, 5)?
        .into_iter()
        .map(|m| C64::from_polar(m, std::f64::consts::FRAC_PI_4))
        .collect();
    let r = asymptotic_probe(
        &OperatorHandle::full(p),
        Regime::Low,
        1,
        0,
        2.0,
        &Probe::Fixed(gaussian(g, 1.0)),
        &low,
        opts,
    )?;
    println!("low energy, k = 1:  slope {:.3} (expected -0.5)", r.slope);
    Ok(())
}
