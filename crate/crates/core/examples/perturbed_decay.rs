//! Decay under a weak magnetic bump that passes the zero-energy condition, on a coarse box.

use magdecay::decay::{decay_series, fit_power_law, log_times, Route};
use magdecay::propagator::DirectMethod;
use magdecay::spectral::{discrete_spectrum, spectral_condition_check};
use magdecay::{builtin_potential, Field, Grid, OperatorHandle, PotentialKind};

fn main() -> magdecay::Result<()> {
    let params = [0.05, 0.1, 2.0];
    let grids = [Grid::new(12, 6.0)?, Grid::new(16, 6.0)?];
    let cond = spectral_condition_check(
        &builtin_potential(PotentialKind::GaussianBump, &params, grids[1])?,
        1.0,
        &grids,
    )?;
    println!("sigma_min {:.3}, regular {}", cond.sigma_min, cond.regular);

    let g = Grid::new(32, 48.0)?;
    let h = OperatorHandle::full(builtin_potential(PotentialKind::GaussianBump, &params, g)?);
    let sd = discrete_spectrum(&h, 4)?;
    let psi = Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 8.0).exp()
    });
    let t = log_times(4.0, 30.0, 10)?;
    let r = decay_series(
        &h,
        &sd,
        &psi,
        3.0,
        &t,
        &Route::Direct(DirectMethod::default()),
    )?;
    let r = fit_power_law(r, (4.0, 30.0), 0.2)?;
    println!(
        "exponent {:?}, window {:?}, warnings {:?}",
        r.exponent, r.fit_window, r.warnings
    );
    Ok(())
}
