//! Weighted-norm decay of a free Gaussian and its power-law fit.

use magdecay::decay::{decay_series, fit_power_law, log_times, Route};
use magdecay::spectral::SpectralData;
use magdecay::{Field, Grid, OperatorHandle};

fn main() -> magdecay::Result<()> {
    let g = Grid::new(48, 24.0)?;
    let psi = Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 8.0).exp()
    });
    let t = log_times(5.0, 50.0, 16)?;
    let r = decay_series(
        &OperatorHandle::free(g),
        &SpectralData::empty(g),
        &psi,
        3.0,
        &t,
        &Route::FreeOpen,
    )?;
    let r = fit_power_law(r, (5.0, 50.0), 0.15)?;
    print!("{}", r.to_csv());
    println!(
        "exponent {:?} +- {:?}, verdict {}",
        r.exponent, r.exponent_ci, r.verdict
    );
    Ok(())
}
