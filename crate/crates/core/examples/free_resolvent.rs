//! Free resolvent at ω = -1: periodic multiplier, truncated kernel and the radial kernel
//! convolution.

use magdecay::resolvent::{
    free_apply, kernel_convolution_field, Resolvent, ResolventOptions, ResolventQuery, Side,
};
use magdecay::{Field, Grid, OperatorHandle};
use num_complex::Complex64 as C64;

fn main() -> magdecay::Result<()> {
    let g = Grid::new(32, 16.0)?;
    let w = 1.5;
    let f = Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp()
    });
    let omega = C64::new(-1.0, 0.0);
    let q = ResolventQuery::off_axis(omega, 0)?;
    let periodic = free_apply(&q, &f)?;
    let h = OperatorHandle::free(g);
    let open = Resolvent::new(&h, &[&f], ResolventOptions::free_space(1e-12))?.free(&q, 0, &f)?;
    let prof = move |s: f64| (-s * s / (2.0 * w * w)).exp();
    let oracle = kernel_convolution_field(g, omega, Side::OffAxis, &prof, 8.0 * w)?;
    println!(
        "periodic multiplier vs kernel: {:.2e}",
        (&periodic - &oracle).norm() / oracle.norm()
    );
    println!(
        "truncated kernel vs kernel:    {:.2e}",
        (&open - &oracle).norm() / oracle.norm()
    );
    Ok(())
}
