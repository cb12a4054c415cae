//! Perturbed resolvent of a magnetic bump by GMRES, the Born splitting and dense LU.

use magdecay::resolvent::{
    perturbed_born, perturbed_direct, BornVariant, ResolventOptions, ResolventQuery,
};
use magdecay::{builtin_potential, dense, Field, Grid, OperatorHandle, PotentialKind};
use num_complex::Complex64 as C64;

fn main() -> magdecay::Result<()> {
    let g = Grid::new(12, 4.0)?;
    let h = OperatorHandle::full(builtin_potential(
        PotentialKind::GaussianBump,
        &[0.8, 0.6, 1.0],
        g,
    )?);
    let f = Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
    });
    let omega = C64::new(-2.0, 0.0);
    let q = ResolventQuery::off_axis(omega, 0)?;
    let (direct, rd) = perturbed_direct(&h, &q, &f, 1e-12)?;
    let (born, rb) = perturbed_born(
        &h,
        &q,
        &f,
        ResolventOptions::periodic(1e-12),
        BornVariant::Left,
    )?;
    let exact = dense::resolve(&h, omega, &f)?;
    println!(
        "direct: {} iterations, rel err {:.2e}",
        rd.iterations,
        (&direct - &exact).norm() / exact.norm()
    );
    println!(
        "born:   {} iterations, rel err {:.2e}",
        rb.iterations,
        (&born - &exact).norm() / exact.norm()
    );
    Ok(())
}
