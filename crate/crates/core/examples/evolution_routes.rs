//! exp(-itH)ψ by Lanczos on the periodic box and by the on-shell contour integral.

use magdecay::lattice::{weighted_norm, WeightedNormSpec};
use magdecay::propagator::{
    evolve_direct, ContourEvolution, DirectMethod, PartitionOfUnity, QuadratureSpec,
};
use magdecay::spectral::discrete_spectrum;
use magdecay::{builtin_potential, Field, Grid, OperatorHandle, PotentialKind};

fn main() -> magdecay::Result<()> {
    let g = Grid::new(16, 6.0)?;
    let h = OperatorHandle::full(builtin_potential(
        PotentialKind::GaussianBump,
        &[0.05, 0.1, 2.0],
        g,
    )?);
    let sd = discrete_spectrum(&h, 4)?;
    let psi = Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
    });
    let pou = PartitionOfUnity::default();
    let quad = QuadratureSpec::for_data(&psi, &pou, 1e-6, 1.0)?;
    let times = [0.2, 0.35, 0.5];
    let ev = ContourEvolution::converged(&h, &sd, &psi, pou, &quad, &times, 1e-5, 2)?;
    println!("{:?}", ev.report());
    let spec = WeightedNormSpec::l2(-1.0);
    for t in times {
        let direct = evolve_direct(&h, &sd, &psi, t, DirectMethod::default())?;
        let d = weighted_norm(&(&ev.at(t) - &direct), spec) / weighted_norm(&direct, spec);
        println!("t = {t}: contour vs direct {d:.2e}");
    }
    Ok(())
}
