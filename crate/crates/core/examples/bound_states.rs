//! Bound states of a magnetic well and the continuous-subspace projection.

use magdecay::spectral::{discrete_spectrum, project_continuous};
use magdecay::{builtin_potential, Field, Grid, OperatorHandle, PotentialKind};

fn main() -> magdecay::Result<()> {
    let g = Grid::new(16, 8.0)?;
    let h = OperatorHandle::full(builtin_potential(
        PotentialKind::CoupledWell,
        &[6.0, 1.0, 0.4],
        g,
    )?);
    let sd = discrete_spectrum(&h, 4)?;
    for ((e, r), a) in sd
        .eigenvalues
        .iter()
        .zip(&sd.residuals)
        .zip(&sd.box_artifact_flags)
    {
        println!("eigenvalue {e:.6}, residual {r:.1e}, box artifact {a}");
    }
    let psi = Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
    });
    let pc = project_continuous(&sd, &psi)?;
    println!("|P_c psi| / |psi| = {:.4}", pc.norm() / psi.norm());
    Ok(())
}
