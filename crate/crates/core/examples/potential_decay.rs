//! Decay exponents of the builtin potentials along spheres.

use magdecay::potentials::validate_decay;
use magdecay::{builtin_potential, Grid, PotentialKind};

fn main() -> magdecay::Result<()> {
    let g = Grid::new(32, 32.0)?;
    let radii: Vec<f64> = (0..8).map(|i| 4.0 * 1.25f64.powi(i)).collect();
    for (kind, params) in [
        (PotentialKind::GaussianBump, vec![1.0, 0.5, 1.0]),
        (PotentialKind::CompactBump, vec![1.0, 0.5, 1.5]),
        (PotentialKind::CoupledWell, vec![1.0, 1.0, 0.3]),
    ] {
        let d = validate_decay(&builtin_potential(kind, &params, g)?, &radii)?;
        println!(
            "{kind:?}: beta {:.1}, beta1 {:.1}, pass {}",
            d.beta, d.beta1, d.pass
        );
    }
    Ok(())
}
