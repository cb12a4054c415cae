//! Zero-energy regularity along a coupled-well family: the smallest singular value dips at
//! the coupling where the first bound state appears.

use magdecay::spectral::{critical_coupling, spectral_condition_check};
use magdecay::{builtin_potential, Grid, PotentialKind};

fn main() -> magdecay::Result<()> {
    let g = Grid::new(16, 6.0)?;
    let grids = [Grid::new(12, 6.0)?, g];
    let family = |c: f64| builtin_potential(PotentialKind::CoupledWell, &[c, 1.0], g);
    let (a, b) = critical_coupling(&family, 0.5, 3.0, 1e-6)?;
    let mid = 0.5 * (a + b);
    println!("critical coupling in [{a:.6}, {b:.6}]");
    for s in [0.5, 0.9, 1.0, 1.1, 1.5] {
        let r = spectral_condition_check(&family(s * mid)?, 1.0, &grids)?;
        println!(
            "coupling {:.4}: sigma_min {:.3e}, regular {}",
            s * mid,
            r.sigma_min,
            r.regular
        );
    }
    Ok(())
}
