//! Magnetic Hardy inequality on seeded random bumps.

use magdecay::operators::hardy_check;
use magdecay::{builtin_potential, rng, Grid, PotentialKind};

fn main() -> magdecay::Result<()> {
    let g = Grid::new(24, 8.0)?;
    let p = builtin_potential(PotentialKind::CompactBump, &[0.0, 0.6, 1.5], g)?;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let f = rng::bump_field(g, &mut rng::stream(3, i));
        let r = hardy_check(&p, &f)?;
        worst = worst.max(r.lhs / r.rhs);
        assert!(r.pass);
    }
    println!("20 samples, max lhs/rhs {worst:.3}");
    Ok(())
}
