//! Outgoing boundary value R(λ + i0)f by ε-halving with Richardson extrapolation.

use magdecay::resolvent::{limiting_absorption, EpsSchedule, ResolventOptions, Side};
use magdecay::{builtin_potential, Field, Grid, OperatorHandle, PotentialKind};

fn main() -> magdecay::Result<()> {
    let g = Grid::new(24, 8.0)?;
    let f = Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 1.28).exp()
    });
    let p = builtin_potential(PotentialKind::GaussianBump, &[0.5, 0.3, 1.0], g)?;
    let sched = EpsSchedule {
        tol: 1e-7,
        ..EpsSchedule::default()
    };
    for lambda in [0.5, 1.0, 2.0] {
        let (u, r) = limiting_absorption(
            &OperatorHandle::full(p.clone()),
            lambda,
            Side::Plus,
            &f,
            sched,
            ResolventOptions::free_space(1e-11),
        )?;
        println!(
            "lambda {lambda}: converged {}, eps {:.2e}, ratios {:?}, |u| {:.4}",
            r.solve.converged,
            r.eps_last,
            r.ratios
                .iter()
                .map(|x| format!("{x:.2}"))
                .collect::<Vec<_>>(),
            u.norm()
        );
    }
    Ok(())
}
