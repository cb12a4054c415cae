use super::*;
use crate::potentials::{builtin_potential, PotentialKind};

fn gaussian(grid: Grid, w: f64) -> Field {
    Field::from_real_fn(grid, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp()
    })
}

fn rel(a: &Field, b: &Field) -> f64 {
    (a - b).norm() / b.norm()
}

fn magnetic_full(n: usize, l: f64) -> OperatorHandle {
    let g = Grid::new(n, l).unwrap();
    OperatorHandle::full(
        builtin_potential(PotentialKind::GaussianBump, &[0.8, 0.6, 1.0], g).unwrap(),
    )
}

#[test]
fn kernel_examples() {
    let a = free_kernel(C64::new(-1.0, 0.0), Side::OffAxis, 1.0).unwrap();
    assert!((a.re - (-1f64).exp() / (4.0 * PI)).abs() < 1e-15 && a.im.abs() < 1e-15);
    assert!((a.re - 0.0292749).abs() < 1e-7);
    let b = free_kernel(C64::default(), Side::OffAxis, 2.0).unwrap();
    assert!((b.re - 0.0397887).abs() < 1e-7);
    let c = free_kernel(C64::new(0.0, 1.0), Side::OffAxis, 1.0).unwrap();
    assert!((c.norm() - 0.039237).abs() < 1e-6);
    assert!(free_kernel(C64::new(-1.0, 0.0), Side::OffAxis, 0.0).is_err());
    assert!(free_kernel(C64::new(1.0, 0.0), Side::OffAxis, 1.0).is_err());
}

#[test]
fn branch_is_physical() {
    for w in [
        C64::new(2.0, 1e-3),
        C64::new(2.0, -1e-3),
        C64::new(-3.0, 0.0),
        C64::new(0.5, -4.0),
    ] {
        let q = ResolventQuery::off_axis(w, 0).unwrap();
        assert!(q.kappa().im >= 0.0);
        assert!((q.kappa() * q.kappa() - w).norm() < 1e-12);
    }
    assert_eq!(
        ResolventQuery::limit(4.0, Side::Minus, 0).unwrap().kappa(),
        C64::new(-2.0, 0.0)
    );
    assert!(ResolventQuery::limit(-1.0, Side::Plus, 0).is_err());
    assert!(ResolventQuery::off_axis(C64::new(1.0, 0.0), 3).is_err());
}

#[test]
fn plane_wave_multiplier() {
    let g = Grid::new(8, 3.0).unwrap();
    let xi = [g.freq(1), g.freq(2), g.freq(7)];
    let e = Field::from_fn(g, |x| {
        (I * (xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2])).exp()
    });
    let omega = C64::new(-1.0, 0.5);
    let q2 = xi.iter().map(|v| v * v).sum::<f64>();
    for k in 0..3u8 {
        let q = ResolventQuery::off_axis(omega, k).unwrap();
        let u = free_apply(&q, &e).unwrap();
        let expect = &e * (factorial(k) / (C64::new(q2, 0.0) - omega).powu(k as u32 + 1));
        assert!(rel(&u, &expect) < 1e-12);
    }
}

#[test]
fn free_inverse_relation() {
    let g = Grid::new(12, 4.0).unwrap();
    let f = gaussian(g, 1.0);
    let q = ResolventQuery::off_axis(C64::new(1.3, 0.2), 0).unwrap();
    let u = free_apply(&q, &f).unwrap();
    let h0 = OperatorHandle::free(g);
    let mut back = h0.apply(&u).unwrap();
    back.axpy(-q.omega(), &u);
    assert!(rel(&back, &f) < 1e-12);
}

#[test]
fn periodic_refuses_the_axis() {
    let g = Grid::new(8, 3.0).unwrap();
    let f = gaussian(g, 1.0);
    let q = ResolventQuery::limit(1.0, Side::Plus, 0).unwrap();
    assert!(free_apply(&q, &f).is_err());
    // an exact eigenvalue of the box Laplacian
    let lam = g.freq(1).powi(2);
    assert!(matches!(
        periodic_free(&f, C64::new(lam, 0.0), 0, NO_CARRIER),
        Err(Error::SingularMultiplier { .. })
    ));
}

#[test]
fn free_space_matches_kernel_oracle() {
    let g = Grid::new(24, 6.0).unwrap();
    let w = 0.8;
    let f = gaussian(g, w);
    let prof = move |s: f64| (-s * s / (2.0 * w * w)).exp();
    for (omega, side) in [
        (C64::new(-1.0, 0.0), Side::OffAxis),
        (C64::new(1.5, 0.0), Side::Plus),
        (C64::new(0.7, 0.4), Side::OffAxis),
    ] {
        let r = FreeSpaceResolvent::new(g, 6.0, NO_CARRIER).unwrap();
        let kappa = kappa_of(omega, side).unwrap();
        let u = r.apply(kappa, 0, &f).unwrap();
        let oracle = kernel_convolution_field(g, omega, side, &prof, 8.0 * w).unwrap();
        assert!(
            rel(&u, &oracle) < 1e-8,
            "omega={omega}: {}",
            rel(&u, &oracle)
        );
    }
}

#[test]
fn born_and_direct_agree() {
    let h = magnetic_full(12, 4.0);
    let f = gaussian(*h.grid(), 1.0);
    let q = ResolventQuery::off_axis(C64::new(-2.0, 0.0), 0).unwrap();
    let opts = ResolventOptions::periodic(1e-12);
    let (d, rd) = perturbed_direct(&h, &q, &f, 1e-12).unwrap();
    let (l, rl) = perturbed_born(&h, &q, &f, opts, BornVariant::Left).unwrap();
    let (r, rr) = perturbed_born(&h, &q, &f, opts, BornVariant::Right).unwrap();
    assert!(rd.converged && rl.converged && rr.converged);
    assert!(rel(&l, &d) < 1e-10 && rel(&r, &d) < 1e-10 && rel(&l, &r) < 1e-10);
}

#[test]
fn zero_potential_reduces_to_free() {
    let g = Grid::new(10, 4.0).unwrap();
    let h = OperatorHandle::full(crate::PotentialData::zero(g));
    let f = gaussian(g, 1.0);
    let q = ResolventQuery::off_axis(C64::new(0.5, 1.0), 1).unwrap();
    let free = free_apply(&q, &f).unwrap();
    let u = resolvent_derivative(
        &h,
        &q,
        &f,
        ResolventOptions::periodic(1e-12),
        DerivativeRoute::Identity,
    )
    .unwrap();
    assert!(rel(&u, &free) < 1e-14);
}

#[test]
fn first_resolvent_identity() {
    let h = magnetic_full(10, 4.0);
    let f = gaussian(*h.grid(), 1.0);
    let z = C64::new(0.5, 1.0);
    let w = C64::new(-1.0, 0.3);
    let res = Resolvent::new(&h, &[&f], ResolventOptions::periodic(1e-12)).unwrap();
    let qz = ResolventQuery::off_axis(z, 0).unwrap();
    let qw = ResolventQuery::off_axis(w, 0).unwrap();
    let rz = res.apply(&qz, &f).unwrap().0;
    let rw = res.apply(&qw, &f).unwrap().0;
    let rzrw = res.apply(&qz, &rw).unwrap().0;
    let lhs = &rz - &rw;
    let rhs = &rzrw * (z - w);
    assert!(rel(&lhs, &rhs) < 1e-9);
}

#[test]
fn adjoint_symmetry() {
    // ⟨g, R(ω)f⟩ = ⟨R(ω̄)g, f⟩
    let h = magnetic_full(10, 4.0);
    let g0 = *h.grid();
    let f = gaussian(g0, 1.0);
    let g = Field::from_fn(g0, |x| {
        C64::new(
            (-(x[0] - 0.5).powi(2) - x[1] * x[1] - x[2] * x[2]).exp(),
            0.3 * x[2],
        )
    });
    let w = C64::new(0.7, 0.6);
    let res = Resolvent::new(&h, &[&f, &g], ResolventOptions::periodic(1e-12)).unwrap();
    let a = g.inner(
        &res.apply(&ResolventQuery::off_axis(w, 0).unwrap(), &f)
            .unwrap()
            .0,
    );
    let b = res
        .apply(&ResolventQuery::off_axis(w.conj(), 0).unwrap(), &g)
        .unwrap()
        .0
        .inner(&f);
    assert!((a - b).norm() < 1e-9 * a.norm());
}

#[test]
fn limits_are_conjugate_for_scalar_potentials() {
    let g = Grid::new(16, 5.0).unwrap();
    let p = builtin_potential(PotentialKind::GaussianBump, &[0.5, 0.0, 1.0], g).unwrap();
    let h = OperatorHandle::full(p);
    let f = gaussian(g, 1.0);
    let sched = EpsSchedule {
        tol: 1e-7,
        ..EpsSchedule::default()
    };
    let opts = ResolventOptions::free_space(1e-11);
    let plus = limiting_absorption(&h, 1.0, Side::Plus, &f, sched, opts).unwrap();
    let minus = limiting_absorption(&h, 1.0, Side::Minus, &f, sched, opts).unwrap();
    assert!(plus.1.solve.converged && minus.1.solve.converged);
    assert!(rel(&minus.0, &plus.0.conj()) < 1e-6);
    // the extrapolants converge at least linearly
    assert!(
        plus.1.ratios.iter().skip(1).all(|r| *r < 0.6),
        "{:?}",
        plus.1.ratios
    );
}

#[test]
fn on_shell_limit_matches_direct_kernel() {
    // for H = H₀ the extrapolated limit equals the on-shell truncated kernel
    let g = Grid::new(16, 5.0).unwrap();
    let h = OperatorHandle::free(g);
    let f = gaussian(g, 0.9);
    let res = Resolvent::new(&h, &[&f], ResolventOptions::free_space(1e-12)).unwrap();
    let exact = res
        .free(&ResolventQuery::limit(2.0, Side::Plus, 0).unwrap(), 0, &f)
        .unwrap();
    let (lim, rep) =
        limiting_absorption_with(&res, 2.0, Side::Plus, &f, EpsSchedule::default()).unwrap();
    assert!(rep.solve.converged);
    assert!(rel(&lim, &exact) < 1e-5, "{}", rel(&lim, &exact));
}

#[test]
fn derivative_routes_agree() {
    let h = magnetic_full(16, 5.0);
    let f = gaussian(*h.grid(), 1.0);
    let opts = ResolventOptions::periodic(1e-12);
    for k in [1u8, 2] {
        let q = ResolventQuery::off_axis(C64::new(-0.5, 0.8), k).unwrap();
        let p = resolvent_derivative(&h, &q, &f, opts, DerivativeRoute::Power).unwrap();
        let i = resolvent_derivative(&h, &q, &f, opts, DerivativeRoute::Identity).unwrap();
        assert!(rel(&i, &p) < 1e-7, "k={k}: {}", rel(&i, &p));
    }
}

#[test]
fn derivative_matches_finite_difference() {
    let h = magnetic_full(12, 4.0);
    let f = gaussian(*h.grid(), 1.0);
    let opts = ResolventOptions::free_space(1e-12);
    let w = C64::new(0.8, 0.5);
    let d = 1e-4;
    let res = Resolvent::new(&h, &[&f], opts).unwrap();
    let at = |z: C64, k: u8| {
        res.derivative(
            &ResolventQuery::off_axis(z, k).unwrap(),
            &f,
            DerivativeRoute::Identity,
        )
        .unwrap()
    };
    for k in [1u8, 2] {
        let fd = &(&at(w + d, k - 1) - &at(w - d, k - 1)) * (1.0 / (2.0 * d));
        let an = at(w, k);
        assert!(rel(&fd, &an) < 1e-6, "k={k}: {}", rel(&fd, &an));
    }
}

#[test]
fn probe_needs_a_decade() {
    let g = Grid::new(8, 3.0).unwrap();
    let h = OperatorHandle::free(g);
    let f = gaussian(g, 1.0);
    let ws: Vec<C64> = (0..4).map(|j| C64::new(-1.0 - j as f64, 1.0)).collect();
    let r = asymptotic_probe(
        &h,
        Regime::High,
        0,
        0,
        1.0,
        &Probe::Fixed(f),
        &ws,
        ResolventOptions::default(),
    );
    assert!(matches!(r, Err(Error::Insufficient(_))));
}

#[test]
fn free_high_energy_slope() {
    // ‖R₀(λ + i)f‖ for a wave packet travelling at energy λ decays like λ^{-1/2}
    let g = Grid::new(16, 8.0).unwrap();
    let h = OperatorHandle::free(g);
    let env = gaussian(g, 2.0);
    let ws: Vec<C64> = [100.0, 300.0, 1000.0, 3000.0, 10000.0]
        .iter()
        .map(|l| C64::new(*l, 1.0))
        .collect();
    let probe = Probe::Modulated {
        envelope: env,
        direction: [1.0, 0.0, 0.0],
    };
    let r = asymptotic_probe(
        &h,
        Regime::High,
        0,
        0,
        1.0,
        &probe,
        &ws,
        ResolventOptions::free_space(1e-10),
    )
    .unwrap();
    assert!((r.slope + 0.5).abs() < 0.1, "{:?}", r);
}
