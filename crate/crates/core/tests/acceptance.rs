//! End-to-end acceptance run: every criterion at its stated tolerance, one line per criterion.

use std::time::Instant;

use magdecay::cli::{run_with_config, ExperimentConfig, RunManifest};
use magdecay::decay::{decay_series, fit_power_law, log_times, Route};
use magdecay::lattice::{weighted_norm, Field, Grid, WeightedNormSpec};
use magdecay::operators::{hardy_check, OperatorHandle};
use magdecay::potentials::{builtin_potential, PotentialData, PotentialKind};
use magdecay::propagator::{
    evolve_direct, jensen_kato_oracle, ContourEvolution, DirectMethod, JkKind, PartitionOfUnity,
    QuadratureSpec,
};
use magdecay::resolvent::{
    asymptotic_probe, free_apply, kernel_convolution_field, limiting_absorption, perturbed_born,
    perturbed_direct, BornVariant, EpsSchedule, Probe, Regime, Resolvent, ResolventOptions,
    ResolventQuery, Side,
};
use magdecay::spectral::{
    critical_coupling, discrete_spectrum, spectral_condition_check, SpectralData,
};
use magdecay::{dense, rng, Result};
use num_complex::Complex64 as C64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn gaussian(g: Grid, w: f64) -> Field {
    Field::from_real_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp()
    })
}

fn rel_l2(a: &Field, b: &Field) -> f64 {
    (a - b).norm() / b.norm()
}

fn rel_l2m1(a: &Field, b: &Field) -> f64 {
    let s = WeightedNormSpec::l2(-1.0);
    weighted_norm(&(a - b), s) / weighted_norm(b, s)
}

fn generic(g: Grid) -> Result<PotentialData> {
    builtin_potential(PotentialKind::GaussianBump, &[0.05, 0.1, 2.0], g)
}

fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    // the source must be resolved: width / spacing >= 3
    let g = Grid::new(32, 16.0)?;
    let w = 1.5;
    let f = gaussian(g, w);
    let omega = C64::new(-1.0, 0.0);
    let q = ResolventQuery::off_axis(omega, 0)?;
    let periodic = free_apply(&q, &f)?;
    let h = OperatorHandle::free(g);
    let open = Resolvent::new(&h, &[&f], ResolventOptions::free_space(1e-12))?.free(&q, 0, &f)?;
    let prof = move |s: f64| (-s * s / (2.0 * w * w)).exp();
    let oracle = kernel_convolution_field(g, omega, Side::OffAxis, &prof, 8.0 * w)?;
    let (ep, eo) = (rel_l2(&periodic, &oracle), rel_l2(&open, &oracle));
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ep <= 1e-6 && eo <= 1e-6 && secs <= 30.0,
        format!(
            "rel err periodic {ep:.2e}, truncated kernel {eo:.2e} (<= 1e-6), {secs:.1} s (<= 30 s)"
        ),
    )
}

fn criterion_2() -> Result<Outcome> {
    let start = Instant::now();
    let g = Grid::new(12, 4.0)?;
    let p = builtin_potential(PotentialKind::GaussianBump, &[0.8, 0.6, 1.0], g)?;
    let h = OperatorHandle::full(p);
    let f = gaussian(g, 1.0);
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
    let errs = [
        rel_l2(&direct, &exact),
        rel_l2(&born, &exact),
        rel_l2(&born, &direct),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = rd.converged && rb.converged && worst <= 1e-8 && secs <= 60.0;
    outcome(
        pass,
        format!("max pairwise rel err {worst:.2e} (<= 1e-8), {secs:.1} s (<= 60 s)"),
    )
}

fn criterion_3() -> Result<Outcome> {
    let g = Grid::new(24, 8.0)?;
    let w = 0.8;
    let f = gaussian(g, w);
    let h = OperatorHandle::free(g);
    let sched = EpsSchedule {
        tol: 1e-7,
        ..EpsSchedule::default()
    };
    let (u, report) = limiting_absorption(
        &h,
        1.0,
        Side::Plus,
        &f,
        sched,
        ResolventOptions::free_space(1e-11),
    )?;
    let prof = move |s: f64| (-s * s / (2.0 * w * w)).exp();
    let oracle = kernel_convolution_field(g, C64::new(1.0, 0.0), Side::Plus, &prof, 8.0 * w)?;
    let err = rel_l2m1(&u, &oracle);
    let ratio = report.ratios.iter().copied().fold(0.0, f64::max);
    let pass = report.solve.converged && err <= 1e-4 && ratio <= 0.6;
    outcome(
        pass,
        format!("L2_-1 err {err:.2e} (<= 1e-4), max contraction ratio {ratio:.3} (<= 0.6)"),
    )
}

fn slope_probe(
    h: &OperatorHandle,
    regime: Regime,
    k: u8,
    sigma: f64,
    probe: &Probe,
    omegas: &[C64],
) -> Result<f64> {
    Ok(asymptotic_probe(
        h,
        regime,
        k,
        0,
        sigma,
        probe,
        omegas,
        ResolventOptions::free_space(1e-10),
    )?
    .slope)
}

fn criterion_4() -> Result<Outcome> {
    let start = Instant::now();
    let g = Grid::new(24, 8.0)?;
    let p = builtin_potential(PotentialKind::GaussianBump, &[0.8, 0.6, 1.0], g)?;
    let omegas: Vec<C64> = log_times(1e2, 1e4, 5)?
        .into_iter()
        .map(|l| C64::new(l, 1.0))
        .collect();
    let probe = Probe::Modulated {
        envelope: gaussian(g, 2.0),
        direction: [1.0, 0.0, 0.0],
    };
    let sa = slope_probe(
        &OperatorHandle::magnetic(p.clone()),
        Regime::High,
        0,
        1.0,
        &probe,
        &omegas,
    )?;
    let sh = slope_probe(
        &OperatorHandle::full(p),
        Regime::High,
        0,
        1.0,
        &probe,
        &omegas,
    )?;
    let secs = start.elapsed().as_secs_f64();
    let pass = (sa + 0.5).abs() <= 0.1 && (sh + 0.5).abs() <= 0.1 && secs <= 300.0;
    outcome(
        pass,
        format!("slopes H_A {sa:.3}, H {sh:.3} (-0.5 +- 0.1), {secs:.1} s (<= 300 s)"),
    )
}

fn criterion_5() -> Result<Outcome> {
    let g = Grid::new(24, 8.0)?;
    let p = builtin_potential(PotentialKind::GaussianBump, &[0.8, 0.6, 1.0], g)?;
    let phase = std::f64::consts::FRAC_PI_4;
    let omegas: Vec<C64> = log_times(1e-3, 1e-1, 5)?
        .into_iter()
        .map(|m| C64::from_polar(m, phase))
        .collect();
    let probe = Probe::Fixed(gaussian(g, 1.0));
    let s0 = slope_probe(
        &OperatorHandle::free(g),
        Regime::Low,
        1,
        2.0,
        &probe,
        &omegas,
    )?;
    let sh = slope_probe(
        &OperatorHandle::full(p),
        Regime::Low,
        1,
        2.0,
        &probe,
        &omegas,
    )?;
    let pass = (s0 + 0.5).abs() <= 0.1 && (sh + 0.5).abs() <= 0.1;
    outcome(pass, format!("slopes H_0 {s0:.3}, H {sh:.3} (-0.5 +- 0.1)"))
}

fn criterion_6() -> Result<Outcome> {
    let g = Grid::new(24, 8.0)?;
    let builtins = [
        builtin_potential(PotentialKind::GaussianBump, &[0.0, 0.6, 1.0], g)?,
        builtin_potential(PotentialKind::CompactBump, &[0.0, 0.6, 1.5], g)?,
        builtin_potential(PotentialKind::CoupledWell, &[1.0, 1.0, 0.6], g)?,
    ];
    let mut checks = 0;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let f = rng::bump_field(g, &mut rng::stream(11, i));
        let random =
            PotentialData::from_analytic(g, rng::magnetic_descriptor(g, &mut rng::stream(12, i)))?;
        for p in builtins.iter().chain(std::iter::once(&random)) {
            let r = hardy_check(p, &f)?;
            checks += 1;
            worst = worst.max(r.lhs / r.rhs);
            if !r.pass {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {checks} checks, max lhs/rhs {worst:.3}"),
    )
}

fn criterion_7() -> Result<Outcome> {
    let start = Instant::now();
    let g = Grid::new(16, 6.0)?;
    let grids = [Grid::new(12, 6.0)?, g];
    let zero = spectral_condition_check(&PotentialData::zero(g), 1.0, &grids)?;
    let family = |c: f64| builtin_potential(PotentialKind::CoupledWell, &[c, 1.0], g);
    let (a, b) = critical_coupling(&family, 0.5, 3.0, 1e-6)?;
    let mid = 0.5 * (a + b);
    let dip = spectral_condition_check(&family(mid)?, 1.0, &grids)?;
    let mut away = Vec::new();
    for s in [0.5, 0.9, 1.1, 1.5] {
        away.push(spectral_condition_check(&family(s * mid)?, 1.0, &grids)?);
    }
    let away_min = away
        .iter()
        .map(|r| r.sigma_min)
        .fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    let pass = zero.sigma_min == 1.0
        && zero.regular
        && dip.sigma_min < 1e-3
        && away.iter().all(|r| r.regular)
        && secs <= 300.0;
    outcome(
        pass,
        format!(
            "W = 0 sigma_min {}, c* in [{a:.6}, {b:.6}], dip {:.2e} (< 1e-3), min away {away_min:.2e} regular {}, {secs:.1} s",
            zero.sigma_min,
            dip.sigma_min,
            away.iter().all(|r| r.regular)
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let t = log_times(10.0, 1e3, 12)?;
    let sqrt = jensen_kato_oracle(JkKind::SqrtBump, 1.0, &t)?
        .exponent
        .unwrap_or(f64::NAN);
    let smooth = jensen_kato_oracle(JkKind::SmoothBump, 1.0, &t)?
        .exponent
        .unwrap_or(f64::NAN);
    let pass = (sqrt + 1.5).abs() <= 0.1 && smooth <= -1.9;
    outcome(
        pass,
        format!("sqrt bump {sqrt:.3} (-1.5 +- 0.1), smooth control {smooth:.3} (<= -1.9)"),
    )
}

fn criterion_9a() -> Result<Outcome> {
    let g = Grid::new(48, 24.0)?;
    let h = OperatorHandle::free(g);
    let t = log_times(5.0, 50.0, 16)?;
    let r = decay_series(
        &h,
        &SpectralData::empty(g),
        &gaussian(g, 2.0),
        3.0,
        &t,
        &Route::FreeOpen,
    )?;
    let r = fit_power_law(r, (5.0, 50.0), 0.15)?;
    let e = r.exponent.unwrap_or(f64::NAN);
    outcome(r.verdict, format!("free exponent {e:.3} (-1.5 +- 0.15)"))
}

fn criterion_9b() -> Result<Outcome> {
    // spectral condition on the analytic descriptor
    let grids = [Grid::new(12, 6.0)?, Grid::new(16, 6.0)?];
    let cond = spectral_condition_check(&generic(grids[1])?, 1.0, &grids)?;

    // direct route on a large periodic box, P_c applied
    let g = Grid::new(64, 64.0)?;
    let h = OperatorHandle::full(generic(g)?);
    let sd = discrete_spectrum(&h, 4)?;
    let t = log_times(5.0, 40.0, 12)?;
    let series = decay_series(
        &h,
        &sd,
        &gaussian(g, 2.0),
        3.0,
        &t,
        &Route::Direct(DirectMethod::default()),
    )?;
    let fit = fit_power_law(series, (5.0, 40.0), 0.2)?;
    let e = fit.exponent.unwrap_or(f64::NAN);

    // contour against direct on a small box at early times
    let gs = Grid::new(16, 6.0)?;
    let hs = OperatorHandle::full(generic(gs)?);
    let sds = discrete_spectrum(&hs, 4)?;
    let psi = gaussian(gs, 1.0);
    let pou = PartitionOfUnity::default();
    let quad = QuadratureSpec::for_data(&psi, &pou, 1e-6, 1.0)?;
    let times = [0.2, 0.35, 0.5];
    let ev = ContourEvolution::converged(&hs, &sds, &psi, pou, &quad, &times, 1e-5, 2)?;
    let mut worst: f64 = 0.0;
    for &s in &times {
        let direct = evolve_direct(&hs, &sds, &psi, s, DirectMethod::default())?;
        worst = worst.max(rel_l2m1(&ev.at(s), &direct));
    }
    let pass = cond.regular && fit.verdict && worst <= 1e-3;
    outcome(
        pass,
        format!(
            "condition regular {} (sigma_min {:.3}), direct exponent {e:.3} (-1.5 +- 0.2), contour vs direct {worst:.2e} (<= 1e-3)",
            cond.regular, cond.sigma_min
        ),
    )
}

fn criterion_10() -> Result<Outcome> {
    let config = ExperimentConfig::parse(include_str!("../../../configs/free_decay.toml"))?;
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    let codes: Vec<i32> = dirs
        .iter()
        .map(|d| run_with_config("decay-report", config.clone(), d.path().to_path_buf()))
        .collect();
    let manifest: RunManifest = serde_json::from_str(&std::fs::read_to_string(
        dirs[0].path().join("manifest.json"),
    )?)?;
    let mut differing = Vec::new();
    for f in &manifest.files {
        let a = std::fs::read(dirs[0].path().join(&f.path))?;
        let b = std::fs::read(dirs[1].path().join(&f.path))?;
        if a != b {
            differing.push(f.path.clone());
        }
    }
    let pass = codes[0] == codes[1] && !manifest.files.is_empty() && differing.is_empty();
    outcome(
        pass,
        format!(
            "{} files compared, {} differ, exit codes {:?}",
            manifest.files.len(),
            differing.len(),
            codes
        ),
    )
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("9a", criterion_9a),
        ("9b", criterion_9b),
        ("10", criterion_10),
    ];
    println!();
    let mut failed = Vec::new();
    let mut decay_secs = 0.0;
    for (name, run) in criteria {
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        let secs = t.elapsed().as_secs_f64();
        println!("criterion {name}: {verdict} {detail} [{secs:.1} s]");
        if name.starts_with('9') {
            decay_secs += secs;
        }
        if !pass {
            failed.push(name);
        }
    }
    let decay_pass = decay_secs <= 1800.0;
    println!(
        "criterion 9: {} combined decay runtime {decay_secs:.1} s (<= 1800 s)",
        if decay_pass { "PASS" } else { "FAIL" }
    );
    if !decay_pass {
        failed.push("9");
    }
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
