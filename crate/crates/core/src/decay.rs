//! Weighted-norm time series of evolved states and the fit of their power-law decay exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::lattice::{self, Field, WeightedNormSpec};
use crate::operators::OperatorHandle;
use crate::propagator::{
    evolve_direct_series, evolve_free, evolve_free_open, rms_wavenumber, ContourEvolution,
    DirectMethod, PartitionOfUnity, QuadratureSpec,
};
use crate::spectral::{project_continuous, SpectralData};

/// Decay exponent of `‖P_cψ(t)‖_{L²_{-σ}}` in three dimensions.
pub const EXPECTED_EXPONENT: f64 = -1.5;

/// Default verdict tolerance on the exponent.
pub const DEFAULT_TOLERANCE: f64 = 0.2;

/// Weights above this are inside the hypothesis of the decay estimate.
pub const SIGMA_HYPOTHESIS: f64 = 2.5;

const MIN_SAMPLES: usize = 6;
const MIN_DECADES: f64 = 0.7;

/// How `exp(-itH)ψ₀` is computed for each sample.
#[derive(Clone, Debug)]
pub enum Route {
    /// Periodic free evolution; `H` must be free.
    Free,
    /// Free evolution on ℝ³ restricted to the box; `H` must be free.
    FreeOpen,
    /// Krylov or split-step propagation on the periodic box.
    Direct(DirectMethod),
    /// Spectral integral over on-shell resolvent boundary values.
    Contour {
        pou: PartitionOfUnity,
        quad: QuadratureSpec,
        tol: f64,
    },
}

impl Route {
    fn periodic(&self) -> bool {
        matches!(self, Route::Free | Route::Direct(_))
    }

    fn name(&self) -> &'static str {
        match self {
            Route::Free => "free",
            Route::FreeOpen => "free_open",
            Route::Direct(_) => "direct",
            Route::Contour { .. } => "contour",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub sigma: f64,
    pub route: String,
    pub t_samples: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub exponent: Option<f64>,
    /// Half-width of the 95% interval of the fitted exponent.
    pub exponent_ci: Option<f64>,
    pub tolerance: f64,
    pub verdict: bool,
    /// `σ > 5/2` and `ψ₀` projected onto the continuous subspace.
    pub in_hypothesis: bool,
    pub projected: bool,
    /// Latest time before waves re-enter the periodic box, if the route is periodic.
    pub wrap_cap: Option<f64>,
    pub warnings: Vec<String>,
}

impl DecayReport {
    /// `t,norm` rows with round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,norm\n");
        for (t, n) in self.t_samples.iter().zip(&self.norms) {
            s.push_str(&format!("{t:e},{n:e}\n"));
        }
        s
    }
}

/// `count` logarithmically spaced times from `t0` to `t1`.
pub fn log_times(t0: f64, t1: f64, count: usize) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && t1 > t0) || count < 2 {
        return Err(Error::InvalidParameter(
            "log_times needs 0 < t0 < t1 and count ≥ 2".into(),
        ));
    }
    let r = (t1 / t0).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                t1
            } else {
                t0 * (r * i as f64).exp()
            }
        })
        .collect())
}

/// Time for a packet with the rms wavenumber of `psi0` to travel `fraction` of the distance
/// from its support to the box edge, at group speed `2|ξ|`.
pub fn wrap_time(psi0: &Field, fraction: f64) -> f64 {
    let g = psi0.grid();
    let speed = 2.0 * rms_wavenumber(psi0);
    let room = (g.l() - psi0.support_radius(1e-6)).max(0.0);
    if speed == 0.0 {
        f64::INFINITY
    } else {
        fraction * room / speed
    }
}

fn check_times(t_samples: &[f64]) -> Result<()> {
    if t_samples.is_empty() {
        return Err(Error::InvalidParameter("no time samples".into()));
    }
    if t_samples.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter(
            "time samples must be finite and nonnegative".into(),
        ));
    }
    if t_samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "time samples must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn evolve_all(
    h: &OperatorHandle,
    sd: &SpectralData,
    psi0: &Field,
    t_samples: &[f64],
    route: &Route,
) -> Result<Vec<Field>> {
    match route {
        Route::Free | Route::FreeOpen => {
            if !h.is_free() {
                return Err(Error::InvalidParameter(format!(
                    "route `{}` needs the free operator",
                    route.name()
                )));
            }
            t_samples
                .iter()
                .map(|&t| match route {
                    Route::Free => Ok(evolve_free(psi0, t)),
                    _ => evolve_free_open(psi0, t),
                })
                .collect()
        }
        Route::Direct(method) => evolve_direct_series(h, sd, psi0, t_samples, *method),
        Route::Contour { pou, quad, tol } => {
            let ev = ContourEvolution::converged(h, sd, psi0, *pou, quad, t_samples, *tol, 3)?;
            Ok(t_samples.iter().map(|&t| ev.at(t)).collect())
        }
    }
}

/// Weighted norms `‖P_cψ(t)‖_{L²_{-σ}}` with `ψ₀` projected onto the continuous subspace.
pub fn decay_series(
    h: &OperatorHandle,
    sd: &SpectralData,
    psi0: &Field,
    sigma: f64,
    t_samples: &[f64],
    route: &Route,
) -> Result<DecayReport> {
    let projected = project_continuous(sd, psi0)?;
    series(h, sd, &projected, sigma, t_samples, route, true)
}

/// [`decay_series`] without the projection; always out of hypothesis.
pub fn decay_series_unprojected(
    h: &OperatorHandle,
    sd: &SpectralData,
    psi0: &Field,
    sigma: f64,
    t_samples: &[f64],
    route: &Route,
) -> Result<DecayReport> {
    series(h, sd, psi0, sigma, t_samples, route, false)
}

fn series(
    h: &OperatorHandle,
    sd: &SpectralData,
    psi0: &Field,
    sigma: f64,
    t_samples: &[f64],
    route: &Route,
    projected: bool,
) -> Result<DecayReport> {
    check_times(t_samples)?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(
            "decay weight σ must be nonnegative".into(),
        ));
    }
    h.grid().check(psi0.grid(), "decay initial state")?;
    let mut warnings = Vec::new();
    let in_hypothesis = sigma > SIGMA_HYPOTHESIS && projected;
    if sigma <= SIGMA_HYPOTHESIS {
        warnings.push(format!(
            "sigma = {sigma} ≤ 5/2 is outside the decay hypothesis"
        ));
    }
    if !projected {
        warnings.push("initial state not projected onto the continuous subspace".into());
    }
    let spec = WeightedNormSpec::l2(-sigma);
    let norms = evolve_all(h, sd, psi0, t_samples, route)?
        .iter()
        .map(|psi| lattice::weighted_norm(psi, spec))
        .collect();
    Ok(DecayReport {
        sigma,
        route: route.name().into(),
        t_samples: t_samples.to_vec(),
        norms,
        fit_window: None,
        exponent: None,
        exponent_ci: None,
        tolerance: DEFAULT_TOLERANCE,
        verdict: false,
        in_hypothesis,
        projected,
        wrap_cap: route.periodic().then(|| wrap_time(psi0, 1.0)),
        warnings,
    })
}

/// Least-squares fit of `log norm` against `log t` over `window`, clipped to the wrap cap
/// and to the samples before the first vanishing norm.
pub fn fit_power_law(
    mut report: DecayReport,
    window: (f64, f64),
    tolerance: f64,
) -> Result<DecayReport> {
    let (t0, mut t1) = window;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::InvalidParameter(format!(
            "fit window ({t0}, {t1}) must satisfy 0 < t_min < t_max"
        )));
    }
    if let Some(cap) = report.wrap_cap {
        if cap < t1 {
            report.warnings.push(format!(
                "fit window clipped from t_max = {t1} to the wrap cap {cap:.4}"
            ));
            t1 = cap;
        }
    }
    let mut idx: Vec<usize> = (0..report.t_samples.len())
        .filter(|&i| report.t_samples[i] >= t0 && report.t_samples[i] <= t1)
        .collect();
    if let Some(z) = idx.iter().position(|&i| !(report.norms[i] > 0.0)) {
        report.warnings.push(format!(
            "zero norm at t = {}; fit window shrunk to the samples before it",
            report.t_samples[idx[z]]
        ));
        idx.truncate(z);
    }
    if idx.len() < MIN_SAMPLES {
        return Err(Error::Insufficient(format!(
            "fit window holds {} samples, needs {MIN_SAMPLES}",
            idx.len()
        )));
    }
    let ts: Vec<f64> = idx.iter().map(|&i| report.t_samples[i]).collect();
    let ns: Vec<f64> = idx.iter().map(|&i| report.norms[i]).collect();
    let (lo, hi) = (ts[0], ts[ts.len() - 1]);
    if (hi / lo).log10() < MIN_DECADES {
        return Err(Error::Insufficient(format!(
            "fit window [{lo}, {hi}] spans {:.2} decades, needs {MIN_DECADES}",
            (hi / lo).log10()
        )));
    }
    let line = fit::log_log(&ts, &ns)?;
    report.fit_window = Some((lo, hi));
    report.exponent = Some(line.slope);
    report.exponent_ci = Some(line.ci95());
    report.tolerance = tolerance;
    report.verdict = report.in_hypothesis && (line.slope - EXPECTED_EXPONENT).abs() <= tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Grid;
    use crate::potentials::{builtin_potential, PotentialKind};
    use crate::spectral::discrete_spectrum;
    use proptest::prelude::*;

    fn synthetic(t: &[f64], c: f64) -> DecayReport {
        DecayReport {
            sigma: 3.0,
            route: "synthetic".into(),
            t_samples: t.to_vec(),
            norms: t.iter().map(|t| c * t.powf(-1.5)).collect(),
            fit_window: None,
            exponent: None,
            exponent_ci: None,
            tolerance: DEFAULT_TOLERANCE,
            verdict: false,
            in_hypothesis: true,
            projected: true,
            wrap_cap: None,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn exact_power_law() {
        let t = log_times(5.0, 50.0, 10).unwrap();
        let r = fit_power_law(synthetic(&t, 7.0), (5.0, 50.0), 0.2).unwrap();
        assert!((r.exponent.unwrap() + 1.5).abs() < 1e-12);
        assert!(r.exponent_ci.unwrap() < 1e-10);
        assert!(r.verdict);
        assert_eq!(r.fit_window, Some((5.0, 50.0)));
    }

    #[test]
    fn window_requirements() {
        let t = log_times(5.0, 50.0, 5).unwrap();
        assert!(matches!(
            fit_power_law(synthetic(&t, 1.0), (5.0, 50.0), 0.2),
            Err(Error::Insufficient(_))
        ));
        let t = log_times(5.0, 20.0, 10).unwrap();
        assert!(matches!(
            fit_power_law(synthetic(&t, 1.0), (5.0, 20.0), 0.2),
            Err(Error::Insufficient(_))
        ));
        let t = log_times(1.0, 100.0, 20).unwrap();
        let mut r = synthetic(&t, 1.0);
        for n in r.norms.iter_mut().skip(17) {
            *n = 0.0;
        }
        let f = fit_power_law(r, (1.0, 100.0), 0.2).unwrap();
        assert!(f.warnings.iter().any(|w| w.contains("zero norm")));
        assert!(f.fit_window.unwrap().1 < t[17]);
        let mut r = synthetic(&t, 1.0);
        r.wrap_cap = Some(30.0);
        let f = fit_power_law(r, (1.0, 100.0), 0.2).unwrap();
        assert!(
            f.fit_window.unwrap().1 <= 30.0 && f.warnings.iter().any(|w| w.contains("wrap cap"))
        );
    }

    #[test]
    fn out_of_hypothesis_never_passes() {
        let t = log_times(5.0, 50.0, 10).unwrap();
        let mut r = synthetic(&t, 1.0);
        r.in_hypothesis = false;
        assert!(!fit_power_law(r, (5.0, 50.0), 0.2).unwrap().verdict);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn scale_equivariance(c in 1e-6f64..1e6, wiggle in 0.0f64..0.3) {
            let t = log_times(5.0, 50.0, 12).unwrap();
            let mut base = synthetic(&t, 1.0);
            for (i, n) in base.norms.iter_mut().enumerate() {
                *n *= 1.0 + wiggle * ((i * 7 % 5) as f64 - 2.0) / 2.0;
            }
            let mut scaled = base.clone();
            for n in &mut scaled.norms {
                *n *= c;
            }
            let a = fit_power_law(base, (5.0, 50.0), 0.2).unwrap().exponent.unwrap();
            let b = fit_power_law(scaled, (5.0, 50.0), 0.2).unwrap().exponent.unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    fn gaussian(g: Grid, s: f64) -> Field {
        Field::from_real_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s * s)).exp()
        })
    }

    #[test]
    fn zero_state_has_zero_norms() {
        let g = Grid::new(8, 4.0).unwrap();
        let h = OperatorHandle::free(g);
        let r = decay_series(
            &h,
            &SpectralData::empty(g),
            &Field::zeros(g),
            3.0,
            &[1.0, 2.0],
            &Route::Free,
        )
        .unwrap();
        assert!(r.norms.iter().all(|n| *n == 0.0));
    }

    #[test]
    fn free_open_decay_is_monotone_with_rate_three_halves() {
        let g = Grid::new(32, 16.0).unwrap();
        let h = OperatorHandle::free(g);
        let t = log_times(5.0, 50.0, 12).unwrap();
        let r = decay_series(
            &h,
            &SpectralData::empty(g),
            &gaussian(g, 1.5),
            3.0,
            &t,
            &Route::FreeOpen,
        )
        .unwrap();
        assert!(r.norms.windows(2).all(|w| w[1] < w[0]));
        assert!(r.wrap_cap.is_none());
        let f = fit_power_law(r, (5.0, 50.0), 0.15).unwrap();
        assert!(f.verdict, "{:?}", f.exponent);
    }

    #[test]
    fn retained_eigenstate_fails_the_verdict() {
        let g = Grid::new(12, 6.0).unwrap();
        let p = builtin_potential(PotentialKind::GaussianBump, &[-8.0, 0.3, 1.0], g).unwrap();
        let h = OperatorHandle::full(p);
        let sd = discrete_spectrum(&h, 2).unwrap();
        assert!(sd.n_discrete >= 1);
        let phi = sd.eigenfields[0].clone();
        let t = log_times(1.0, 10.0, 8).unwrap();
        let raw = decay_series_unprojected(
            &h,
            &sd,
            &phi,
            3.0,
            &t,
            &Route::Direct(DirectMethod::default()),
        )
        .unwrap();
        assert!(!raw.in_hypothesis);
        let n0 = raw.norms[0];
        assert!(raw.norms.iter().all(|n| (n - n0).abs() < 1e-8 * n0));
        let mut raw = raw;
        raw.wrap_cap = None;
        let f = fit_power_law(raw, (1.0, 10.0), 0.2).unwrap();
        assert!(f.exponent.unwrap() > -0.5 && !f.verdict);
        // projecting removes the stationary part entirely
        let proj = decay_series(
            &h,
            &sd,
            &phi,
            3.0,
            &t,
            &Route::Direct(DirectMethod::default()),
        )
        .unwrap();
        assert!(proj.norms.iter().all(|n| *n < 1e-8 * n0));
    }

    #[test]
    fn validates_times() {
        let g = Grid::new(8, 4.0).unwrap();
        let h = OperatorHandle::free(g);
        let sd = SpectralData::empty(g);
        let psi = gaussian(g, 1.0);
        assert!(decay_series(&h, &sd, &psi, 3.0, &[2.0, 1.0], &Route::Free).is_err());
        let hp = OperatorHandle::full(
            builtin_potential(PotentialKind::GaussianBump, &[1.0, 0.0, 1.0], g).unwrap(),
        );
        assert!(decay_series(&hp, &sd, &psi, 3.0, &[1.0], &Route::Free).is_err());
    }
}
