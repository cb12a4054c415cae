//! Time evolution `exp(-itH)ψ₀` by three routes: the free multiplier, direct evolution of the
//! discrete operator, and the spectral integral
//! `(2πi)⁻¹ ∫₀^∞ e^{-iλt} [R(λ+i0) - R(λ-i0)] P_cψ₀ dλ`.
//! Also a scalar model of the oscillatory integrals behind the `t^{-3/2}` rate.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::krylov;
use crate::lattice::{self, fft, Field, Grid, WeightedNormSpec, NO_CARRIER};
use crate::operators::{OperatorHandle, OperatorKind};
use crate::potentials::bump_profile;
use crate::quad;
use crate::resolvent::{BornVariant, Resolvent, ResolventOptions, ResolventQuery, Side};
use crate::spectral::{project_continuous, SpectralData};

/// `exp(-it|ξ|²)` on the periodic box.
pub fn evolve_free(psi0: &Field, t: f64) -> Field {
    if t == 0.0 {
        return psi0.clone();
    }
    lattice::apply_multiplier(psi0, NO_CARRIER, |k| {
        C64::from_polar(1.0, -t * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]))
    })
}

/// Free evolution on ℝ³ of data supported in the box, restricted to the box.
///
/// `exp(itΔ)` factorises into one-dimensional propagators along the axes. Each is applied
/// line by line on a zero-padded line long enough that nothing reaching the padding returns
/// within time `t`; cropping between axes commutes with the propagators along the other axes.
pub fn evolve_free_open(psi0: &Field, t: f64) -> Result<Field> {
    let grid = *psi0.grid();
    let n = grid.n();
    let h = grid.h();
    // fastest relevant speed: twice the largest resolved wavenumber carrying mass
    let speed = 2.0 * spectral_radius(psi0, 1e-14).max(1.0);
    let reach = speed * t.abs() + 2.0 * grid.l();
    let np = fft::good_size(((2.0 * grid.l() + reach) / h).ceil() as usize + n);
    let off = (np - n) / 2;
    let freqs: Vec<f64> = (0..np)
        .map(|j| {
            let s = if j < np / 2 {
                j as f64
            } else {
                j as f64 - np as f64
            };
            2.0 * std::f64::consts::PI * s / (np as f64 * h)
        })
        .collect();
    let phase: Vec<C64> = freqs
        .iter()
        .map(|k| C64::from_polar(1.0, -t * k * k))
        .collect();
    let mut data = psi0.values().to_vec();
    for axis in 0..3 {
        let stride = match axis {
            0 => n * n,
            1 => n,
            _ => 1,
        };
        let starts: Vec<usize> = (0..n * n)
            .map(|m| {
                let (a, b) = (m / n, m % n);
                match axis {
                    0 => a * n + b,
                    1 => a * n * n + b,
                    _ => (a * n + b) * n,
                }
            })
            .collect();
        let lines: Vec<Vec<C64>> = starts
            .par_iter()
            .map(|&s| {
                let mut buf = vec![C64::default(); np];
                for i in 0..n {
                    buf[off + i] = data[s + i * stride];
                }
                fft::forward_1d(&mut buf);
                for (b, p) in buf.iter_mut().zip(&phase) {
                    *b *= p;
                }
                fft::inverse_1d(&mut buf);
                buf[off..off + n].to_vec()
            })
            .collect();
        for (s, line) in starts.iter().zip(lines) {
            for (i, v) in line.into_iter().enumerate() {
                data[s + i * stride] = v;
            }
        }
    }
    Field::from_values(grid, data)
}

/// Smallest `|ξ|` beyond which the Fourier mass of `f` is below `rel` of the total.
pub fn spectral_radius(f: &Field, rel: f64) -> f64 {
    let hat = match lattice::fourier(f) {
        Ok(h) => h,
        Err(_) => return 0.0,
    };
    let g = f.grid();
    let mut pairs: Vec<(f64, f64)> = hat
        .values()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = g.wavevector(i);
            (
                (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt(),
                c.norm_sqr(),
            )
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (k, m) in &pairs {
        acc += m;
        if acc > rel * total {
            return *k;
        }
    }
    0.0
}

/// Root-mean-square wavenumber of `f`.
pub fn rms_wavenumber(f: &Field) -> f64 {
    let hat = match lattice::fourier(f) {
        Ok(h) => h,
        Err(_) => return 0.0,
    };
    let g = f.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, c) in hat.values().iter().enumerate() {
        let k = g.wavevector(i);
        num += (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * c.norm_sqr();
        den += c.norm_sqr();
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum DirectMethod {
    /// Short-iterative Lanczos with adaptive substeps.
    Lanczos { dim: usize, tol: f64 },
    /// Strang splitting `e^{-iH₀dt/2} e^{-iVdt} e^{-iH₀dt/2}`; only for `A ≡ 0`.
    SplitStep { dt: f64 },
}

impl Default for DirectMethod {
    fn default() -> Self {
        Self::Lanczos {
            dim: 40,
            tol: 1e-10,
        }
    }
}

fn check_sd(h: &OperatorHandle, sd: &SpectralData, psi0: &Field) -> Result<()> {
    h.grid().check(psi0.grid(), "initial state")?;
    h.grid().check(&sd.grid, "spectral data")
}

fn continuous_step(
    h: &OperatorHandle,
    psi: &Field,
    dt: f64,
    method: DirectMethod,
) -> Result<Field> {
    if dt == 0.0 {
        return Ok(psi.clone());
    }
    match method {
        DirectMethod::Lanczos { dim, tol } => {
            let op = |x: &Field| h.apply_carrier(x, NO_CARRIER);
            krylov::lanczos_expm(&op, psi, dt, dim, tol).map_err(Error::NotConverged)
        }
        DirectMethod::SplitStep { dt: step } => {
            let p = h.potential();
            if p.is_some_and(|p| p.has_magnetic()) && !h.is_free() {
                return Err(Error::InvalidParameter("split-step needs A = 0".into()));
            }
            if !(step > 0.0) {
                return Err(Error::InvalidParameter("split-step needs dt > 0".into()));
            }
            let steps = (dt.abs() / step).ceil().max(1.0) as usize;
            let tau = dt / steps as f64;
            let v: Option<Vec<C64>> = match (h.kind(), p) {
                (OperatorKind::Full, Some(p)) => Some(
                    p.v()
                        .iter()
                        .map(|v| C64::from_polar(1.0, -tau * v))
                        .collect(),
                ),
                _ => None,
            };
            let mut out = psi.clone();
            for _ in 0..steps {
                out = evolve_free(&out, 0.5 * tau);
                if let Some(v) = &v {
                    for (o, p) in out.values_mut().iter_mut().zip(v) {
                        *o *= p;
                    }
                }
                out = evolve_free(&out, 0.5 * tau);
            }
            Ok(out)
        }
    }
}

/// `exp(-itH)ψ₀`: the bound-state part exactly, the continuous part by `method`.
pub fn evolve_direct(
    h: &OperatorHandle,
    sd: &SpectralData,
    psi0: &Field,
    t: f64,
    method: DirectMethod,
) -> Result<Field> {
    Ok(evolve_direct_series(h, sd, psi0, &[t], method)?
        .pop()
        .expect("one time"))
}

/// [`evolve_direct`] at several times, stepping the continuous part from one sample to the
/// next in the given order.
pub fn evolve_direct_series(
    h: &OperatorHandle,
    sd: &SpectralData,
    psi0: &Field,
    times: &[f64],
    method: DirectMethod,
) -> Result<Vec<Field>> {
    check_sd(h, sd, psi0)?;
    let coeffs: Vec<C64> = sd.eigenfields.iter().map(|phi| phi.inner(psi0)).collect();
    let mut cont = project_continuous(sd, psi0)?;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !t.is_finite() {
            return Err(Error::NonFinite("evolution time".into()));
        }
        cont = continuous_step(h, &cont, t - now, method)?;
        now = t;
        let mut psi = cont.clone();
        for ((phi, c), w) in sd.eigenfields.iter().zip(&coeffs).zip(&sd.eigenvalues) {
            psi.axpy(c * C64::from_polar(1.0, -w * t), phi);
        }
        out.push(psi);
    }
    Ok(out)
}

/// Smooth splitting of the energy axis into `ζ_l` (supported in `|λ| < ε`) and `ζ_h = 1 - ζ_l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub eps_cut: f64,
}

impl Default for PartitionOfUnity {
    fn default() -> Self {
        Self { eps_cut: 0.1 }
    }
}

impl PartitionOfUnity {
    pub fn new(eps_cut: f64) -> Result<Self> {
        if !(eps_cut > 0.0 && eps_cut.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps_cut must be positive, got {eps_cut}"
            )));
        }
        Ok(Self { eps_cut })
    }

    /// 1 on `|λ| ≤ ε/2`, 0 on `|λ| ≥ ε`, a normalised exponential transition in between.
    pub fn zeta_l(&self, lambda: f64) -> f64 {
        let e = self.eps_cut;
        let a = lambda.abs();
        if a <= 0.5 * e {
            return 1.0;
        }
        if a >= e {
            return 0.0;
        }
        let s = (a - 0.5 * e) / (0.5 * e);
        let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
        f(1.0 - s) / (f(1.0 - s) + f(s))
    }

    pub fn zeta_h(&self, lambda: f64) -> f64 {
        1.0 - self.zeta_l(lambda)
    }
}

/// Gauss–Legendre panels on the energy axis; with `substitution` the panels live in `μ = √λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub lambda_max: f64,
    pub panels: Vec<((f64, f64), usize)>,
    pub substitution: bool,
}

impl QuadratureSpec {
    /// Panels in `μ` with breakpoints at `√(ε/2)` and `√ε`, then panels of width at most
    /// `dmu` up to `√λ_max`, each with `nodes` points.
    pub fn uniform_mu(
        lambda_max: f64,
        pou: &PartitionOfUnity,
        dmu: f64,
        nodes: usize,
    ) -> Result<Self> {
        if !(lambda_max > pou.eps_cut && dmu > 0.0) || nodes < 2 {
            return Err(Error::InvalidParameter(
                "need lambda_max > eps_cut, dmu > 0, nodes >= 2".into(),
            ));
        }
        let a = (0.5 * pou.eps_cut).sqrt();
        let b = pou.eps_cut.sqrt();
        let top = lambda_max.sqrt();
        let mut panels = vec![((0.0, a), nodes), ((a, b), nodes)];
        let count = ((top - b) / dmu).ceil().max(1.0) as usize;
        let w = (top - b) / count as f64;
        for i in 0..count {
            panels.push(((b + i as f64 * w, b + (i + 1) as f64 * w), nodes));
        }
        Ok(Self {
            lambda_max,
            panels,
            substitution: true,
        })
    }

    /// Energy cut-off from the Fourier content of `f`: the mass beyond `√λ_max` is below
    /// `rel²` of the total.
    pub fn for_data(f: &Field, pou: &PartitionOfUnity, rel: f64, t_max: f64) -> Result<Self> {
        let k = spectral_radius(f, rel * rel).max(2.0 * pou.eps_cut.sqrt());
        let lambda_max = (1.2 * k).powi(2);
        // resolve the phase e^{-iμ²t}: about six nodes per oscillation
        let dmu = (2.0 / (lambda_max.sqrt() * t_max.max(0.5))).clamp(0.05, 0.5);
        Self::uniform_mu(lambda_max, pou, dmu, 12)
    }

    pub fn refined(&self) -> Self {
        Self {
            lambda_max: self.lambda_max,
            panels: self.panels.iter().map(|(iv, n)| (*iv, 2 * n)).collect(),
            substitution: self.substitution,
        }
    }

    /// `(λ, weight)` pairs for `∫ g(λ) dλ`.
    pub fn nodes(&self) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for ((a, b), n) in &self.panels {
            if *n < 2 || !(b > a) || *a < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "bad panel ({a}, {b}) with {n} nodes"
                )));
            }
            for (x, w) in quad::mapped(*n, *a, *b) {
                if self.substitution {
                    out.push((x * x, 2.0 * x * w));
                } else {
                    out.push((x, w));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourReport {
    pub nodes: usize,
    pub solver_iterations: usize,
    /// `Σ w‖g‖/‖P_cψ₀‖` over the last panel, a proxy for the truncated tail beyond `λ_max`.
    pub tail_estimate: f64,
    /// `L²_{-σ}` difference between the last two quadrature levels, relative.
    pub refinement_change: f64,
}

/// Spectral density `g(λ) = (2πi)⁻¹ [R(λ+i0) - R(λ-i0)] P_cψ₀` at quadrature nodes, reusable
/// for any `t`.
pub struct ContourEvolution {
    nodes: Vec<(f64, f64, Field)>,
    pou: PartitionOfUnity,
    grid: Grid,
    report: ContourReport,
}

impl ContourEvolution {
    pub fn new(
        h: &OperatorHandle,
        sd: &SpectralData,
        psi0: &Field,
        pou: PartitionOfUnity,
        quad: &QuadratureSpec,
        solver_tol: f64,
    ) -> Result<Self> {
        check_sd(h, sd, psi0)?;
        let f = project_continuous(sd, psi0)?;
        let res = Resolvent::new(h, &[&f], ResolventOptions::free_space(solver_tol))?;
        let pts = quad.nodes()?;
        let solved: Vec<(f64, f64, Field, usize)> = pts
            .par_iter()
            .map(|&(lambda, w)| {
                let mut pair = Vec::with_capacity(2);
                let mut iters = 0;
                for side in [Side::Plus, Side::Minus] {
                    let q = ResolventQuery::limit(lambda, side, 0)?;
                    let (u, rep) = res.born(&q, &f, BornVariant::Left)?;
                    if !rep.converged {
                        return Err(Error::NotConverged(format!(
                            "boundary value at lambda = {lambda} ({side:?}): residual {:.2e}",
                            rep.residual
                        )));
                    }
                    iters += rep.iterations;
                    pair.push(u);
                }
                let g = &(&pair[0] - &pair[1]) * C64::new(0.0, -1.0 / (2.0 * std::f64::consts::PI));
                Ok((lambda, w, g, iters))
            })
            .collect::<Result<_>>()?;
        let solver_iterations = solved.iter().map(|s| s.3).sum();
        let fnorm = f.norm().max(f64::MIN_POSITIVE);
        // the last panel's share of the integral stands in for what lies beyond λ_max
        let last = quad
            .panels
            .last()
            .map(|p| p.1)
            .unwrap_or(0)
            .min(solved.len());
        let tail_estimate = solved[solved.len() - last..]
            .iter()
            .map(|s| s.1 * s.2.norm())
            .sum::<f64>()
            / fnorm;
        let report = ContourReport {
            nodes: solved.len(),
            solver_iterations,
            tail_estimate,
            refinement_change: f64::NAN,
        };
        Ok(Self {
            nodes: solved.into_iter().map(|(l, w, g, _)| (l, w, g)).collect(),
            pou,
            grid: *h.grid(),
            report,
        })
    }

    /// Builds the quadrature at `quad` and its refinement (more nodes per panel), repeating up
    /// to `max_levels` times until the results at every time in `times` agree to `tol` in
    /// `L²_{-1}`; returns the finest level.
    #[allow(clippy::too_many_arguments)]
    pub fn converged(
        h: &OperatorHandle,
        sd: &SpectralData,
        psi0: &Field,
        pou: PartitionOfUnity,
        quad: &QuadratureSpec,
        times: &[f64],
        tol: f64,
        max_levels: usize,
    ) -> Result<Self> {
        let solver_tol = (0.01 * tol).clamp(1e-12, 1e-8);
        let mut spec = quad.clone();
        let mut prev = Self::new(h, sd, psi0, pou, &spec, solver_tol)?;
        for _ in 0..max_levels.max(1) {
            spec = spec.refined();
            let mut next = Self::new(h, sd, psi0, pou, &spec, solver_tol)?;
            let mut change: f64 = 0.0;
            for &t in times {
                let a = prev.at(t);
                let b = next.at(t);
                let spec_w = WeightedNormSpec::l2(-1.0);
                let d = lattice::weighted_norm(&(&a - &b), spec_w)
                    / lattice::weighted_norm(&b, spec_w).max(f64::MIN_POSITIVE);
                change = change.max(d);
            }
            next.report.refinement_change = change;
            if change <= tol {
                return Ok(next);
            }
            prev = next;
        }
        Ok(prev)
    }

    pub fn report(&self) -> &ContourReport {
        &self.report
    }

    fn weighted_sum(&self, t: f64, weight: impl Fn(f64) -> f64) -> Field {
        let mut out = Field::zeros(self.grid);
        for (lambda, w, g) in &self.nodes {
            let c = C64::from_polar(w * weight(*lambda), -lambda * t);
            if c != C64::default() {
                out.axpy(c, g);
            }
        }
        out
    }

    /// `exp(-itH)P_cψ₀`.
    pub fn at(&self, t: f64) -> Field {
        self.weighted_sum(t, |_| 1.0)
    }

    /// The `ζ_l` and `ζ_h` parts, summing to [`ContourEvolution::at`].
    pub fn parts(&self, t: f64) -> (Field, Field) {
        (
            self.weighted_sum(t, |l| self.pou.zeta_l(l)),
            self.weighted_sum(t, |l| self.pou.zeta_h(l)),
        )
    }
}

/// `exp(-itH)P_cψ₀` by the spectral integral, refined until two quadrature levels agree to
/// `tol` in `L²_{-1}`.
pub fn evolve_contour(
    h: &OperatorHandle,
    sd: &SpectralData,
    psi0: &Field,
    t: f64,
    pou: PartitionOfUnity,
    quad: &QuadratureSpec,
    tol: f64,
) -> Result<(Field, ContourReport)> {
    let ev = ContourEvolution::converged(h, sd, psi0, pou, quad, &[t], tol, 3)?;
    Ok((ev.at(t), ev.report.clone()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JkKind {
    /// `√ω·ζ(ω)` with `ζ` the exponential bump of radius `a`.
    SqrtBump,
    /// `ω²(a - ω)³`: `F` and `F'` vanish at both ends.
    SmoothBump,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JkResult {
    pub t: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// `None` when the integral vanishes identically.
    pub exponent: Option<f64>,
    pub exponent_se: f64,
}

/// `|∫₀^a e^{-iωt}F(ω) dω|` on the samples and the fitted log–log slope.
pub fn jensen_kato_oracle(kind: JkKind, a: f64, t_samples: &[f64]) -> Result<JkResult> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "a must be positive, got {a}"
        )));
    }
    if t_samples.len() < 4 || t_samples.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Insufficient("need at least 4 positive times".into()));
    }
    let tmin = t_samples.iter().copied().fold(f64::INFINITY, f64::min);
    let tmax = t_samples.iter().copied().fold(0.0, f64::max);
    if tmin * a < 5.0 || tmax < 10.0 * tmin {
        return Err(Error::Insufficient(format!(
            "t window [{tmin}, {tmax}] does not leave the transient (need t_min·a >= 5 and a decade)"
        )));
    }
    if kind == JkKind::Zero {
        return Ok(JkResult {
            t: t_samples.to_vec(),
            magnitudes: vec![0.0; t_samples.len()],
            exponent: None,
            exponent_se: 0.0,
        });
    }
    let mags: Vec<f64> = t_samples
        .par_iter()
        .map(|&t| {
            // ω = u² removes the square-root edge; panels resolve e^{-iu²t}
            let top = a.sqrt();
            let panels = ((top * top * t / 2.0).ceil() as usize + 8).max(16);
            let h = top / panels as f64;
            let mut acc = C64::default();
            for p in 0..panels {
                let lo = p as f64 * h;
                acc += quad::integrate(24, lo, lo + h, |u| {
                    let w = u * u;
                    let f = match kind {
                        JkKind::SqrtBump => u * bump_profile([w, 0.0, 0.0], [0.0; 3], a),
                        JkKind::SmoothBump => w * w * (a - w).powi(3),
                        JkKind::Zero => 0.0,
                    };
                    C64::from_polar(2.0 * u * f, -w * t)
                });
            }
            acc.norm()
        })
        .collect();
    let lf = fit::log_log(t_samples, &mags)?;
    Ok(JkResult {
        t: t_samples.to_vec(),
        magnitudes: mags,
        exponent: Some(lf.slope),
        exponent_se: lf.slope_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{builtin_potential, PotentialKind};
    use crate::spectral::discrete_spectrum;

    fn gaussian(g: Grid, s: f64) -> Field {
        Field::from_real_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s * s)).exp()
        })
    }

    fn l2m1(a: &Field, b: &Field) -> f64 {
        let s = WeightedNormSpec::l2(-1.0);
        lattice::weighted_norm(&(a - b), s) / lattice::weighted_norm(b, s)
    }

    fn exact_gaussian(g: Grid, s: f64, t: f64) -> Field {
        // (s²/(s² + 2it))^{3/2} exp(-|x|²/(2(s² + 2it))) solves iψ' = -Δψ
        let z = C64::new(s * s, 2.0 * t);
        Field::from_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            (s * s / z).powf(1.5) * (-r2 / (2.0 * z)).exp()
        })
    }

    fn inner_half_max_err(a: &Field, b: &Field) -> f64 {
        let g = a.grid();
        (0..g.len())
            .filter(|i| g.position(*i).iter().all(|c| c.abs() <= 0.5 * g.l()))
            .map(|i| (a.values()[i] - b.values()[i]).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn free_evolution_examples() {
        let g = Grid::new(32, 12.0).unwrap();
        let psi = gaussian(g, 2.0);
        assert_eq!(evolve_free(&psi, 0.0), psi);
        let a = evolve_free(&psi, 0.4);
        assert!((a.norm() - psi.norm()).abs() < 1e-12 * psi.norm());
        let b = evolve_free(&evolve_free(&psi, 0.15), 0.25);
        assert!((&a - &b).norm() < 1e-12 * psi.norm());
        assert!(inner_half_max_err(&a, &exact_gaussian(g, 2.0, 0.4)) < 1e-8);
        let xi = [g.freq(2), g.freq(5), g.freq(31)];
        let pw = Field::from_fn(g, |x| {
            C64::from_polar(1.0, xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2])
        });
        let e = -(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) * 1.3;
        assert!(
            (&evolve_free(&pw, 1.3) - &(&pw * C64::from_polar(1.0, e))).norm() < 1e-10 * pw.norm()
        );
    }

    #[test]
    fn open_free_evolution_has_no_wraparound() {
        // by t = 6 the periodic solution has wrapped; the open one still matches the exact one
        let g = Grid::new(24, 6.0).unwrap();
        let psi = gaussian(g, 1.0);
        let t = 6.0;
        let exact = exact_gaussian(g, 1.0, t);
        let open = evolve_free_open(&psi, t).unwrap();
        assert!(inner_half_max_err(&open, &exact) < 1e-8);
        assert!(inner_half_max_err(&evolve_free(&psi, t), &exact) > 1e-3 * exact.max_abs());
        let small = evolve_free_open(&psi, 0.3).unwrap();
        assert!(inner_half_max_err(&small, &evolve_free(&psi, 0.3)) < 1e-8);
    }

    fn handle(n: usize, l: f64, v: f64, a: f64) -> OperatorHandle {
        let g = Grid::new(n, l).unwrap();
        OperatorHandle::full(
            builtin_potential(PotentialKind::GaussianBump, &[v, a, 1.0], g).unwrap(),
        )
    }

    #[test]
    fn direct_matches_dense_and_is_unitary() {
        let h = handle(10, 4.0, -6.0, 0.4);
        let sd = discrete_spectrum(&h, 2).unwrap();
        assert!(sd.n_discrete >= 1);
        let psi = Field::from_fn(*h.grid(), |x| {
            C64::new(
                (-(x[0] - 0.5).powi(2) - x[1] * x[1] - x[2] * x[2]).exp(),
                0.2 * x[1],
            )
        });
        let de = crate::dense::eigen(&h).unwrap();
        let d = evolve_direct(&h, &sd, &psi, 1.0, DirectMethod::default()).unwrap();
        let oracle = de.evolve(&psi, 1.0).unwrap();
        assert!((&d - &oracle).norm() < 1e-6 * psi.norm());
        let back = evolve_direct(&h, &sd, &d, -1.0, DirectMethod::default()).unwrap();
        assert!((&back - &psi).norm() < 1e-8 * psi.norm());
        assert!((d.norm() - psi.norm()).abs() < 1e-8 * psi.norm());
        // an eigenstate only rotates
        let phi = &sd.eigenfields[0];
        let e = evolve_direct(&h, &sd, phi, 2.0, DirectMethod::default()).unwrap();
        let want = phi * C64::from_polar(1.0, -2.0 * sd.eigenvalues[0]);
        assert!((&e - &want).norm() < 1e-9);
    }

    #[test]
    fn direct_reduces_to_free_and_split_step_converges() {
        let g = Grid::new(12, 5.0).unwrap();
        let psi = gaussian(g, 1.0);
        let free = OperatorHandle::free(g);
        let sd = SpectralData::empty(g);
        let d = evolve_direct(&free, &sd, &psi, 1.5, DirectMethod::default()).unwrap();
        assert!((&d - &evolve_free(&psi, 1.5)).norm() < 1e-8 * psi.norm());
        let h = handle(12, 5.0, 1.0, 0.0);
        let lz = evolve_direct(&h, &sd, &psi, 1.0, DirectMethod::default()).unwrap();
        let e1 = (&evolve_direct(&h, &sd, &psi, 1.0, DirectMethod::SplitStep { dt: 0.02 })
            .unwrap()
            - &lz)
            .norm();
        let e2 = (&evolve_direct(&h, &sd, &psi, 1.0, DirectMethod::SplitStep { dt: 0.01 })
            .unwrap()
            - &lz)
            .norm();
        assert!(e2 < e1 / 3.5 && e2 < 1e-3, "{e1} {e2}");
        let mag = handle(12, 5.0, 1.0, 0.5);
        assert!(evolve_direct(&mag, &sd, &psi, 1.0, DirectMethod::SplitStep { dt: 0.01 }).is_err());
    }

    #[test]
    fn partition_of_unity() {
        let p = PartitionOfUnity::default();
        for i in 0..400 {
            let l = -0.2 + i as f64 * 0.001;
            let (a, b) = (p.zeta_l(l), p.zeta_h(l));
            assert!((0.0..=1.0).contains(&a) && a + b == 1.0);
        }
        assert_eq!(p.zeta_l(0.05), 1.0);
        assert_eq!(p.zeta_l(0.1), 0.0);
        assert!(PartitionOfUnity::new(0.0).is_err());
    }

    #[test]
    fn contour_reproduces_free_evolution() {
        let g = Grid::new(16, 5.0).unwrap();
        let psi = gaussian(g, 1.0);
        let h = OperatorHandle::free(g);
        let sd = SpectralData::empty(g);
        let pou = PartitionOfUnity::default();
        let quad = QuadratureSpec::for_data(&psi, &pou, 1e-6, 2.0).unwrap();
        let ev =
            ContourEvolution::converged(&h, &sd, &psi, pou, &quad, &[0.0, 2.0], 1e-6, 1).unwrap();
        assert!(ev.report().tail_estimate < 1e-6, "{:?}", ev.report());
        assert!(
            l2m1(&ev.at(0.0), &psi) < 1e-5,
            "{}",
            l2m1(&ev.at(0.0), &psi)
        );
        let open = evolve_free_open(&psi, 2.0).unwrap();
        assert!(
            l2m1(&ev.at(2.0), &open) < 1e-4,
            "{}",
            l2m1(&ev.at(2.0), &open)
        );
        let (lo, hi) = ev.parts(2.0);
        assert!((&(&lo + &hi) - &ev.at(2.0)).norm() < 1e-10 * psi.norm());
    }

    #[test]
    fn jensen_kato_rates() {
        let ts: Vec<f64> = (0..13)
            .map(|i| 10f64 * 10f64.powf(i as f64 / 6.0))
            .collect();
        let r = jensen_kato_oracle(JkKind::SqrtBump, 1.0, &ts).unwrap();
        assert!((r.exponent.unwrap() + 1.5).abs() < 0.1, "{r:?}");
        let s = jensen_kato_oracle(JkKind::SmoothBump, 1.0, &ts).unwrap();
        assert!(s.exponent.unwrap() <= -1.9, "{s:?}");
        assert_eq!(
            jensen_kato_oracle(JkKind::Zero, 1.0, &ts).unwrap().exponent,
            None
        );
        assert!(jensen_kato_oracle(JkKind::SqrtBump, 1.0, &[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}
