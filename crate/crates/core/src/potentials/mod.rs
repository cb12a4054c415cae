//! Magnetic and scalar potentials: builtin families, decay validation, the perturbation
//! `W = H - H₀` and gauge transformations.

mod analytic;

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub(crate) use analytic::bump as bump_profile;
pub use analytic::AnalyticPotential;

use crate::error::{Error, Result};
use crate::fit;
use crate::lattice::{self, fft, Carrier, Field, Grid, NO_CARRIER};

/// Reported in place of a decay exponent when the data decay faster than any power.
pub const BETA_CAP: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    GaussianBump,
    CompactBump,
    CoupledWell,
}

impl FromStr for PotentialKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_bump" => Ok(Self::GaussianBump),
            "compact_bump" => Ok(Self::CompactBump),
            "coupled_well" => Ok(Self::CoupledWell),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// Structured-text potential description (the `[potential]` table of a run config).
///
/// * `gaussian_bump`: `V = v_amplitude·G_w(x-c)`, `A_j = a_amplitude·w·∂_j G_w(x-c-s_j)`
/// * `compact_bump`: same with the compact bump of radius `width`
/// * `coupled_well`: `V = -coupling·G_w(x-c)`, optional `a_amplitude` as for `gaussian_bump`
///
/// `G_w` is the unit-height Gaussian of width `w`; `s_j` is a `w/2` offset along axis `j+1`,
/// which makes `curl A` nonzero while every `A_j` integrates to zero along its own axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub v_amplitude: f64,
    #[serde(default)]
    pub a_amplitude: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub center: [f64; 3],
    #[serde(default)]
    pub coupling: f64,
}

fn default_width() -> f64 {
    1.0
}

impl PotentialSpec {
    /// Zero potential expressed as a vanishing Gaussian bump.
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::GaussianBump,
            v_amplitude: 0.0,
            a_amplitude: 0.0,
            width: 1.0,
            center: [0.0; 3],
            coupling: 0.0,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let c = self.center;
        match self.kind {
            PotentialKind::GaussianBump | PotentialKind::CompactBump => {
                vec![
                    self.v_amplitude,
                    self.a_amplitude,
                    self.width,
                    c[0],
                    c[1],
                    c[2],
                ]
            }
            PotentialKind::CoupledWell => {
                vec![
                    self.coupling,
                    self.width,
                    self.a_amplitude,
                    c[0],
                    c[1],
                    c[2],
                ]
            }
        }
    }

    pub fn build(&self, grid: Grid) -> Result<PotentialData> {
        builtin_potential(self.kind, &self.params(), grid)
    }
}

/// Potentials sampled on a grid. `grad_a[i][j]` holds `∂_i A_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialData {
    grid: Grid,
    a: [Vec<f64>; 3],
    v: Vec<f64>,
    grad_a: [[Vec<f64>; 3]; 3],
    analytic: Option<AnalyticPotential>,
}

impl PotentialData {
    pub fn zero(grid: Grid) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            grid,
            a: [z.clone(), z.clone(), z.clone()],
            v: z.clone(),
            grad_a: std::array::from_fn(|_| [z.clone(), z.clone(), z.clone()]),
            analytic: Some(AnalyticPotential::Zero),
        }
    }

    /// Builds potentials from sampled components; `∇A` is computed spectrally.
    pub fn from_components(
        grid: Grid,
        a: [Vec<f64>; 3],
        v: Vec<f64>,
        analytic: Option<AnalyticPotential>,
    ) -> Result<Self> {
        for comp in a.iter().chain(std::iter::once(&v)) {
            if comp.len() != grid.len() {
                return Err(Error::SizeMismatch {
                    expected: grid.len(),
                    got: comp.len(),
                });
            }
            if comp.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("potential component".into()));
            }
        }
        let grad_a =
            std::array::from_fn(|i| std::array::from_fn(|j| real_derivative(&a[j], grid, i)));
        Ok(Self {
            grid,
            a,
            v,
            grad_a,
            analytic,
        })
    }

    /// Cross-checks a caller-provided `∇A` against the spectral one (relative 1e-8).
    pub fn check_gradient(&self, grad: &[[Vec<f64>; 3]; 3]) -> Result<()> {
        let scale = self
            .grad_a
            .iter()
            .flatten()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..3 {
            for j in 0..3 {
                if grad[i][j].len() != self.grid.len() {
                    return Err(Error::SizeMismatch {
                        expected: self.grid.len(),
                        got: grad[i][j].len(),
                    });
                }
                let err = grad[i][j]
                    .iter()
                    .zip(&self.grad_a[i][j])
                    .fold(0.0f64, |m, (u, s)| m.max((u - s).abs()));
                if err > 1e-8 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "supplied dA_{j}/dx_{i} deviates from spectral derivative by {err:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Long-range `V = amp·⟨x⟩^{-p}`, `A = 0`.
    pub fn inverse_power(grid: Grid, amp: f64, exponent: f64) -> Result<Self> {
        let an = AnalyticPotential::InversePower { amp, exponent };
        let v = (0..grid.len()).map(|i| an.v(grid.position(i))).collect();
        let z = vec![0.0; grid.len()];
        Self::from_components(grid, [z.clone(), z.clone(), z], v, Some(an))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn a(&self) -> &[Vec<f64>; 3] {
        &self.a
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn grad_a(&self) -> &[[Vec<f64>; 3]; 3] {
        &self.grad_a
    }
    pub fn analytic(&self) -> Option<&AnalyticPotential> {
        self.analytic.as_ref()
    }

    pub fn has_magnetic(&self) -> bool {
        self.a.iter().any(|c| c.iter().any(|v| *v != 0.0))
    }

    pub fn is_zero(&self) -> bool {
        !self.has_magnetic() && self.v.iter().all(|v| *v == 0.0)
    }

    pub fn min_v(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same magnetic potential, `V` replaced by zero.
    pub fn magnetic_part(&self) -> Self {
        let mut p = self.clone();
        p.v.iter_mut().for_each(|v| *v = 0.0);
        p.analytic = None;
        p
    }

    /// `(A, V) ↦ (sa·A, sv·V)`.
    pub fn scaled(&self, sa: f64, sv: f64) -> Self {
        let mut p = self.clone();
        for c in p.a.iter_mut().chain(p.grad_a.iter_mut().flatten()) {
            c.iter_mut().for_each(|v| *v *= sa);
        }
        p.v.iter_mut().for_each(|v| *v *= sv);
        p.analytic = None;
        p
    }

    /// Largest `|x|` where `|A| + |V|` exceeds `rel` times its maximum.
    pub fn support_radius(&self, rel: f64) -> f64 {
        let mag: Vec<f64> = (0..self.grid.len())
            .map(|i| self.v[i].abs() + self.a[0][i].abs() + self.a[1][i].abs() + self.a[2][i].abs())
            .collect();
        let m = mag.iter().copied().fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        mag.iter()
            .enumerate()
            .filter(|(_, v)| **v > rel * m)
            .map(|(i, _)| {
                let x = self.grid.position(i);
                (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Spectral derivative of a real periodic array along `axis` with the Nyquist plane of that
/// axis removed, so the result stays real.
pub(crate) fn real_derivative(values: &[f64], grid: Grid, axis: usize) -> Vec<f64> {
    let n = grid.n();
    let mut v: Vec<C64> = values.iter().map(|x| C64::new(*x, 0.0)).collect();
    fft::forward(&mut v, n);
    for (idx, c) in v.iter_mut().enumerate() {
        let (i, j, k) = grid.unravel(idx);
        let m = [i, j, k][axis];
        if m == n / 2 {
            *c = C64::default();
        } else {
            *c *= C64::new(0.0, grid.freq(m));
        }
    }
    fft::inverse(&mut v, n);
    v.into_iter().map(|c| c.re).collect()
}

/// Constructs one of the builtin potential families.
///
/// Parameter lists (trailing center entries optional, default origin):
/// `gaussian_bump`/`compact_bump`: `[v_amp, a_amp, width, cx, cy, cz]`;
/// `coupled_well`: `[coupling, width, a_amp, cx, cy, cz]`.
pub fn builtin_potential(kind: PotentialKind, params: &[f64], grid: Grid) -> Result<PotentialData> {
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("potential parameters".into()));
    }
    let get = |i: usize, d: f64| params.get(i).copied().unwrap_or(d);
    let required = match kind {
        PotentialKind::CoupledWell => 2,
        _ => 3,
    };
    if params.len() < required || params.len() > 6 {
        return Err(Error::InvalidParameter(format!(
            "{kind:?} takes {required}..=6 parameters, got {}",
            params.len()
        )));
    }
    let analytic = match kind {
        PotentialKind::GaussianBump => AnalyticPotential::Gaussian {
            v_amp: get(0, 0.0),
            a_amp: get(1, 0.0),
            width: get(2, 1.0),
            center: [get(3, 0.0), get(4, 0.0), get(5, 0.0)],
        },
        PotentialKind::CompactBump => AnalyticPotential::Compact {
            v_amp: get(0, 0.0),
            a_amp: get(1, 0.0),
            radius: get(2, 1.0),
            center: [get(3, 0.0), get(4, 0.0), get(5, 0.0)],
        },
        PotentialKind::CoupledWell => AnalyticPotential::Gaussian {
            v_amp: -get(0, 0.0),
            a_amp: get(2, 0.0),
            width: get(1, 1.0),
            center: [get(3, 0.0), get(4, 0.0), get(5, 0.0)],
        },
    };
    let width = match analytic {
        AnalyticPotential::Gaussian { width, .. } => width,
        AnalyticPotential::Compact { radius, .. } => radius,
        _ => unreachable!(),
    };
    if width <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "width must be positive, got {width}"
        )));
    }
    PotentialData::from_analytic(grid, analytic)
}

impl PotentialData {
    /// Samples an analytic descriptor; `A_j` is the real spectral `∂_j` of the sampled seed.
    pub fn from_analytic(grid: Grid, analytic: AnalyticPotential) -> Result<Self> {
        let v: Vec<f64> = (0..grid.len())
            .map(|i| analytic.v(grid.position(i)))
            .collect();
        let a: [Vec<f64>; 3] = std::array::from_fn(|j| {
            let seed: Vec<f64> = (0..grid.len())
                .map(|i| analytic.seed(j, grid.position(i)))
                .collect();
            if seed.iter().all(|s| *s == 0.0) {
                seed
            } else {
                real_derivative(&seed, grid, j)
            }
        });
        PotentialData::from_components(grid, a, v, Some(analytic))
    }
}

/// `Wψ = i∇·(Aψ) + iA·∇ψ + (A² + V)ψ`, i.e. `H - H₀` for `H = (-i∇ - A)² + V`.
pub fn apply_w(p: &PotentialData, psi: &Field) -> Result<Field> {
    p.grid.check(psi.grid(), "apply_w")?;
    Ok(apply_w_carrier(p, psi, NO_CARRIER, true))
}

/// `W` acting on the envelope of `exp(i k·x)ψ`; `include_v = false` gives `H_A - H₀`.
pub(crate) fn apply_w_carrier(
    p: &PotentialData,
    psi: &Field,
    carrier: Carrier,
    include_v: bool,
) -> Field {
    let grid = p.grid;
    let len = grid.len();
    let vals = psi.values();
    let mut out: Vec<C64> = (0..len)
        .map(|i| {
            let a2 = p.a[0][i] * p.a[0][i] + p.a[1][i] * p.a[1][i] + p.a[2][i] * p.a[2][i];
            let v = if include_v { p.v[i] } else { 0.0 };
            vals[i] * (a2 + v)
        })
        .collect();
    if p.has_magnetic() {
        let grad = lattice::gradient(psi, carrier);
        let apsi: [Field; 3] = std::array::from_fn(|d| psi.mul_real(&p.a[d]));
        let div = lattice::divergence([&apsi[0], &apsi[1], &apsi[2]], carrier);
        let iu = C64::new(0.0, 1.0);
        for i in 0..len {
            let adg = grad[0].values()[i] * p.a[0][i]
                + grad[1].values()[i] * p.a[1][i]
                + grad[2].values()[i] * p.a[2][i];
            out[i] += iu * (div.values()[i] + adg);
        }
    }
    Field::from_values_unchecked(grid, out)
}

/// Exponents fitted to the decay of the potentials along spheres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub beta: f64,
    pub beta1: f64,
    pub c: f64,
    pub beta_se: f64,
    pub beta1_se: f64,
    pub pass: bool,
}

/// Log–log fit of `max_{|x|=r}(|V| + |A| + |∇A|)` and `max_{|x|=r}|∇∇A|` against `⟨r⟩`.
pub fn validate_decay(p: &PotentialData, radii: &[f64]) -> Result<DecayProfile> {
    if radii.len() < 3 {
        return Err(Error::Insufficient(
            "validate_decay needs at least 3 radii".into(),
        ));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidParameter(
            "radii must be positive and increasing".into(),
        ));
    }
    let an = match p.analytic() {
        Some(a) => a,
        None => {
            return Err(Error::InvalidParameter(
                "validate_decay requires an analytic descriptor; grid-only fits are refused".into(),
            ))
        }
    };
    let dirs = sphere_directions(96);
    let mut prim = Vec::with_capacity(radii.len());
    let mut second = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut m0: f64 = 0.0;
        let mut m1: f64 = 0.0;
        for d in &dirs {
            let x = [r * d[0], r * d[1], r * d[2]];
            m0 = m0.max(an.primary_magnitude(x));
            m1 = m1.max(an.hess_a_norm(x));
        }
        prim.push(m0);
        second.push(m1);
    }
    let (beta, beta_se, c) = fit_exponent(radii, &prim)?;
    let (beta1, beta1_se, _) = fit_exponent(radii, &second)?;
    let pass = (beta - 2.0 * beta_se > 3.0) && (beta1 - 2.0 * beta1_se > 2.0);
    Ok(DecayProfile {
        beta,
        beta1,
        c,
        beta_se,
        beta1_se,
        pass,
    })
}

/// Returns `(β, se, C)` for `values ≈ C⟨r⟩^{-β}`, with `β = BETA_CAP` for super-polynomial decay.
fn fit_exponent(radii: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    const TINY: f64 = 1e-280;
    if values.iter().all(|v| *v <= TINY) {
        return Ok((BETA_CAP, 0.0, 0.0));
    }
    // a tail that vanishes identically beyond some radius is compactly supported
    if values.last().is_some_and(|v| *v <= TINY) {
        return Ok((BETA_CAP, 0.0, values[0]));
    }
    let br: Vec<f64> = radii.iter().map(|r| (1.0 + r * r).sqrt()).collect();
    let local: Vec<f64> = (1..radii.len())
        .map(|i| (values[i] / values[i - 1]).ln() / (br[i] / br[i - 1]).ln())
        .collect();
    let first = local[0];
    let last = *local.last().unwrap();
    if last < first - first.abs().mul_add(0.5, 1.0) {
        return Ok((BETA_CAP, 0.0, values[0]));
    }
    let f = fit::log_log(&br, values)?;
    Ok(((-f.slope).min(BETA_CAP), f.slope_se, f.intercept.exp()))
}

fn sphere_directions(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut dirs: Vec<[f64; 3]> = (0..count)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            [r * th.cos(), y, r * th.sin()]
        })
        .collect();
    for a in 0..3 {
        for s in [1.0, -1.0] {
            let mut d = [0.0; 3];
            d[a] = s;
            dirs.push(d);
        }
    }
    dirs
}

/// Removes `A_axis` by the gauge `ψ ↦ e^{iΦ}ψ`, `A ↦ A + ∇Φ` with `Φ = -∫A_axis dx_axis`
/// (zero-mean spectral antiderivative). Returns the new potentials and the phase `e^{iΦ}`.
pub fn gauge_transform(p: &PotentialData, axis: usize) -> Result<(PotentialData, Field)> {
    if axis > 2 {
        return Err(Error::InvalidParameter(format!(
            "axis must be 0, 1 or 2, got {axis}"
        )));
    }
    let grid = p.grid;
    let n = grid.n();
    let comp = &p.a[axis];
    let scale = comp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok((p.clone(), Field::constant(grid, C64::new(1.0, 0.0))));
    }
    let mut v: Vec<C64> = comp.iter().map(|x| C64::new(*x, 0.0)).collect();
    fft::forward(&mut v, n);
    // the inverse transform carries a 1/n^{3/2} factor; a line mean of size μ appears with weight ~ μ·n^{3/2}/n
    let coeff_scale = scale * (grid.len() as f64).sqrt();
    for (idx, c) in v.iter_mut().enumerate() {
        let (i, j, k) = grid.unravel(idx);
        let m = [i, j, k][axis];
        if m == 0 || m == n / 2 {
            if c.norm() > 1e-8 * coeff_scale {
                return Err(Error::InvalidParameter(format!(
                    "A_{axis} has nonzero line-period integral or Nyquist content ({:.3e})",
                    c.norm() / coeff_scale
                )));
            }
            *c = C64::default();
        } else {
            // Φ = -∂^{-1} A
            *c = -*c / C64::new(0.0, grid.freq(m));
        }
    }
    fft::inverse(&mut v, n);
    let phi: Vec<f64> = v.iter().map(|c| c.re).collect();
    let a_new: [Vec<f64>; 3] = std::array::from_fn(|d| {
        if d == axis {
            vec![0.0; grid.len()]
        } else {
            let dphi = real_derivative(&phi, grid, d);
            p.a[d].iter().zip(&dphi).map(|(a, g)| a + g).collect()
        }
    });
    let transformed = PotentialData::from_components(grid, a_new, p.v.clone(), None)?;
    let phase =
        Field::from_values_unchecked(grid, phi.iter().map(|f| C64::from_polar(1.0, *f)).collect());
    Ok((transformed, phase))
}
