//! Free and perturbed resolvents `R₀(ω) = (H₀ - ω)⁻¹`, `R(ω) = (H - ω)⁻¹`, their
//! `ω`-derivatives, the Born splittings, numerical limiting absorption and asymptotic probes.
//!
//! Two realisations of `R₀` are available through [`Backend`]:
//!
//! * `Periodic`: the Fourier multiplier `1/(|ξ|² - ω)` on the periodic box. It is the exact
//!   inverse of the discrete `H₀ - ω` and is used for off-axis solves.
//! * `FreeSpace`: the resolvent of ℝ³ restricted to the box ([`FreeSpaceResolvent`]). The
//!   periodic box has pure point spectrum, so boundary values `λ ± i0` and slow decay in
//!   `|ω|` only make sense for this realisation.
//!
//! Perturbed resolvents in the `FreeSpace` backend are computed from the Lippmann–Schwinger form
//! `(1 + R₀W)ψ = R₀f`.

mod free_space;

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use free_space::FreeSpaceResolvent;

use crate::error::{Error, Result};
use crate::fit;
use crate::krylov::{self, KrylovOptions, SolveReport};
use crate::lattice::{self, Carrier, Field, Grid, WeightedNormSpec, NO_CARRIER};
use crate::operators::OperatorHandle;
use crate::quad;

const I: C64 = C64::new(0.0, 1.0);

/// Which boundary value of the resolvent is requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
    OffAxis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventQuery {
    pub lambda: f64,
    pub eps: f64,
    pub k: u8,
    pub side: Side,
}

impl ResolventQuery {
    pub fn off_axis(omega: C64, k: u8) -> Result<Self> {
        let q = Self {
            lambda: omega.re,
            eps: omega.im,
            k,
            side: Side::OffAxis,
        };
        q.validate()?;
        Ok(q)
    }

    /// The boundary value `λ ± i0`.
    pub fn limit(lambda: f64, side: Side, k: u8) -> Result<Self> {
        let q = Self {
            lambda,
            eps: 0.0,
            k,
            side,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.eps.is_finite()) {
            return Err(Error::NonFinite("resolvent query".into()));
        }
        if self.k > 2 {
            return Err(Error::InvalidParameter(format!(
                "derivative order {} > 2",
                self.k
            )));
        }
        match self.side {
            Side::OffAxis if self.eps == 0.0 && self.lambda >= 0.0 => Err(Error::InvalidParameter(
                format!("omega = {} lies on [0, inf); request a side", self.lambda),
            )),
            Side::Plus | Side::Minus if !(self.lambda > 0.0) => Err(Error::InvalidParameter(
                "boundary values need lambda > 0".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn omega(&self) -> C64 {
        match self.side {
            Side::OffAxis => C64::new(self.lambda, self.eps),
            _ => C64::new(self.lambda, 0.0),
        }
    }

    /// `√ω` on the physical sheet, `Im √ω ≥ 0`.
    pub fn kappa(&self) -> C64 {
        match self.side {
            Side::Plus => C64::new(self.lambda.sqrt(), 0.0),
            Side::Minus => C64::new(-self.lambda.sqrt(), 0.0),
            Side::OffAxis => {
                let s = self.omega().sqrt();
                if s.im < 0.0 {
                    -s
                } else {
                    s
                }
            }
        }
    }

    pub fn with_k(mut self, k: u8) -> Self {
        self.k = k;
        self
    }
}

fn kappa_of(omega: C64, side: Side) -> Result<C64> {
    let q = match side {
        Side::OffAxis => ResolventQuery {
            lambda: omega.re,
            eps: omega.im,
            k: 0,
            side,
        },
        _ => {
            if omega.im != 0.0 {
                return Err(Error::InvalidParameter("a side needs real omega".into()));
            }
            ResolventQuery {
                lambda: omega.re,
                eps: 0.0,
                k: 0,
                side,
            }
        }
    };
    // ω = 0 is admissible for the kernel itself
    if !(side == Side::OffAxis && omega == C64::default()) {
        q.validate()?;
    }
    Ok(q.kappa())
}

/// `exp(iω^{1/2} r)/(4πr)` on the branch `Im ω^{1/2} > 0` (`≥ 0` for the boundary values).
pub fn free_kernel(omega: C64, side: Side, r: f64) -> Result<C64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kernel needs r > 0, got {r}"
        )));
    }
    let kappa = kappa_of(omega, side)?;
    Ok((I * kappa * r).exp() / (4.0 * PI * r))
}

fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `∫_{ℝ³} G_ω(|x - y|) f(|y|) dy` at `|x| = r` for radial `f` supported in `|y| ≤ r_max`,
/// reduced to a one-dimensional integral and evaluated by Gauss–Legendre quadrature on
/// `[0, r]` and `[r, r_max]`.
pub fn kernel_convolution_radial(
    omega: C64,
    side: Side,
    f: &dyn Fn(f64) -> f64,
    r: f64,
    r_max: f64,
) -> Result<C64> {
    let kappa = kappa_of(omega, side)?;
    const DEG: usize = 96;
    let inner = if r > 0.0 {
        quad::integrate(DEG, 0.0, r.min(r_max), |s| {
            (I * kappa * r).exp() * s * s * sinc(kappa * s) * f(s) / r
        })
    } else {
        C64::default()
    };
    let outer = if r < r_max {
        let pieces = ((r_max - r) / 2.0).ceil().max(1.0) as usize;
        let step = (r_max - r) / pieces as f64;
        (0..pieces)
            .map(|p| {
                let a = r + p as f64 * step;
                quad::integrate(DEG, a, a + step, |s| {
                    (I * kappa * s).exp() * s * sinc(kappa * r) * f(s)
                })
            })
            .sum()
    } else {
        C64::default()
    };
    Ok(inner + outer)
}

/// [`kernel_convolution_radial`] on every grid point (radial `f` centred at the origin).
pub fn kernel_convolution_field(
    grid: Grid,
    omega: C64,
    side: Side,
    f: &(dyn Fn(f64) -> f64 + Sync),
    r_max: f64,
) -> Result<Field> {
    let radii: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
        })
        .collect();
    let mut distinct: Vec<u64> = radii.iter().map(|r| r.to_bits()).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let values: Vec<C64> = distinct
        .par_iter()
        .map(|b| kernel_convolution_radial(omega, side, f, f64::from_bits(*b), r_max))
        .collect::<Result<_>>()?;
    let table: HashMap<u64, C64> = distinct.into_iter().zip(values).collect();
    Field::from_values(grid, radii.iter().map(|r| table[&r.to_bits()]).collect())
}

fn factorial(k: u8) -> f64 {
    (1..=k as u32).product::<u32>() as f64
}

/// Periodic multiplier `k!/(|ξ + c|² - ω)^{k+1}`.
pub(crate) fn periodic_free(f: &Field, omega: C64, k: u8, carrier: Carrier) -> Result<Field> {
    let grid = *f.grid();
    if omega.im == 0.0 {
        for idx in 0..grid.len() {
            let xi = grid.wavevector(idx);
            let q2 = (xi[0] + carrier[0]).powi(2)
                + (xi[1] + carrier[1]).powi(2)
                + (xi[2] + carrier[2]).powi(2);
            if q2 == omega.re {
                return Err(Error::SingularMultiplier {
                    re: omega.re,
                    im: omega.im,
                });
            }
        }
    }
    let kf = factorial(k);
    Ok(lattice::apply_multiplier(f, carrier, |q| {
        let d = C64::new(q[0] * q[0] + q[1] * q[1] + q[2] * q[2], 0.0) - omega;
        kf / d.powu(k as u32 + 1)
    }))
}

/// `R₀^{(k)}(ω)f` on the periodic box by the Fourier multiplier.
pub fn free_apply(q: &ResolventQuery, f: &Field) -> Result<Field> {
    q.validate()?;
    if q.side != Side::OffAxis {
        return Err(Error::InvalidParameter(
            "boundary values are not defined on the periodic box; use limiting_absorption".into(),
        ));
    }
    periodic_free(f, q.omega(), q.k, NO_CARRIER)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Periodic,
    FreeSpace,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventOptions {
    pub krylov: KrylovOptions,
    pub backend: Backend,
    /// Plane-wave carrier of the data; fields are stored as envelopes.
    pub carrier: Carrier,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self {
            krylov: KrylovOptions::default(),
            backend: Backend::Periodic,
            carrier: NO_CARRIER,
        }
    }
}

impl ResolventOptions {
    pub fn periodic(tol: f64) -> Self {
        Self {
            krylov: KrylovOptions::with_tol(tol),
            ..Self::default()
        }
    }

    pub fn free_space(tol: f64) -> Self {
        Self {
            krylov: KrylovOptions::with_tol(tol),
            backend: Backend::FreeSpace,
            carrier: NO_CARRIER,
        }
    }

    pub fn with_carrier(mut self, carrier: Carrier) -> Self {
        self.carrier = carrier;
        self
    }
}

/// A perturbed resolvent bound to one operator, backend and source support.
#[derive(Debug)]
pub struct Resolvent<'a> {
    h: &'a OperatorHandle,
    opts: ResolventOptions,
    space: Option<FreeSpaceResolvent>,
}

const SUPPORT_REL: f64 = 1e-15;

impl<'a> Resolvent<'a> {
    /// `sources` are the right-hand sides the resolvent will be applied to; in the `FreeSpace`
    /// backend their support fixes the padding.
    pub fn new(h: &'a OperatorHandle, sources: &[&Field], opts: ResolventOptions) -> Result<Self> {
        for f in sources {
            h.grid().check(f.grid(), "resolvent source")?;
        }
        let space = match opts.backend {
            Backend::Periodic => None,
            Backend::FreeSpace => {
                let mut rho: f64 = 0.0;
                for f in sources {
                    rho = rho.max(f.support_radius(SUPPORT_REL));
                }
                if let Some(p) = h.potential() {
                    if !h.is_free() {
                        rho = rho.max(p.support_radius(SUPPORT_REL));
                    }
                }
                Some(FreeSpaceResolvent::new(
                    *h.grid(),
                    rho + h.grid().h(),
                    opts.carrier,
                )?)
            }
        };
        Ok(Self { h, opts, space })
    }

    pub fn handle(&self) -> &OperatorHandle {
        self.h
    }

    pub fn options(&self) -> &ResolventOptions {
        &self.opts
    }

    pub fn free_space(&self) -> Option<&FreeSpaceResolvent> {
        self.space.as_ref()
    }

    fn check_query(&self, q: &ResolventQuery) -> Result<()> {
        q.validate()?;
        if q.side != Side::OffAxis && self.space.is_none() {
            return Err(Error::InvalidParameter(
                "boundary values need the free-space backend".into(),
            ));
        }
        Ok(())
    }

    /// `R₀^{(k)}` for the query.
    pub fn free(&self, q: &ResolventQuery, k: u8, f: &Field) -> Result<Field> {
        self.check_query(q)?;
        match &self.space {
            Some(s) => s.apply(q.kappa(), k, f),
            None => periodic_free(f, q.omega(), k, self.opts.carrier),
        }
    }

    fn w(&self, f: &Field) -> Option<Field> {
        self.h.apply_w(f, self.opts.carrier)
    }

    fn w_or_zero(&self, f: &Field) -> Field {
        self.w(f).unwrap_or_else(|| Field::zeros(*f.grid()))
    }

    /// `‖(H - ω)ψ - f‖/‖f‖` for the discrete box operator.
    pub fn box_residual(&self, q: &ResolventQuery, psi: &Field, f: &Field) -> f64 {
        let mut r = self.h.apply_carrier(psi, self.opts.carrier);
        r.axpy(-q.omega(), psi);
        let fnorm = f.norm();
        if fnorm == 0.0 {
            return r.norm();
        }
        (&r - f).norm() / fnorm
    }

    /// `R(ω)f` by a Krylov solve of `(H - ω)ψ = f` preconditioned with the periodic `R₀(ω)`.
    pub fn direct(&self, q: &ResolventQuery, f: &Field) -> Result<(Field, SolveReport)> {
        q.validate()?;
        if q.side != Side::OffAxis || self.space.is_some() {
            return Err(Error::InvalidParameter(
                "the direct route solves the periodic box operator off the axis".into(),
            ));
        }
        let omega = q.omega();
        let carrier = self.opts.carrier;
        if self.h.is_free() {
            let psi = periodic_free(f, omega, 0, carrier)?;
            let residual = self.box_residual(q, &psi, f);
            return Ok((
                psi,
                SolveReport {
                    iterations: 0,
                    residual,
                    extrapolation_steps: 0,
                    converged: true,
                },
            ));
        }
        let a = |x: &Field| {
            let mut y = self.h.apply_carrier(x, carrier);
            y.axpy(-omega, x);
            y
        };
        let m = |x: &Field| periodic_free(x, omega, 0, carrier).expect("checked off-axis");
        let (psi, mut rep) = krylov::bicgstab(&a, &m, f, None, self.opts.krylov);
        if !rep.converged {
            let (psi2, rep2) = krylov::gmres(&a, &m, f, Some(psi), self.opts.krylov);
            rep.iterations += rep2.iterations;
            rep.residual = rep2.residual;
            rep.converged = rep2.converged;
            return Ok((psi2, rep));
        }
        Ok((psi, rep))
    }

    /// Born splitting: `Left` solves `(1 + R₀W)ψ = R₀f`, `Right` solves `(1 + WR₀)g = f`, `ψ = R₀g`.
    pub fn born(
        &self,
        q: &ResolventQuery,
        f: &Field,
        variant: BornVariant,
    ) -> Result<(Field, SolveReport)> {
        self.check_query(q)?;
        if self.h.is_free() {
            let psi = self.free(q, 0, f)?;
            let residual = if self.space.is_none() {
                self.box_residual(q, &psi, f)
            } else {
                0.0
            };
            return Ok((
                psi,
                SolveReport {
                    iterations: 0,
                    residual,
                    extrapolation_steps: 0,
                    converged: true,
                },
            ));
        }
        let r0 = |x: &Field| self.free(q, 0, x).expect("query validated");
        let id = |x: &Field| x.clone();
        let mut opts = self.opts.krylov;
        let mut total = 0;
        let mut guess: Option<Field> = None;
        let mut out;
        loop {
            let (psi, rep) = match variant {
                BornVariant::Left => {
                    let a = |x: &Field| {
                        let mut y = r0(&self.w_or_zero(x));
                        y.axpy(C64::new(1.0, 0.0), x);
                        y
                    };
                    krylov::gmres(&a, &id, &r0(f), guess.take(), opts)
                }
                BornVariant::Right => {
                    let a = |g: &Field| {
                        let mut y = self.w_or_zero(&r0(g));
                        y.axpy(C64::new(1.0, 0.0), g);
                        y
                    };
                    let (g, rep) =
                        krylov::gmres(&a, &id, f, guess.take().map(|p| self.h_minus(q, &p)), opts);
                    (r0(&g), rep)
                }
            };
            total += rep.iterations;
            out = (psi, rep);
            if self.space.is_some() || q.side != Side::OffAxis {
                break;
            }
            // the Fredholm residual understates the box residual by up to ‖H₀ - ω‖
            let true_res = self.box_residual(q, &out.0, f);
            out.1.residual = true_res;
            out.1.converged = true_res <= self.opts.krylov.tol;
            if out.1.converged || opts.tol < 1e-15 || total >= self.opts.krylov.max_iter {
                break;
            }
            opts.tol = (opts.tol * 0.5 * self.opts.krylov.tol / true_res).max(1e-16);
            guess = Some(out.0.clone());
        }
        out.1.iterations = total;
        Ok(out)
    }

    fn h_minus(&self, q: &ResolventQuery, psi: &Field) -> Field {
        let mut y = self.h.apply_carrier(psi, self.opts.carrier);
        y.axpy(-q.omega(), psi);
        y
    }

    /// `R(ω)f` by the backend's natural route (direct on the periodic box, left Born otherwise).
    pub fn apply(&self, q: &ResolventQuery, f: &Field) -> Result<(Field, SolveReport)> {
        if self.space.is_none() && q.side == Side::OffAxis {
            self.direct(q, f)
        } else {
            self.born(q, f, BornVariant::Left)
        }
    }

    fn apply_checked(&self, q: &ResolventQuery, f: &Field) -> Result<Field> {
        let (psi, rep) = self.apply(q, f)?;
        if !rep.converged {
            return Err(Error::NotConverged(format!(
                "resolvent at omega = {} (residual {:.3e} after {} iterations)",
                q.omega(),
                rep.residual,
                rep.iterations
            )));
        }
        Ok(psi)
    }

    /// `R^{(k)}(ω)f`, `k ∈ {1, 2}`.
    pub fn derivative(
        &self,
        q: &ResolventQuery,
        f: &Field,
        route: DerivativeRoute,
    ) -> Result<Field> {
        self.check_query(q)?;
        let q0 = q.with_k(0);
        match (q.k, route) {
            (0, _) => self.apply_checked(&q0, f),
            (_, DerivativeRoute::Power) => {
                if self.space.is_some() {
                    return Err(Error::InvalidParameter(
                        "powers of R need the whole space; use the identity route".into(),
                    ));
                }
                let mut u = self.apply_checked(&q0, f)?;
                for _ in 0..q.k {
                    u = self.apply_checked(&q0, &u)?;
                }
                Ok(&u * factorial(q.k))
            }
            (1, DerivativeRoute::Identity) => {
                // R' = (1 - RW) R₀' (1 - WR)
                if self.h.is_free() {
                    return self.free(&q0, 1, f);
                }
                let a = self.apply_checked(&q0, f)?;
                let g = f - &self.w_or_zero(&a);
                let b = self.free(&q0, 1, &g)?;
                let c = self.apply_checked(&q0, &self.w_or_zero(&b))?;
                Ok(&b - &c)
            }
            (_, DerivativeRoute::Identity) => {
                // R'' = (1 - RW) R₀'' (1 - WR) - 2 R' W R₀' (1 - WR)
                if self.h.is_free() {
                    return self.free(&q0, 2, f);
                }
                let a = self.apply_checked(&q0, f)?;
                let g = f - &self.w_or_zero(&a);
                let b = self.free(&q0, 2, &g)?;
                let first = &b - &self.apply_checked(&q0, &self.w_or_zero(&b))?;
                let c = self.free(&q0, 1, &g)?;
                let d = self.derivative(
                    &q0.with_k(1),
                    &self.w_or_zero(&c),
                    DerivativeRoute::Identity,
                )?;
                Ok(&first - &(&d * 2.0))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BornVariant {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeRoute {
    /// `R' = R²`, `R'' = 2R³`.
    Power,
    /// Factorisation through `R₀'` and `R₀''`.
    Identity,
}

/// `R(ω)f` by the direct route on the periodic box; `W = 0` reduces to [`free_apply`].
pub fn perturbed_direct(
    h: &OperatorHandle,
    q: &ResolventQuery,
    f: &Field,
    tol: f64,
) -> Result<(Field, SolveReport)> {
    Resolvent::new(h, &[f], ResolventOptions::periodic(tol))?.direct(q, f)
}

/// `R(ω)f` through a Born splitting with the given options.
pub fn perturbed_born(
    h: &OperatorHandle,
    q: &ResolventQuery,
    f: &Field,
    opts: ResolventOptions,
    variant: BornVariant,
) -> Result<(Field, SolveReport)> {
    Resolvent::new(h, &[f], opts)?.born(q, f, variant)
}

/// `R^{(k)}(ω)f` by the requested route.
pub fn resolvent_derivative(
    h: &OperatorHandle,
    q: &ResolventQuery,
    f: &Field,
    opts: ResolventOptions,
    route: DerivativeRoute,
) -> Result<Field> {
    Resolvent::new(h, &[f], opts)?.derivative(q, f, route)
}

/// Geometric sequence `ε_j = ε₀ 2^{-j}` with a stopping tolerance in `L²_{-σ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub max_steps: usize,
    pub tol: f64,
    pub sigma: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            eps0: 0.5,
            max_steps: 30,
            tol: 1e-6,
            sigma: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub solve: SolveReport,
    /// Relative `L²_{-σ}` differences of successive extrapolants.
    pub differences: Vec<f64>,
    /// Ratios of successive differences.
    pub ratios: Vec<f64>,
    pub eps_last: f64,
}

/// `R(λ ± i0)f` by `ε`-halving with one-step Richardson extrapolation `2ψ(ε/2) - ψ(ε)`.
pub fn limiting_absorption(
    h: &OperatorHandle,
    lambda: f64,
    side: Side,
    f: &Field,
    schedule: EpsSchedule,
    opts: ResolventOptions,
) -> Result<(Field, LimitReport)> {
    let res = Resolvent::new(h, &[f], opts)?;
    limiting_absorption_with(&res, lambda, side, f, schedule)
}

pub fn limiting_absorption_with(
    res: &Resolvent<'_>,
    lambda: f64,
    side: Side,
    f: &Field,
    schedule: EpsSchedule,
) -> Result<(Field, LimitReport)> {
    if side == Side::OffAxis {
        return Err(Error::InvalidParameter(
            "limiting absorption needs side plus or minus".into(),
        ));
    }
    ResolventQuery::limit(lambda, side, 0)?;
    if !(schedule.eps0 > 0.0 && schedule.tol > 0.0) || schedule.max_steps < 3 {
        return Err(Error::InvalidParameter(
            "schedule needs eps0 > 0, tol > 0, max_steps >= 3".into(),
        ));
    }
    let sign = if side == Side::Plus { 1.0 } else { -1.0 };
    let spec = WeightedNormSpec::l2(-schedule.sigma);
    let norm = |u: &Field| lattice::weighted_norm(u, spec);
    let iterations = std::cell::Cell::new(0);
    let solve = |eps: f64| -> Result<Field> {
        let q = ResolventQuery::off_axis(C64::new(lambda, sign * eps), 0)?;
        let (psi, rep) = res.apply(&q, f)?;
        iterations.set(iterations.get() + rep.iterations);
        if !rep.converged {
            return Err(Error::NotConverged(format!("resolvent at eps = {eps:.3e}")));
        }
        Ok(psi)
    };
    let mut eps = schedule.eps0;
    let mut prev = solve(eps)?;
    let mut prev_x: Option<Field> = None;
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    for step in 1..=schedule.max_steps {
        eps *= 0.5;
        let cur = solve(eps)?;
        let x = &(&cur * 2.0) - &prev;
        if let Some(px) = &prev_x {
            let d = norm(&(&x - px)) / norm(&x).max(f64::MIN_POSITIVE);
            if let Some(last) = differences.last() {
                let ratio = d / last;
                ratios.push(ratio);
                if d > schedule.tol
                    && ratios.len() >= 2
                    && ratios.iter().rev().take(2).all(|r| *r >= 0.9)
                {
                    return Err(Error::Divergent { lambda, ratio });
                }
            }
            differences.push(d);
            if d <= schedule.tol {
                let solve = SolveReport {
                    iterations: iterations.get(),
                    residual: d,
                    extrapolation_steps: step,
                    converged: true,
                };
                return Ok((
                    x,
                    LimitReport {
                        solve,
                        differences,
                        ratios,
                        eps_last: eps,
                    },
                ));
            }
        }
        prev_x = Some(x);
        prev = cur;
    }
    let last = differences.last().copied().unwrap_or(f64::INFINITY);
    let solve = SolveReport {
        iterations: iterations.get(),
        residual: last,
        extrapolation_steps: schedule.max_steps,
        converged: false,
    };
    Ok((
        prev_x.expect("at least one extrapolant"),
        LimitReport {
            solve,
            differences,
            ratios,
            eps_last: eps,
        },
    ))
}

/// Regime of [`asymptotic_probe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Low,
    High,
}

/// Probe vectors for [`asymptotic_probe`].
#[derive(Clone, Debug)]
pub enum Probe {
    Fixed(Field),
    /// `exp(i√(Re ω) d·x)·envelope`, travelling along the unit vector `d` at the energy probed.
    Modulated {
        envelope: Field,
        direction: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub slope: f64,
    pub slope_se: f64,
    pub abs_omega: Vec<f64>,
    /// `‖R^{(k)}(ω)f‖_{H^l_{-σ}} / ‖f‖_{L²_σ}`
    pub ratios: Vec<f64>,
}

/// Fits `log ‖R^{(k)}(ω)f‖_{H^l_{-σ}}/‖f‖_{L²_σ}` against `log |ω|`.
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_probe(
    h: &OperatorHandle,
    regime: Regime,
    k: u8,
    l: u8,
    sigma: f64,
    probe: &Probe,
    omegas: &[C64],
    opts: ResolventOptions,
) -> Result<ProbeResult> {
    if omegas.len() < 4 {
        return Err(Error::Insufficient(format!(
            "need at least 4 omega samples, got {}",
            omegas.len()
        )));
    }
    let mags: Vec<f64> = omegas.iter().map(|w| w.norm()).collect();
    let span = mags.iter().copied().fold(0.0, f64::max)
        / mags.iter().copied().fold(f64::INFINITY, f64::min);
    if !(span >= 10.0) {
        return Err(Error::Insufficient(
            "omega samples must span at least one decade".into(),
        ));
    }
    if l > 1 {
        return Err(Error::InvalidParameter(
            "only l = 0 and l = 1 are supported".into(),
        ));
    }
    match regime {
        Regime::High if mags.iter().any(|m| *m < 1.0) => {
            return Err(Error::InvalidParameter(
                "high regime expects |omega| >= 1".into(),
            ))
        }
        Regime::Low if mags.iter().any(|m| *m > 1.0) => {
            return Err(Error::InvalidParameter(
                "low regime expects |omega| <= 1".into(),
            ))
        }
        _ => {}
    }
    let route = match opts.backend {
        Backend::Periodic => DerivativeRoute::Power,
        Backend::FreeSpace => DerivativeRoute::Identity,
    };
    let ratios: Vec<f64> = omegas
        .par_iter()
        .map(|&w| {
            let q = ResolventQuery::off_axis(w, k)?;
            let (f, carrier) = match probe {
                Probe::Fixed(f) => (f, opts.carrier),
                Probe::Modulated {
                    envelope,
                    direction,
                } => {
                    let s = w.re.max(0.0).sqrt();
                    (
                        envelope,
                        [s * direction[0], s * direction[1], s * direction[2]],
                    )
                }
            };
            let res = Resolvent::new(h, &[f], opts.with_carrier(carrier))?;
            let u = res.derivative(&q, f, route)?;
            let num = lattice::weighted_norm_with_carrier(
                &u,
                WeightedNormSpec {
                    sigma: -sigma,
                    s: l as f64,
                },
                carrier,
            );
            let den = lattice::weighted_norm(f, WeightedNormSpec::l2(sigma));
            Ok(num / den)
        })
        .collect::<Result<_>>()?;
    let fit = fit::log_log(&mags, &ratios)?;
    Ok(ProbeResult {
        slope: fit.slope,
        slope_se: fit.slope_se,
        abs_omega: mags,
        ratios,
    })
}

#[cfg(test)]
mod tests;
