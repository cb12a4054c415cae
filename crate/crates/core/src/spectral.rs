//! Discrete spectrum, the continuous-subspace projection, the zero-energy regularity check
//! `ker(1 + R₀(0)W) = 0` and a scan for eigenvalues embedded in `(0, ∞)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::krylov::{self, KrylovOptions};
use crate::lattice::{self, Field, Grid, WeightedNormSpec, NO_CARRIER};
use crate::operators::{OperatorHandle, OperatorKind};
use crate::potentials::PotentialData;
use crate::resolvent::{periodic_free, FreeSpaceResolvent};
use crate::rng;

/// Eigenvalues above `-TAU_DISC` are treated as part of the continuum.
pub const TAU_DISC: f64 = 1e-6;
/// `σ_min` below this marks a zero eigenvalue or resonance.
pub const TAU_RES: f64 = 1e-3;

const RESIDUAL_REL: f64 = 1e-10;
const CERTIFY_REL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralData {
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenfields: Vec<Field>,
    pub residuals: Vec<f64>,
    pub n_discrete: usize,
    /// Eigenfields with more than `1e-4` of their mass outside the inner half-box; their
    /// eigenvalues still depend on the box at the working tolerance.
    pub box_artifact_flags: Vec<bool>,
}

impl SpectralData {
    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            eigenvalues: Vec::new(),
            eigenfields: Vec::new(),
            residuals: Vec::new(),
            n_discrete: 0,
            box_artifact_flags: Vec::new(),
        }
    }
}

fn outer_mass(f: &Field) -> f64 {
    let g = f.grid();
    let half = 0.5 * g.l();
    let total: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
    let outer: f64 = f
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.position(*i).iter().any(|c| c.abs() > half))
        .map(|(_, v)| v.norm_sqr())
        .sum();
    outer / total
}

fn orthonormalize(vs: &mut Vec<Field>) {
    let mut out: Vec<Field> = Vec::with_capacity(vs.len());
    for v in vs.drain(..) {
        let mut w = v;
        for _ in 0..2 {
            for u in &out {
                let c = u.inner(&w);
                w.axpy(-c, u);
            }
        }
        let n = w.norm();
        if n > 1e-12 {
            out.push(w.scaled(C64::new(1.0 / n, 0.0)));
        }
    }
    *vs = out;
}

fn start_block(grid: Grid, m: usize, seed: u64) -> Vec<Field> {
    let mut r = rng::seeded(seed);
    let w = grid.l() / 3.0;
    (0..m)
        .map(|_| {
            let c: [f64; 4] = [
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
            ];
            Field::from_real_fn(grid, |x| {
                let g = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp();
                // the noise keeps the block from sitting in a four-dimensional symmetry class
                g * (c[0] + (c[1] * x[0] + c[2] * x[1] + c[3] * x[2]) / w)
                    + 0.3 * r.random_range(-1.0..1.0)
            })
        })
        .collect()
}

/// Eigenpairs of `H` below `-TAU_DISC` by shift-invert subspace iteration with Rayleigh–Ritz.
///
/// The shift starts below `min V`, where `H - s` is positive definite. Converged pairs at the
/// bottom of the block are locked and deflated, and the shift moves up behind them, which keeps
/// the convergence of shallow states fast. Inner solves are preconditioned conjugate gradients
/// with the free multiplier at the shift.
pub fn discrete_spectrum(h: &OperatorHandle, count_hint: usize) -> Result<SpectralData> {
    let grid = *h.grid();
    let p = match h.potential() {
        Some(p) if !h.is_free() => p,
        _ => return Ok(SpectralData::empty(grid)),
    };
    let min_v = if h.kind() == OperatorKind::Full {
        p.min_v().min(0.0)
    } else {
        0.0
    };
    if min_v >= 0.0 {
        // H = H_A + V with V ≥ 0 is non-negative
        return Ok(SpectralData::empty(grid));
    }
    let opts = KrylovOptions {
        tol: 1e-13,
        max_iter: 2000,
        restart: 60,
    };
    let m = count_hint.max(1) + 3;
    let mut shift = min_v - 1.0;
    let mut locked: Vec<Field> = Vec::new();
    let mut locked_values: Vec<f64> = Vec::new();
    let mut locked_residuals: Vec<f64> = Vec::new();
    let mut refills = 0u64;
    let mut block = start_block(grid, m, 0x5eed);
    const MAX_SWEEPS: usize = 600;
    for _ in 0..MAX_SWEEPS {
        let deflate = |x: &Field| {
            let mut y = x.clone();
            for _ in 0..2 {
                for u in &locked {
                    let c = u.inner(&y);
                    y.axpy(-c, u);
                }
            }
            y
        };
        // (1 - P)(H - s)(1 - P) + P, positive definite once s is below the unlocked spectrum
        let hs = |x: &Field| {
            let xd = deflate(x);
            let mut y = h.apply_carrier(&xd, NO_CARRIER);
            y.axpy(C64::new(-shift, 0.0), &xd);
            let mut y = deflate(&y);
            y.axpy(C64::new(1.0, 0.0), &(x - &xd));
            y
        };
        let pre = |x: &Field| {
            periodic_free(x, C64::new(shift, 0.0), 0, NO_CARRIER).expect("shift below spectrum")
        };
        let mut next: Vec<Field> = Vec::with_capacity(block.len());
        for x in &block {
            let x = deflate(x);
            let (y, rep) = krylov::pcg(&hs, &pre, &x, Some(x.clone()), opts);
            if !rep.converged && rep.residual > 1e-10 {
                return Err(Error::NotConverged(format!(
                    "shift-invert solve: residual {:.2e}",
                    rep.residual
                )));
            }
            next.push(deflate(&y));
        }
        orthonormalize(&mut next);
        let hy: Vec<Field> = next
            .iter()
            .map(|y| h.apply_carrier(y, NO_CARRIER))
            .collect();
        let k = next.len();
        let gram = DMatrix::from_fn(k, k, |i, j| next[i].inner(&hy[j]));
        let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let mut ritz = Vec::with_capacity(k);
        let mut values = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for &c in &order {
            let mut x = Field::zeros(grid);
            let mut hx = Field::zeros(grid);
            for i in 0..k {
                let a = eig.eigenvectors[(i, c)];
                x.axpy(a, &next[i]);
                hx.axpy(a, &hy[i]);
            }
            let theta = eig.eigenvalues[c];
            hx.axpy(C64::new(-theta, 0.0), &x);
            values.push(theta);
            residuals.push(hx.norm());
            ritz.push(x);
        }
        let converged = |j: usize| residuals[j] <= RESIDUAL_REL * values[j].abs().max(1.0);
        let mut lock = 0;
        while lock < k && values[lock] < -TAU_DISC && converged(lock) {
            lock += 1;
        }
        // the lowest Ritz pair left out must itself have converged, and sit above the cut by
        // more than its residual
        if lock < k
            && residuals[lock] <= CERTIFY_REL * values[lock].abs().max(1.0)
            && values[lock] - residuals[lock] >= -TAU_DISC
        {
            locked.extend(ritz.drain(..lock));
            locked_values.extend_from_slice(&values[..lock]);
            locked_residuals.extend_from_slice(&residuals[..lock]);
            let box_artifact_flags = locked.iter().map(|f| outer_mass(f) > 1e-4).collect();
            return Ok(SpectralData {
                grid,
                eigenvalues: locked_values,
                residuals: locked_residuals,
                n_discrete: locked.len(),
                eigenfields: locked,
                box_artifact_flags,
            });
        }
        if lock > 0 {
            locked.extend(ritz.drain(..lock));
            locked_values.extend_from_slice(&values[..lock]);
            locked_residuals.extend_from_slice(&residuals[..lock]);
            let top = values[lock - 1];
            shift = top - (0.1 * top.abs()).max(0.05);
            refills += 1;
            ritz.extend(start_block(grid, m - ritz.len().min(m), 0x5eed + refills));
        }
        block = ritz;
    }
    Err(Error::NotConverged(format!(
        "discrete spectrum after {MAX_SWEEPS} sweeps"
    )))
}

/// `P_c ψ = ψ - Σ_j ⟨φ_j, ψ⟩ φ_j`.
pub fn project_continuous(sd: &SpectralData, psi: &Field) -> Result<Field> {
    sd.grid.check(psi.grid(), "project_continuous")?;
    let mut out = psi.clone();
    for _ in 0..2 {
        for phi in &sd.eigenfields {
            let c = phi.inner(&out);
            out.axpy(-c, phi);
        }
    }
    Ok(out)
}

/// Whether a near-null vector of `1 + R₀(0)W` looks like an `L²` eigenfunction or a resonance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullKind {
    None,
    Eigenvalue,
    Resonance,
    /// The grids did not enlarge the box, so the two cases cannot be told apart.
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConditionReport {
    pub sigma: f64,
    /// Smallest singular value on the finest grid.
    pub sigma_min: f64,
    pub refinement_trend: Vec<f64>,
    /// `‖ψ‖_{L²}/‖ψ‖_{L²_{-1}}` of the near-null vector on each grid.
    pub null_ratios: Vec<f64>,
    pub regular: bool,
    pub null_kind: NullKind,
    pub tau_res: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub tau_res: f64,
    /// Relative Ritz residual for `σ_min²`.
    pub tol: f64,
    pub max_dim: usize,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            tau_res: TAU_RES,
            tol: 1e-10,
            max_dim: 300,
        }
    }
}

fn resample(p: &PotentialData, grid: Grid) -> Result<PotentialData> {
    if p.grid().same_as(&grid) {
        return Ok(p.clone());
    }
    match p.analytic() {
        Some(an) => PotentialData::from_analytic(grid, an.clone()),
        None => Err(Error::InvalidParameter(
            "resampling onto other grids needs an analytic potential".into(),
        )),
    }
}

/// `T = ρ(1 + R₀(0)W)ρ⁻¹` with `ρ = ⟨x⟩^{-σ}`, its adjoint, and the scalars needed to map
/// singular vectors back.
struct ZeroEnergyMap {
    h: OperatorHandle,
    r0: FreeSpaceResolvent,
    rho: Vec<f64>,
    rho_inv: Vec<f64>,
}

impl ZeroEnergyMap {
    fn new(p: PotentialData, sigma: f64) -> Result<Self> {
        let grid = *p.grid();
        let r0 = FreeSpaceResolvent::new(grid, 3f64.sqrt() * grid.l(), NO_CARRIER)?;
        let rho = lattice::spatial_weight(&grid, -sigma);
        let rho_inv = lattice::spatial_weight(&grid, sigma);
        Ok(Self {
            h: OperatorHandle::full(p),
            r0,
            rho,
            rho_inv,
        })
    }

    fn k(&self, x: &Field) -> Field {
        match self.h.apply_w(x, NO_CARRIER) {
            Some(w) => self.r0.apply(C64::default(), 0, &w).expect("grid checked"),
            None => Field::zeros(*x.grid()),
        }
    }

    fn k_adj(&self, x: &Field) -> Field {
        let r = self.r0.apply(C64::default(), 0, x).expect("grid checked");
        self.h
            .apply_w(&r, NO_CARRIER)
            .unwrap_or_else(|| Field::zeros(*x.grid()))
    }

    fn t(&self, x: &Field) -> Field {
        let mut y = self.k(&x.mul_real(&self.rho_inv)).mul_real(&self.rho);
        y.axpy(C64::new(1.0, 0.0), x);
        y
    }

    fn t_adj(&self, x: &Field) -> Field {
        let mut y = self.k_adj(&x.mul_real(&self.rho)).mul_real(&self.rho_inv);
        y.axpy(C64::new(1.0, 0.0), x);
        y
    }
}

fn probe_vector(grid: Grid) -> Field {
    let mut r = rng::seeded(0xc0de);
    let w = grid.l() / 4.0;
    Field::from_fn(grid, |x| {
        let g = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp();
        C64::new(
            g * (1.0 + 0.1 * r.random_range(-1.0..1.0)),
            0.1 * g * r.random_range(-1.0..1.0),
        )
    })
}

/// `(σ_min, ‖ψ‖_{L²}/‖ψ‖_{L²_{-1}})` on one grid, where `ψ = ρ⁻¹v` for the right singular
/// vector `v`.
fn smallest_singular(p: PotentialData, sigma: f64, opts: &ConditionOptions) -> Result<(f64, f64)> {
    let grid = *p.grid();
    let map = ZeroEnergyMap::new(p, sigma)?;
    let tt = |x: &Field| map.t_adj(&map.t(x));
    let (theta, v, res) =
        krylov::lanczos_smallest(&tt, &probe_vector(grid), opts.max_dim, opts.tol);
    if !(res <= 1e3 * opts.tol * theta.abs().max(1.0)) {
        return Err(Error::NotConverged(format!(
            "smallest singular value: Ritz residual {res:.2e}"
        )));
    }
    let psi = v.mul_real(&map.rho_inv);
    let ratio = psi.norm() / lattice::weighted_norm(&psi, WeightedNormSpec::l2(-1.0));
    Ok((theta.max(0.0).sqrt(), ratio))
}

/// Checks `ker(1 + R₀(0)W) = 0` in `L²_{-σ}` by the smallest singular value of the weighted map
/// on successively finer or larger grids.
pub fn spectral_condition_check(
    p: &PotentialData,
    sigma: f64,
    grids: &[Grid],
) -> Result<SpectralConditionReport> {
    spectral_condition_check_with(p, sigma, grids, ConditionOptions::default())
}

pub fn spectral_condition_check_with(
    p: &PotentialData,
    sigma: f64,
    grids: &[Grid],
    opts: ConditionOptions,
) -> Result<SpectralConditionReport> {
    if !(sigma > 0.5 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must exceed 1/2, got {sigma}"
        )));
    }
    if grids.len() < 2 {
        return Err(Error::InvalidParameter("need at least two grids".into()));
    }
    for w in grids.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.n() < a.n() || b.l() < a.l() || (b.n() == a.n() && b.l() == a.l()) {
            return Err(Error::InvalidParameter(
                "grids must increase in n or l".into(),
            ));
        }
    }
    if p.is_zero() {
        let k = grids.len();
        return Ok(SpectralConditionReport {
            sigma,
            sigma_min: 1.0,
            refinement_trend: vec![1.0; k],
            null_ratios: vec![f64::NAN; k],
            regular: true,
            null_kind: NullKind::None,
            tau_res: opts.tau_res,
        });
    }
    let mut trend = Vec::with_capacity(grids.len());
    let mut ratios = Vec::with_capacity(grids.len());
    for g in grids {
        let (s, r) = smallest_singular(resample(p, *g)?, sigma, &opts)?;
        trend.push(s);
        ratios.push(r);
    }
    let k = trend.len();
    let sigma_min = trend[k - 1];
    let regular = sigma_min > opts.tau_res && trend[k - 1] >= 0.8 * trend[k - 2];
    let null_kind = if regular {
        NullKind::None
    } else {
        classify_null(grids, &ratios)
    };
    Ok(SpectralConditionReport {
        sigma,
        sigma_min,
        refinement_trend: trend,
        null_ratios: ratios,
        regular,
        null_kind,
        tau_res: opts.tau_res,
    })
}

/// An `L²` eigenfunction keeps `‖ψ‖/‖ψ‖_{L²_{-1}}` bounded as the box grows; a resonance
/// `ψ ~ 1/|x|` makes it grow like `l^{1/2}`.
pub fn classify_null(grids: &[Grid], ratios: &[f64]) -> NullKind {
    let first = grids.first().map(|g| g.l()).unwrap_or(0.0);
    let last = grids.last().map(|g| g.l()).unwrap_or(0.0);
    if grids.len() < 2 || last < 1.5 * first {
        return NullKind::Undetermined;
    }
    let growth = ratios[ratios.len() - 1] / ratios[0];
    let expected = (last / first).sqrt();
    if growth > 0.5 * (1.0 + expected) {
        NullKind::Resonance
    } else {
        NullKind::Eigenvalue
    }
}

/// `1 + min Re μ` over the eigenvalues `μ` of `R₀(0)W`; it changes sign when the first bound
/// state emerges from zero energy.
pub fn threshold_indicator(p: &PotentialData) -> Result<f64> {
    if p.is_zero() {
        return Ok(1.0);
    }
    let map = ZeroEnergyMap::new(p.clone(), 1.0)?;
    let k = |x: &Field| map.k(x);
    let ritz = krylov::arnoldi_ritz(&k, &probe_vector(*p.grid()), 40);
    ritz.iter()
        .map(|mu| 1.0 + mu.re)
        .min_by(|a, b| a.total_cmp(b))
        .ok_or_else(|| Error::NotConverged("Arnoldi produced no Ritz values".into()))
}

/// Brackets the coupling where [`threshold_indicator`] changes sign by bisection.
pub fn critical_coupling(
    family: &dyn Fn(f64) -> Result<PotentialData>,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let mut a = lo;
    let mut b = hi;
    let fa = threshold_indicator(&family(a)?)?;
    let fb = threshold_indicator(&family(b)?)?;
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidParameter(format!(
            "no sign change of the threshold indicator on [{lo}, {hi}] ({fa:.3e}, {fb:.3e})"
        )));
    }
    while (b - a) > rel_tol * b.abs().max(a.abs()) {
        let c = 0.5 * (a + b);
        let fc = threshold_indicator(&family(c)?)?;
        if fc.signum() == fa.signum() {
            a = c;
        } else {
            b = c;
        }
    }
    Ok((a, b))
}

/// A dense eigenpair in the scan window and its behaviour on the doubled box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub lambda: f64,
    /// Fraction of the mass inside the inner half-box.
    pub localization: f64,
    /// `|θ' - λ|` for the Rayleigh quotient on the doubled box (`NaN` when not retested).
    pub shift: f64,
    pub residual: f64,
    pub persistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedScan {
    pub window: (f64, f64),
    pub candidates: Vec<Candidate>,
}

impl EmbeddedScan {
    pub fn findings(&self) -> Vec<&Candidate> {
        self.candidates.iter().filter(|c| c.persistent).collect()
    }
}

/// A candidate persists when it is localized and neither its eigenvalue nor its residual moves
/// by more than ten times the residual tolerance on the doubled box.
pub fn classify_candidate(localization: f64, shift: f64, residual: f64, tol: f64) -> bool {
    localization > 0.8 && shift <= 10.0 * tol && residual <= 10.0 * tol
}

fn embed(f: &Field, big: Grid) -> Result<Field> {
    let g = f.grid();
    let o = (big.n() - g.n()) / 2;
    let mut out = Field::zeros(big);
    let n = g.n();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.values_mut()[big.index(i + o, j + o, k + o)] = f.values()[g.index(i, j, k)];
            }
        }
    }
    Ok(out)
}

/// Eigenvalues of the discrete `H` in `window ⊂ (0, ∞)` and their persistence on a box of
/// twice the length at the same spacing. Uses the dense eigensolver, so the grid is limited to
/// [`dense::MAX_DENSE`] points.
pub fn embedded_eigenvalue_scan(h: &OperatorHandle, window: (f64, f64)) -> Result<EmbeddedScan> {
    let (a, b) = window;
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "window ({a}, {b}) must lie in (0, inf)"
        )));
    }
    let grid = *h.grid();
    let eig = dense::eigen(h)?;
    let big = grid.enlarged(2)?;
    let big_h = match h.potential() {
        Some(p) => OperatorHandle::new(h.kind(), big, Some(resample(p, big)?))?,
        None => OperatorHandle::free(big),
    };
    let mut candidates = Vec::new();
    for (j, &lambda) in eig.values.iter().enumerate() {
        if lambda <= a || lambda >= b {
            continue;
        }
        let v = eig.vector(j)?;
        let localization = 1.0 - outer_mass(&v);
        let tol = 1e-8 * lambda.max(1.0);
        let (shift, residual) = if localization > 0.8 {
            let w = embed(&v, big)?;
            let hw = big_h.apply(&w)?;
            let theta = w.inner(&hw).re / w.inner(&w).re;
            let mut r = hw;
            r.axpy(C64::new(-theta, 0.0), &w);
            ((theta - lambda).abs(), r.norm() / w.norm())
        } else {
            (f64::NAN, f64::NAN)
        };
        let persistent = classify_candidate(localization, shift, residual, tol);
        candidates.push(Candidate {
            lambda,
            localization,
            shift,
            residual,
            persistent,
        });
    }
    Ok(EmbeddedScan { window, candidates })
}
