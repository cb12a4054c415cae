//! Run configuration, the subcommand pipelines and their on-disk outputs.
//!
//! Every run writes its data files (CSV series, JSON summaries, MSF1 field snapshots) in a
//! fixed order, then `manifest.json` listing each file with its SHA-256. Data files depend only
//! on the configuration, the seed and the crate version; the manifest additionally records
//! wall-clock times.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decay::{self, DecayReport, Route};
use crate::error::{Error, Result};
use crate::lattice::{self, snapshot, Field, Grid, WeightedNormSpec};
use crate::operators::{hardy_check, OperatorHandle};
use crate::potentials::{validate_decay, PotentialData, PotentialSpec};
use crate::propagator::{
    evolve_direct_series, evolve_free, evolve_free_open, ContourEvolution, DirectMethod,
    PartitionOfUnity, QuadratureSpec,
};
use crate::resolvent::{
    asymptotic_probe, limiting_absorption_with, Backend, BornVariant, DerivativeRoute, EpsSchedule,
    Probe, Regime, Resolvent, ResolventOptions, ResolventQuery, Side,
};
use crate::rng;
use crate::spectral::{
    discrete_spectrum, embedded_eigenvalue_scan, spectral_condition_check_with, ConditionOptions,
    EmbeddedScan, SpectralConditionReport, SpectralData,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Default output directory when `--out` is absent.
pub const OUT_ENV: &str = "MAGDECAY_OUT";
pub const MANIFEST: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERDICT: i32 = 4;

// ---------------------------------------------------------------------------------------------
// configuration

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub l: f64,
}

impl GridConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.l).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Krylov tolerance for resolvents off the real axis.
    pub tol_offaxis: f64,
    /// Stopping tolerance of the limiting-absorption extrapolation.
    pub tol_limit: f64,
    pub eps0: f64,
    pub iter_cap: usize,
    pub backend: Backend,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_offaxis: 1e-10,
            tol_limit: 1e-6,
            eps0: 0.5,
            iter_cap: 600,
            backend: Backend::FreeSpace,
        }
    }
}

impl SolverConfig {
    fn options(&self) -> ResolventOptions {
        let mut o = match self.backend {
            Backend::Periodic => ResolventOptions::periodic(self.tol_offaxis),
            Backend::FreeSpace => ResolventOptions::free_space(self.tol_offaxis),
        };
        o.krylov.max_iter = self.iter_cap;
        o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Energy cut-off; chosen from the Fourier content of the data when absent.
    pub lambda_max: Option<f64>,
    /// Panel width in `μ = √λ` when `lambda_max` is given.
    pub dmu: f64,
    pub nodes: usize,
    pub eps_cut: f64,
    /// Relative Fourier mass left beyond the automatic cut-off.
    pub tail_rel: f64,
    /// Agreement required between successive quadrature levels.
    pub tol: f64,
    pub max_levels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            lambda_max: None,
            dmu: 0.25,
            nodes: 12,
            eps_cut: 0.1,
            tail_rel: 1e-6,
            tol: 1e-6,
            max_levels: 2,
        }
    }
}

impl QuadratureConfig {
    fn spec(&self, f: &Field, t_max: f64) -> Result<(PartitionOfUnity, QuadratureSpec)> {
        let pou = PartitionOfUnity::new(self.eps_cut)?;
        let quad = match self.lambda_max {
            Some(lm) => QuadratureSpec::uniform_mu(lm, &pou, self.dmu, self.nodes)?,
            None => QuadratureSpec::for_data(f, &pou, self.tail_rel, t_max)?,
        };
        Ok((pou, quad))
    }
}

/// Gaussian initial state / source `exp(-|x-c|²/(2w²) + ip·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub width: f64,
    pub center: [f64; 3],
    pub momentum: [f64; 3],
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            width: 2.0,
            center: [0.0; 3],
            momentum: [0.0; 3],
        }
    }
}

impl InitialConfig {
    pub fn field(&self, grid: Grid) -> Field {
        let (c, p, w) = (self.center, self.momentum, self.width);
        Field::from_fn(grid, |x| {
            let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            C64::from_polar(
                (-r2 / (2.0 * w * w)).exp(),
                p[0] * x[0] + p[1] * x[1] + p[2] * x[2],
            )
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    /// Radii at which the analytic potential's decay is sampled.
    pub radii: Vec<f64>,
    /// Seeded random fields tested against the magnetic Hardy inequality.
    pub hardy_samples: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            radii: (0..8).map(|i| 4.0 * 1.35f64.powi(i)).collect(),
            hardy_samples: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    /// Weight exponent of `ρ = ⟨x⟩^{-σ}` in the condition operator.
    pub sigma: f64,
    /// Increasing grids for the refinement trend; a `3n/4` grid and the run grid when empty.
    pub grids: Vec<GridConfig>,
    pub tau_res: f64,
    pub count_hint: usize,
    /// Energy window for the embedded-eigenvalue scan (dense, small grids only).
    pub embedded_window: Option<[f64; 2]>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            grids: Vec::new(),
            tau_res: crate::spectral::TAU_RES,
            count_hint: 4,
            embedded_window: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventRoute {
    Apply,
    Direct,
    BornLeft,
    BornRight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Gaussian,
    /// Seeded random bump field.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventConfig {
    pub lambdas: Vec<f64>,
    /// Distance from the real axis; the boundary value `λ ± i0` when absent.
    pub eps: Option<f64>,
    pub side: Side,
    pub k: u8,
    pub route: ResolventRoute,
    pub source: SourceKind,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 1.0, 2.0],
            eps: None,
            side: Side::Plus,
            k: 0,
            route: ResolventRoute::Apply,
            source: SourceKind::Gaussian,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteName {
    /// `free_open` for the zero potential, `direct` otherwise.
    Auto,
    Free,
    FreeOpen,
    Direct,
    Contour,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub times: Vec<f64>,
    pub route: RouteName,
    pub method: DirectMethod,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            times: vec![0.5, 1.0, 2.0],
            route: RouteName::Auto,
            method: DirectMethod::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub sigma: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Logarithmically spaced samples in `[t_min, t_max]`.
    pub t_count: usize,
    /// Fit window; `[t_min, t_max]` when absent.
    pub window: Option<[f64; 2]>,
    pub verdict_tol: f64,
    pub route: RouteName,
    pub method: DirectMethod,
    /// Fraction of the re-entry time allowed in the fit on periodic routes.
    pub wrap_fraction: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            sigma: 3.0,
            t_min: 5.0,
            t_max: 50.0,
            t_count: 16,
            window: None,
            verdict_tol: decay::DEFAULT_TOLERANCE,
            route: RouteName::Auto,
            method: DirectMethod::default(),
            wrap_fraction: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    Free,
    Magnetic,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub regime: Regime,
    pub k: u8,
    pub l: u8,
    pub sigma: f64,
    /// Range of `|ω|` (low) or `Re ω` (high), sampled logarithmically.
    pub range: [f64; 2],
    pub count: usize,
    /// `Im ω` in the high regime.
    pub imag: f64,
    /// `arg ω` in the low regime.
    pub phase: f64,
    pub operators: Vec<OperatorChoice>,
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            regime: Regime::High,
            k: 0,
            l: 0,
            sigma: 1.0,
            range: [1e2, 1e4],
            count: 5,
            imag: 1.0,
            phase: std::f64::consts::FRAC_PI_4,
            operators: vec![OperatorChoice::Magnetic, OperatorChoice::Full],
            tolerance: 0.1,
        }
    }
}

impl VerifyConfig {
    /// Power of `|ω|` predicted for `‖R^{(k)}(ω)f‖_{H^l_{-σ}}`.
    pub fn expected_slope(&self) -> f64 {
        let (k, l) = (self.k as f64, self.l as f64);
        match self.regime {
            Regime::High => -(1.0 + k - l) / 2.0,
            Regime::Low if self.k == 0 => 0.0,
            Regime::Low => 0.5 - k,
        }
    }

    fn omegas(&self) -> Result<Vec<C64>> {
        let mags = decay::log_times(self.range[0], self.range[1], self.count)?;
        Ok(match self.regime {
            Regime::High => mags.iter().map(|m| C64::new(*m, self.imag)).collect(),
            Regime::Low => mags
                .iter()
                .map(|m| C64::from_polar(*m, self.phase))
                .collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Msf1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default = "PotentialSpec::zero")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub resolvent: ResolventConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn increasing(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cfg_err(format!(
            "{name} must be a nonempty, finite, strictly increasing list"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Strict parse: unknown keys and out-of-range values are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| cfg_err(format!("strict parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.grid()?;
        self.potential
            .build(self.grid.grid()?)
            .map_err(|e| cfg_err(format!("potential: {e}")))?;
        let s = &self.solver;
        positive("solver.tol_offaxis", s.tol_offaxis)?;
        positive("solver.tol_limit", s.tol_limit)?;
        positive("solver.eps0", s.eps0)?;
        if s.iter_cap == 0 {
            return Err(cfg_err("solver.iter_cap must be positive"));
        }
        let q = &self.quadrature;
        positive("quadrature.eps_cut", q.eps_cut)?;
        positive("quadrature.dmu", q.dmu)?;
        positive("quadrature.tail_rel", q.tail_rel)?;
        positive("quadrature.tol", q.tol)?;
        if q.nodes < 2 {
            return Err(cfg_err("quadrature.nodes must be at least 2"));
        }
        if let Some(lm) = q.lambda_max {
            if !(lm > q.eps_cut) {
                return Err(cfg_err("quadrature.lambda_max must exceed eps_cut"));
            }
        }
        positive("initial.width", self.initial.width)?;
        increasing("validate.radii", &self.validate.radii)?;
        let sp = &self.spectral;
        if !(sp.sigma >= 0.0) {
            return Err(cfg_err("spectral.sigma must be nonnegative"));
        }
        positive("spectral.tau_res", sp.tau_res)?;
        for g in &sp.grids {
            g.grid()?;
        }
        if let Some([a, b]) = sp.embedded_window {
            if !(0.0 < a && a < b) {
                return Err(cfg_err("spectral.embedded_window must satisfy 0 < lo < hi"));
            }
        }
        let r = &self.resolvent;
        increasing("resolvent.lambdas", &r.lambdas)?;
        if let Some(eps) = r.eps {
            positive("resolvent.eps", eps)?;
        } else if r.side == Side::OffAxis {
            return Err(cfg_err("resolvent.side = off_axis needs resolvent.eps"));
        }
        if r.k > 2 {
            return Err(cfg_err("resolvent.k must be 0, 1 or 2"));
        }
        increasing("evolve.times", &self.evolve.times)?;
        if self.evolve.times[0] < 0.0 {
            return Err(cfg_err("evolve.times must be nonnegative"));
        }
        let d = &self.decay;
        if !(d.sigma >= 0.0) {
            return Err(cfg_err("decay.sigma must be nonnegative"));
        }
        positive("decay.t_min", d.t_min)?;
        if !(d.t_max > d.t_min) || d.t_count < 2 {
            return Err(cfg_err("decay needs t_max > t_min and t_count >= 2"));
        }
        if let Some([a, b]) = d.window {
            if !(0.0 < a && a < b) {
                return Err(cfg_err("decay.window must satisfy 0 < lo < hi"));
            }
        }
        positive("decay.verdict_tol", d.verdict_tol)?;
        positive("decay.wrap_fraction", d.wrap_fraction)?;
        let v = &self.verify;
        positive("verify.range[0]", v.range[0])?;
        if !(v.range[1] > v.range[0]) || v.count < 4 {
            return Err(cfg_err("verify needs range[1] > range[0] and count >= 4"));
        }
        if v.k > 2 || v.l > 1 {
            return Err(cfg_err("verify supports k <= 2 and l <= 1"));
        }
        if v.operators.is_empty() {
            return Err(cfg_err("verify.operators must not be empty"));
        }
        positive("verify.tolerance", v.tolerance)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(
            serde_json::to_vec(self).expect("config serialises"),
        ))
    }

    fn wants(&self, f: Format) -> bool {
        self.outputs.formats.contains(&f)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(std::fs::read(path)?)))
}

// ---------------------------------------------------------------------------------------------
// manifest

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_clock_s: f64,
    pub report: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub stage: String,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileRecord>,
    pub exit_code: i32,
    pub error: Option<ErrorRecord>,
}

/// Output directory plus the stage and file records of one run.
pub struct RunContext {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    command: String,
    stages: Vec<StageRecord>,
    files: Vec<FileRecord>,
    current: String,
}

impl RunContext {
    pub fn new(dir: PathBuf, config: ExperimentConfig, command: &str) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            config,
            command: command.into(),
            stages: Vec::new(),
            files: Vec::new(),
            current: String::new(),
        })
    }

    /// Runs `f` as a named stage and records its report and wall-clock time.
    pub fn stage<T: Serialize>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        self.current = name.into();
        let start = Instant::now();
        let out = f(self)?;
        let report = serde_json::to_value(&out)?;
        self.stages.push(StageRecord {
            name: name.into(),
            wall_clock_s: start.elapsed().as_secs_f64(),
            report,
        });
        Ok(out)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        let bytes = std::fs::metadata(&path)?.len();
        self.files.push(FileRecord {
            path: name.into(),
            sha256: sha256_file(&path)?,
            bytes,
        });
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        self.record(name)
    }

    pub fn write_csv(&mut self, name: &str, text: &str) -> Result<()> {
        if self.config.wants(Format::Csv) {
            self.write_text(name, text)?;
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if self.config.wants(Format::Json) {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            self.write_text(name, &text)?;
        }
        Ok(())
    }

    pub fn write_field(&mut self, name: &str, field: &Field) -> Result<()> {
        if self.config.wants(Format::Msf1) {
            snapshot::save(&self.dir.join(name), field)?;
            self.record(name)?;
        }
        Ok(())
    }

    /// Writes `manifest.json`; the error record, if any, is also written as `error.json`.
    pub fn finish(mut self, exit_code: i32, error: Option<&Error>) -> Result<RunManifest> {
        let error = error.map(|e| ErrorRecord {
            stage: self.current.clone(),
            exit_code,
            message: e.to_string(),
        });
        if let Some(rec) = &error {
            let text = serde_json::to_string_pretty(rec)? + "\n";
            self.write_text("error.json", &text)?;
        }
        let manifest = RunManifest {
            artifact_version: ARTIFACT_VERSION.into(),
            command: self.command.clone(),
            config_hash: self.config.hash(),
            seed: self.config.seed,
            config: self.config.clone(),
            stages: std::mem::take(&mut self.stages),
            files: std::mem::take(&mut self.files),
            exit_code,
            error,
        };
        std::fs::write(
            self.dir.join(MANIFEST),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(manifest)
    }
}

/// Exit status for an error: configuration problems are `2`, everything else `3`.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownKind(_) | Error::InvalidGrid(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

// ---------------------------------------------------------------------------------------------
// subcommands

#[derive(Clone, Debug, Serialize)]
struct PotentialSummary {
    kind: String,
    params: Vec<f64>,
    min_v: f64,
    has_magnetic: bool,
    support_radius: f64,
    decay: crate::potentials::DecayProfile,
    hardy_samples: usize,
    hardy_violations: usize,
    hardy_max_ratio: f64,
    pass: bool,
}

fn build_potential(cfg: &ExperimentConfig) -> Result<PotentialData> {
    cfg.potential.build(cfg.grid.grid()?)
}

fn handle_for(p: &PotentialData) -> OperatorHandle {
    if p.is_zero() {
        OperatorHandle::free(*p.grid())
    } else {
        OperatorHandle::full(p.clone())
    }
}

fn validate_potential(ctx: &mut RunContext) -> Result<bool> {
    let cfg = ctx.config.clone();
    let p = build_potential(&cfg)?;
    let summary = ctx.stage("potential", |_| {
        let decay = validate_decay(&p, &cfg.validate.radii)?;
        Ok(decay)
    })?;
    let hardy = ctx.stage("hardy", |_| {
        let grid = *p.grid();
        (0..cfg.validate.hardy_samples)
            .map(|i| {
                let f = rng::bump_field(grid, &mut rng::stream(cfg.seed, i as u64));
                hardy_check(&p, &f)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = String::from("sample,lhs,rhs,ratio,pass,touches_boundary\n");
    for (i, h) in hardy.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{:e},{:e},{:e},{},{}\n",
            h.lhs,
            h.rhs,
            h.lhs / h.rhs,
            h.pass,
            h.touches_boundary
        ));
    }
    let violations = hardy.iter().filter(|h| !h.pass).count();
    let out = PotentialSummary {
        kind: format!("{:?}", cfg.potential.kind),
        params: cfg.potential.params(),
        min_v: p.min_v(),
        has_magnetic: p.has_magnetic(),
        support_radius: p.support_radius(1e-6),
        pass: summary.pass && violations == 0,
        decay: summary,
        hardy_samples: hardy.len(),
        hardy_violations: violations,
        hardy_max_ratio: hardy.iter().map(|h| h.lhs / h.rhs).fold(0.0, f64::max),
    };
    ctx.write_csv("hardy.csv", &csv)?;
    ctx.write_json("potential.json", &out)?;
    let v = Field::from_values(*p.grid(), p.v().iter().map(|v| C64::new(*v, 0.0)).collect())?;
    ctx.write_field("potential_v.msf1", &v)?;
    Ok(out.pass)
}

#[derive(Clone, Debug, Serialize)]
struct ResolventRow {
    lambda: f64,
    eps: Option<f64>,
    side: Side,
    k: u8,
    norm_l2: f64,
    norm_weighted: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
    differences: Vec<f64>,
    ratios: Vec<f64>,
}

fn source_field(cfg: &ExperimentConfig, grid: Grid) -> Field {
    match cfg.resolvent.source {
        SourceKind::Gaussian => cfg.initial.field(grid),
        SourceKind::Random => rng::bump_field(grid, &mut rng::seeded(cfg.seed)),
    }
}

fn resolvent_sweep(ctx: &mut RunContext) -> Result<bool> {
    let cfg = ctx.config.clone();
    let p = build_potential(&cfg)?;
    let h = handle_for(&p);
    let f = source_field(&cfg, *h.grid());
    let rc = &cfg.resolvent;
    let opts = cfg.solver.options();
    let res = Resolvent::new(&h, &[&f], opts)?;
    let spec = WeightedNormSpec::l2(-1.0);
    let mut rows = Vec::new();
    for (j, &lambda) in rc.lambdas.iter().enumerate() {
        let (u, row) = ctx.stage(&format!("resolvent[{j}]"), |_| {
            let (u, iterations, residual, converged, differences, ratios) = match rc.eps {
                Some(eps) => {
                    let sign = if rc.side == Side::Minus { -1.0 } else { 1.0 };
                    let q = ResolventQuery::off_axis(C64::new(lambda, sign * eps), rc.k)?;
                    if rc.k > 0 {
                        let route = match opts.backend {
                            Backend::Periodic => DerivativeRoute::Power,
                            Backend::FreeSpace => DerivativeRoute::Identity,
                        };
                        (
                            res.derivative(&q, &f, route)?,
                            0,
                            0.0,
                            true,
                            Vec::new(),
                            Vec::new(),
                        )
                    } else {
                        let (u, rep) = match rc.route {
                            ResolventRoute::Apply => res.apply(&q, &f)?,
                            ResolventRoute::Direct => res.direct(&q, &f)?,
                            ResolventRoute::BornLeft => res.born(&q, &f, BornVariant::Left)?,
                            ResolventRoute::BornRight => res.born(&q, &f, BornVariant::Right)?,
                        };
                        (
                            u,
                            rep.iterations,
                            rep.residual,
                            rep.converged,
                            Vec::new(),
                            Vec::new(),
                        )
                    }
                }
                None => {
                    if rc.k > 0 {
                        return Err(Error::InvalidParameter(
                            "boundary values are computed for k = 0 only".into(),
                        ));
                    }
                    let schedule = EpsSchedule {
                        eps0: cfg.solver.eps0,
                        tol: cfg.solver.tol_limit,
                        ..EpsSchedule::default()
                    };
                    let (u, rep) = limiting_absorption_with(&res, lambda, rc.side, &f, schedule)?;
                    (
                        u,
                        rep.solve.iterations,
                        rep.solve.residual,
                        rep.solve.converged,
                        rep.differences,
                        rep.ratios,
                    )
                }
            };
            let row = ResolventRow {
                lambda,
                eps: rc.eps,
                side: rc.side,
                k: rc.k,
                norm_l2: u.norm(),
                norm_weighted: lattice::weighted_norm(&u, spec),
                iterations,
                residual,
                converged,
                differences,
                ratios,
            };
            Ok((FieldSer(u), row))
        })?;
        ctx.write_field(&format!("resolvent_{j}.msf1"), &u.0)?;
        rows.push(row);
    }
    let mut csv =
        String::from("lambda,eps,side,k,norm_l2,norm_weighted,iterations,residual,converged\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{},{},{},{:e},{:e},{},{:e},{}\n",
            r.lambda,
            r.eps
                .map(|e| format!("{e:e}"))
                .unwrap_or_else(|| "0".into()),
            format!("{:?}", r.side).to_lowercase(),
            r.k,
            r.norm_l2,
            r.norm_weighted,
            r.iterations,
            r.residual,
            r.converged
        ));
    }
    ctx.write_csv("resolvent.csv", &csv)?;
    ctx.write_json("resolvent.json", &rows)?;
    Ok(rows.iter().all(|r| r.converged))
}

/// Fields are kept out of stage reports; this wrapper serialises to a summary.
struct FieldSer(Field);

impl Serialize for FieldSer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0.norm())
    }
}

#[derive(Clone, Debug, Serialize)]
struct SpectralSummary {
    spectral_data: SpectralData,
    condition: SpectralConditionReport,
    embedded: Option<EmbeddedScan>,
}

fn condition_grids(cfg: &ExperimentConfig) -> Result<Vec<Grid>> {
    if cfg.spectral.grids.is_empty() {
        let coarse = ((3 * cfg.grid.n / 4) & !1).max(4);
        Ok(vec![Grid::new(coarse, cfg.grid.l)?, cfg.grid.grid()?])
    } else {
        cfg.spectral.grids.iter().map(|g| g.grid()).collect()
    }
}

fn spectral_stages(
    ctx: &mut RunContext,
    p: &PotentialData,
    h: &OperatorHandle,
) -> Result<(SpectralData, SpectralConditionReport)> {
    let cfg = ctx.config.clone();
    let sd = ctx.stage("discrete_spectrum", |_| {
        if p.is_zero() {
            Ok(SpectralData::empty(*h.grid()))
        } else {
            discrete_spectrum(h, cfg.spectral.count_hint)
        }
    })?;
    let cond = ctx.stage("spectral_condition", |_| {
        let opts = ConditionOptions {
            tau_res: cfg.spectral.tau_res,
            ..ConditionOptions::default()
        };
        spectral_condition_check_with(p, cfg.spectral.sigma, &condition_grids(&cfg)?, opts)
    })?;
    Ok((sd, cond))
}

fn spectral_check(ctx: &mut RunContext) -> Result<bool> {
    let cfg = ctx.config.clone();
    let p = build_potential(&cfg)?;
    let h = handle_for(&p);
    let (sd, condition) = spectral_stages(ctx, &p, &h)?;
    let embedded = match cfg.spectral.embedded_window {
        Some([a, b]) => Some(ctx.stage("embedded_scan", |_| embedded_eigenvalue_scan(&h, (a, b)))?),
        None => None,
    };
    let mut csv = String::from("index,eigenvalue,residual,box_artifact\n");
    for (j, ((e, r), a)) in sd
        .eigenvalues
        .iter()
        .zip(&sd.residuals)
        .zip(&sd.box_artifact_flags)
        .enumerate()
    {
        csv.push_str(&format!("{j},{e:e},{r:e},{a}\n"));
    }
    ctx.write_csv("eigenvalues.csv", &csv)?;
    let mut trend = String::from("level,sigma_min,null_ratio\n");
    for (j, (s, r)) in condition
        .refinement_trend
        .iter()
        .zip(&condition.null_ratios)
        .enumerate()
    {
        trend.push_str(&format!("{j},{s:e},{r:e}\n"));
    }
    ctx.write_csv("condition.csv", &trend)?;
    let regular = condition.regular;
    let found = embedded.as_ref().is_some_and(|e| !e.findings().is_empty());
    for (j, phi) in sd.eigenfields.iter().enumerate() {
        ctx.write_field(&format!("eigenfield_{j}.msf1"), phi)?;
    }
    ctx.write_json(
        "spectral.json",
        &SpectralSummary {
            spectral_data: sd,
            condition,
            embedded,
        },
    )?;
    Ok(regular && !found)
}

fn resolve_route(
    name: RouteName,
    p: &PotentialData,
    method: DirectMethod,
    cfg: &ExperimentConfig,
    psi: &Field,
    t_max: f64,
) -> Result<Route> {
    Ok(match name {
        RouteName::Auto if p.is_zero() => Route::FreeOpen,
        RouteName::Auto | RouteName::Direct => Route::Direct(method),
        RouteName::Free => Route::Free,
        RouteName::FreeOpen => Route::FreeOpen,
        RouteName::Contour => {
            let (pou, quad) = cfg.quadrature.spec(psi, t_max)?;
            Route::Contour {
                pou,
                quad,
                tol: cfg.quadrature.tol,
            }
        }
    })
}

#[derive(Clone, Debug, Serialize)]
struct EvolveRow {
    t: f64,
    norm_l2: f64,
    norm_l2_minus1: f64,
}

fn evolve(ctx: &mut RunContext) -> Result<bool> {
    let cfg = ctx.config.clone();
    let p = build_potential(&cfg)?;
    let h = handle_for(&p);
    let psi = cfg.initial.field(*h.grid());
    let times = cfg.evolve.times.clone();
    let t_max = *times.last().expect("validated nonempty");
    let sd = ctx.stage("discrete_spectrum", |_| {
        if p.is_zero() {
            Ok(SpectralData::empty(*h.grid()))
        } else {
            discrete_spectrum(&h, cfg.spectral.count_hint)
        }
    })?;
    let route = resolve_route(cfg.evolve.route, &p, cfg.evolve.method, &cfg, &psi, t_max)?;
    if matches!(route, Route::Free | Route::FreeOpen) && !h.is_free() {
        return Err(Error::InvalidParameter(
            "free routes need the zero potential".into(),
        ));
    }
    let states = ctx.stage("evolve", |_| {
        let fields = match &route {
            Route::Free => times
                .iter()
                .map(|&t| Ok(evolve_free(&psi, t)))
                .collect::<Result<Vec<_>>>()?,
            Route::FreeOpen => times
                .iter()
                .map(|&t| evolve_free_open(&psi, t))
                .collect::<Result<Vec<_>>>()?,
            Route::Direct(m) => evolve_direct_series(&h, &sd, &psi, &times, *m)?,
            Route::Contour { pou, quad, tol } => {
                let ev = ContourEvolution::converged(
                    &h,
                    &sd,
                    &psi,
                    *pou,
                    quad,
                    &times,
                    *tol,
                    cfg.quadrature.max_levels,
                )?;
                times.iter().map(|&t| ev.at(t)).collect()
            }
        };
        Ok(fields.into_iter().map(FieldSer).collect::<Vec<_>>())
    })?;
    let spec = WeightedNormSpec::l2(-1.0);
    let rows: Vec<EvolveRow> = times
        .iter()
        .zip(&states)
        .map(|(&t, s)| EvolveRow {
            t,
            norm_l2: s.0.norm(),
            norm_l2_minus1: lattice::weighted_norm(&s.0, spec),
        })
        .collect();
    let mut csv = String::from("t,norm_l2,norm_l2_minus1\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:e},{:e},{:e}\n",
            r.t, r.norm_l2, r.norm_l2_minus1
        ));
    }
    ctx.write_csv("evolve.csv", &csv)?;
    ctx.write_json("evolve.json", &rows)?;
    for (j, s) in states.iter().enumerate() {
        ctx.write_field(&format!("state_{j}.msf1"), &s.0)?;
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
struct DecaySummary {
    exponent: Option<f64>,
    exponent_ci: Option<f64>,
    verdict: bool,
    fit_window: Option<(f64, f64)>,
    wrap_cap: Option<f64>,
    regular: bool,
    sigma_min: f64,
    n_discrete: usize,
    report: DecayReport,
}

fn decay_report(ctx: &mut RunContext) -> Result<bool> {
    let cfg = ctx.config.clone();
    let d = &cfg.decay;
    let p = build_potential(&cfg)?;
    let h = handle_for(&p);
    let psi = cfg.initial.field(*h.grid());
    let (sd, cond) = spectral_stages(ctx, &p, &h)?;
    let t = decay::log_times(d.t_min, d.t_max, d.t_count)?;
    let route = resolve_route(d.route, &p, d.method, &cfg, &psi, d.t_max)?;
    let series = ctx.stage("evolve", |_| {
        let mut r = decay::decay_series(&h, &sd, &psi, d.sigma, &t, &route)?;
        if r.wrap_cap.is_some() {
            let projected = crate::spectral::project_continuous(&sd, &psi)?;
            r.wrap_cap = Some(decay::wrap_time(&projected, d.wrap_fraction));
        }
        if !cond.regular {
            r.in_hypothesis = false;
            r.warnings.push(format!(
                "spectral condition fails: sigma_min = {:e}",
                cond.sigma_min
            ));
        }
        Ok(r)
    })?;
    let window = d.window.map(|w| (w[0], w[1])).unwrap_or((d.t_min, d.t_max));
    let fitted = ctx.stage("fit", |_| {
        decay::fit_power_law(series, window, d.verdict_tol)
    })?;
    ctx.write_csv("decay.csv", &fitted.to_csv())?;
    let verdict = fitted.verdict;
    let summary = DecaySummary {
        exponent: fitted.exponent,
        exponent_ci: fitted.exponent_ci,
        verdict,
        fit_window: fitted.fit_window,
        wrap_cap: fitted.wrap_cap,
        regular: cond.regular,
        sigma_min: cond.sigma_min,
        n_discrete: sd.n_discrete,
        report: fitted,
    };
    ctx.write_json("decay.json", &summary)?;
    Ok(verdict)
}

#[derive(Clone, Debug, Serialize)]
struct VerifyRow {
    operator: OperatorChoice,
    slope: f64,
    slope_se: f64,
    expected: f64,
    pass: bool,
    abs_omega: Vec<f64>,
    ratios: Vec<f64>,
}

fn verify_estimates(ctx: &mut RunContext) -> Result<bool> {
    let cfg = ctx.config.clone();
    let v = &cfg.verify;
    let p = build_potential(&cfg)?;
    let grid = *p.grid();
    let omegas = v.omegas()?;
    let envelope = cfg.initial.field(grid);
    let probe = match v.regime {
        Regime::High => Probe::Modulated {
            envelope,
            direction: [1.0, 0.0, 0.0],
        },
        Regime::Low => Probe::Fixed(envelope),
    };
    let expected = v.expected_slope();
    let mut rows = Vec::new();
    for &op in &v.operators {
        let h = match op {
            OperatorChoice::Free => OperatorHandle::free(grid),
            OperatorChoice::Magnetic => OperatorHandle::magnetic(p.clone()),
            OperatorChoice::Full => OperatorHandle::full(p.clone()),
        };
        let r = ctx.stage(&format!("probe_{op:?}").to_lowercase(), |_| {
            asymptotic_probe(
                &h,
                v.regime,
                v.k,
                v.l,
                v.sigma,
                &probe,
                &omegas,
                cfg.solver.options(),
            )
        })?;
        rows.push(VerifyRow {
            operator: op,
            slope: r.slope,
            slope_se: r.slope_se,
            expected,
            pass: (r.slope - expected).abs() <= v.tolerance,
            abs_omega: r.abs_omega,
            ratios: r.ratios,
        });
    }
    let mut csv = String::from("operator,abs_omega,ratio\n");
    for r in &rows {
        for (w, q) in r.abs_omega.iter().zip(&r.ratios) {
            csv.push_str(&format!("{:?},{w:e},{q:e}\n", r.operator));
        }
    }
    ctx.write_csv("verify.csv", &csv.to_lowercase())?;
    ctx.write_json("verify.json", &rows)?;
    Ok(rows.iter().all(|r| r.pass))
}

// ---------------------------------------------------------------------------------------------
// replay

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayStatus {
    pub ok: bool,
    pub checked: usize,
    pub problems: Vec<String>,
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Re-checks every file listed in a manifest and the invariants of the stored series.
pub fn replay(manifest_path: &Path) -> Result<ReplayStatus> {
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut problems = Vec::new();
    for f in &manifest.files {
        let path = dir.join(&f.path);
        match sha256_file(&path) {
            Ok(sum) if sum == f.sha256 => {}
            Ok(_) => problems.push(format!("{}: checksum mismatch", f.path)),
            Err(_) => problems.push(format!("{}: missing", f.path)),
        }
    }
    if manifest.config.hash() != manifest.config_hash {
        problems.push("config hash does not match the recorded config".into());
    }
    let listed =
        |name: &str| manifest.files.iter().any(|f| f.path == name) && dir.join(name).exists();
    if problems.is_empty() && listed("decay.csv") {
        let rows = parse_csv(&std::fs::read_to_string(dir.join("decay.csv"))?);
        let parsed: Option<Vec<(f64, f64)>> = rows
            .iter()
            .map(|r| Some((r.first()?.parse().ok()?, r.get(1)?.parse().ok()?)))
            .collect();
        match parsed {
            None => problems.push("decay.csv: unparsable row".into()),
            Some(rows) => {
                if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
                    problems.push("decay.csv: times not strictly increasing".into());
                }
                if rows.iter().any(|r| !(r.1 >= 0.0)) {
                    problems.push("decay.csv: negative norm".into());
                }
                if listed("decay.json") {
                    let v: serde_json::Value =
                        serde_json::from_str(&std::fs::read_to_string(dir.join("decay.json"))?)?;
                    let stored: Vec<f64> = v["report"]["norms"]
                        .as_array()
                        .map(|a| a.iter().filter_map(|x| x.as_f64()).collect())
                        .unwrap_or_default();
                    if stored.len() != rows.len()
                        || stored.iter().zip(&rows).any(|(a, b)| *a != b.1)
                    {
                        problems.push("decay.csv and decay.json norms disagree".into());
                    }
                    if let (Some(w), Some(e)) = (v["fit_window"].as_array(), v["exponent"].as_f64())
                    {
                        let (lo, hi) = (w[0].as_f64().unwrap_or(0.0), w[1].as_f64().unwrap_or(0.0));
                        let (ts, ns): (Vec<f64>, Vec<f64>) = rows
                            .iter()
                            .filter(|r| r.0 >= lo && r.0 <= hi)
                            .copied()
                            .unzip();
                        match crate::fit::log_log(&ts, &ns) {
                            Ok(fit) if (fit.slope - e).abs() <= 1e-12 * e.abs().max(1.0) => {}
                            _ => problems.push(
                                "decay.json exponent does not reproduce from decay.csv".into(),
                            ),
                        }
                    }
                }
            }
        }
    }
    for name in ["evolve.csv", "resolvent.csv", "verify.csv", "hardy.csv"] {
        if problems.is_empty() && listed(name) {
            let rows = parse_csv(&std::fs::read_to_string(dir.join(name))?);
            let bad = rows
                .iter()
                .flatten()
                .filter_map(|c| c.parse::<f64>().ok())
                .any(|x| x.is_nan());
            if bad {
                problems.push(format!("{name}: NaN entries"));
            }
        }
    }
    Ok(ReplayStatus {
        ok: problems.is_empty(),
        checked: manifest.files.len(),
        problems,
    })
}

// ---------------------------------------------------------------------------------------------
// entry point

#[derive(Debug, Parser)]
#[command(
    name = "magdecay",
    version,
    about = "Resolvent, spectral and dispersive-decay experiments for magnetic Schrödinger operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory (default: $MAGDECAY_OUT, then ./magdecay-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Decay profile of the potential and Hardy-inequality checks.
    ValidatePotential(ConfigArg),
    /// Resolvent sweep over the configured energies.
    Resolvent(ConfigArg),
    /// Discrete spectrum, spectral condition and optional embedded-eigenvalue scan.
    SpectralCheck(ConfigArg),
    /// Time evolution at the configured times.
    Evolve(ConfigArg),
    /// Spectral check, projection, evolution and power-law fit of the weighted norms.
    DecayReport(ConfigArg),
    /// Asymptotic resolvent estimates at high or low energy.
    VerifyEstimates(ConfigArg),
    /// Re-verify a finished run from its manifest.
    Replay {
        /// Path to manifest.json.
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ValidatePotential(_) => "validate-potential",
            Command::Resolvent(_) => "resolvent",
            Command::SpectralCheck(_) => "spectral-check",
            Command::Evolve(_) => "evolve",
            Command::DecayReport(_) => "decay-report",
            Command::VerifyEstimates(_) => "verify-estimates",
            Command::Replay { .. } => "replay",
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("magdecay-out"))
}

fn report_error(stage: &str, code: i32, e: &Error) {
    let rec = ErrorRecord {
        stage: stage.into(),
        exit_code: code,
        message: e.to_string(),
    };
    eprintln!(
        "{}",
        serde_json::to_string(&rec).unwrap_or_else(|_| e.to_string())
    );
}

/// Runs one subcommand whose config has already been loaded; returns the exit status.
pub fn run_with_config(command: &str, config: ExperimentConfig, out: PathBuf) -> i32 {
    let mut ctx = match RunContext::new(out, config, command) {
        Ok(c) => c,
        Err(e) => {
            report_error("output", EXIT_SOLVER, &e);
            return EXIT_SOLVER;
        }
    };
    let result = match command {
        "validate-potential" => validate_potential(&mut ctx),
        "resolvent" => resolvent_sweep(&mut ctx),
        "spectral-check" => spectral_check(&mut ctx),
        "evolve" => evolve(&mut ctx),
        "decay-report" => decay_report(&mut ctx),
        "verify-estimates" => verify_estimates(&mut ctx),
        other => Err(cfg_err(format!("unknown command {other}"))),
    };
    let (code, err) = match result {
        Ok(true) => (EXIT_OK, None),
        Ok(false) => (EXIT_VERDICT, None),
        Err(e) => (exit_code_for(&e), Some(e)),
    };
    let stage = ctx.current.clone();
    if let Some(e) = &err {
        report_error(&stage, code, e);
    }
    match ctx.finish(code, err.as_ref()) {
        Ok(_) => code,
        Err(e) => {
            report_error("manifest", EXIT_SOLVER, &e);
            EXIT_SOLVER
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            report_error("threads", EXIT_CONFIG, &cfg_err(e.to_string()));
            return EXIT_CONFIG;
        }
    }
    let name = cli.command.name();
    match cli.command {
        Command::Replay { manifest } => match replay(&manifest) {
            Ok(status) => {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&status).expect("status serialises")
                );
                if status.ok {
                    EXIT_OK
                } else {
                    EXIT_VERDICT
                }
            }
            Err(e) => {
                report_error("replay", EXIT_CONFIG, &e);
                EXIT_CONFIG
            }
        },
        Command::ValidatePotential(c)
        | Command::Resolvent(c)
        | Command::SpectralCheck(c)
        | Command::Evolve(c)
        | Command::DecayReport(c)
        | Command::VerifyEstimates(c) => {
            let mut config = match ExperimentConfig::load(&c.config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    report_error("config", EXIT_CONFIG, &e);
                    return EXIT_CONFIG;
                }
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            run_with_config(name, config, out_dir(cli.out))
        }
    }
}

pub fn main() -> i32 {
    run(Cli::parse())
}
