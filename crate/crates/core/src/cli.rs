//! The `radonlab` command line: config files, flag overrides, report files
//! and exit codes.
//!
//! A run reads an optional TOML file into [`RunConfig`], applies the flags of
//! the chosen subcommand on top, validates the result and only then starts
//! computing. Each run writes `<stem>.json` (schema-tagged, embeds the
//! resolved config), `<stem>.meta.json` (timing and thread count) and a CSV.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decay::{
    box_bump, decay_sweep, family_decay_sweep, ray_sweep, DecayError, DecayReport, DirectionBudget, FamilyAverage,
    ParamQuadrature, Prediction, Regime, SurfaceClass, SweepConfig,
};
use crate::geometry::{ChartKind, FamilySpec, GeometryError, RotationSampler, SurfaceChart, SurfaceConfig, TransformFamily};
use crate::nondegeneracy::{
    check_christ_condition, check_curve_pullback, check_family_rank, check_graph_rank, check_surface_pullback, check_tangent_rank,
    named_graph, named_point_family, CheckConfig, Condition, NondegError, PointFamily, RankReport,
};
use crate::numerics::Exponent;
use crate::oscillatory::{transform_for, CircleTransform, FourierTransform, FrequencyGrid, OscillatoryError, QuadConfig};
use crate::probes::{exponent_table, knapp_probe, rational_from_f64, BoundTag, ExponentSet, KnappConfig, NormProbeReport, ProbeAveraging, ProbeError, Rational};
use crate::radon::{
    apply_averaged, convolve, discretize_measure, read_grid_file, write_grid_file, Averaging, ConvolveMethod, GeneralizedRadon, GridField,
    RadonError,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NonConvergence(_) => EXIT_NONCONVERGENCE,
            _ => EXIT_USAGE,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Newton(_) => CliError::NonConvergence(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<OscillatoryError> for CliError {
    fn from(e: OscillatoryError) -> Self {
        match e {
            OscillatoryError::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            OscillatoryError::Geometry(g) => g.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DecayError> for CliError {
    fn from(e: DecayError) -> Self {
        match e {
            DecayError::Oscillatory(o) => o.into(),
            DecayError::Geometry(g) => g.into(),
            DecayError::NonPositive { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<RadonError> for CliError {
    fn from(e: RadonError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::NonPositive { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<NondegError> for CliError {
    fn from(e: NondegError) -> Self {
        match e {
            NondegError::Inversion { .. } => CliError::NonConvergence(e.to_string()),
            NondegError::Geometry(g) => g.into(),
            NondegError::Gamma1Vanishes { .. } | NondegError::SingularPullback { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

// ---------------------------------------------------------------- config

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandTag {
    Decay,
    Probe,
    Check,
    Apply,
    MuHat,
}

impl CommandTag {
    pub fn name(&self) -> &'static str {
        match self {
            CommandTag::Decay => "decay",
            CommandTag::Probe => "probe",
            CommandTag::Check => "check",
            CommandTag::Apply => "apply",
            CommandTag::MuHat => "mu-hat",
        }
    }
}

/// What a run is expected to show. `any` turns the verdict into a report
/// only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Any,
    Pass,
    Fail,
    Bounded,
    Blowup,
}

impl FromStr for Expect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "any" => Ok(Expect::Any),
            "pass" => Ok(Expect::Pass),
            "fail" => Ok(Expect::Fail),
            "bounded" => Ok(Expect::Bounded),
            "blowup" => Ok(Expect::Blowup),
            other => Err(format!("unknown expectation '{other}' (any, pass, fail, bounded, blowup)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem; defaults to the command name.
    pub stem: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Directional `L^p` average over the sphere.
    #[default]
    Spherical,
    /// Pointwise modulus along a fixed ray.
    Ray,
    /// `L²` average over a transformation family along a fixed ray.
    Family,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySection {
    pub mode: DecayMode,
    pub p: Exponent,
    pub rho_min: f64,
    pub levels: usize,
    /// Directions per level; defaults to the budget for the surface class.
    pub directions: Option<DirectionBudget>,
    /// Ray direction for `ray` and `family`; defaults to the last axis.
    pub direction: Option<Vec<f64>>,
    /// Gauss nodes per family parameter axis.
    pub per_axis: usize,
    /// Weight the family rule with a bump on the parameter box.
    pub bump_weight: bool,
    /// Overrides the predicted slope.
    pub expected_slope: Option<f64>,
    /// Pass iff `|fitted − predicted| ≤ band`.
    pub band: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        let s = SweepConfig::default();
        DecaySection {
            mode: DecayMode::Spherical,
            p: s.p,
            rho_min: s.rho_min,
            levels: s.levels,
            directions: None,
            direction: None,
            per_axis: 16,
            bump_weight: true,
            expected_slope: None,
            band: 0.07,
        }
    }
}

/// A tabulated bound, written with rational strings:
/// `{ kind = "beta_mixed", n = 2, beta = "4", p = "8/5" }`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
}

fn parse_rational(text: &str) -> Result<Rational, CliError> {
    if let Ok(r) = Rational::from_str(text.trim()) {
        return Ok(r);
    }
    let v: f64 = text.trim().parse().map_err(|_| CliError::Usage(format!("'{text}' is not a rational number")))?;
    rational_from_f64(v).map_err(|e| CliError::Usage(e.to_string()))
}

impl BoundConfig {
    pub fn to_tag(&self) -> Result<BoundTag, CliError> {
        let need_n = || self.n.ok_or_else(|| CliError::Usage(format!("bound '{}' needs n", self.kind)));
        let need_k = || self.k.ok_or_else(|| CliError::Usage(format!("bound '{}' needs k", self.kind)));
        let need_q = |v: &Option<String>, key: &str| -> Result<Rational, CliError> {
            parse_rational(v.as_deref().ok_or_else(|| CliError::Usage(format!("bound '{}' needs {key}", self.kind)))?)
        };
        Ok(match self.kind.as_str() {
            "convex_curve" => BoundTag::ConvexCurve,
            "convex_hypersurface" => BoundTag::ConvexHypersurface { n: need_n()? },
            "smooth_surface" => BoundTag::SmoothSurface { n: need_n()?, k: need_k()? },
            "transformed_hypersurface" => BoundTag::TransformedHypersurface { n: need_n()? },
            "nondegenerate_family" => BoundTag::NondegenerateFamily { n: need_n()?, k: need_k()? },
            "beta_mixed" => BoundTag::BetaMixed { n: need_n()?, beta: need_q(&self.beta, "beta")?, p: need_q(&self.p, "p")? },
            "curve_family" => BoundTag::CurveFamily { n: need_n()? },
            other => return Err(CliError::Usage(format!("unknown bound '{other}'"))),
        })
    }
}

/// `kind[:key=value,…]`, e.g. `beta_mixed:n=2,beta=4,p=8/5`.
impl FromStr for BoundConfig {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut b = BoundConfig { kind: kind.trim().to_string(), ..Default::default() };
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| CliError::Usage(format!("expected key=value in '{part}'")))?;
            let int = || v.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("'{v}' is not an integer")));
            match k.trim() {
                "n" => b.n = Some(int()?),
                "k" => b.k = Some(int()?),
                "beta" => b.beta = Some(v.trim().to_string()),
                "p" => b.p = Some(v.trim().to_string()),
                other => return Err(CliError::Usage(format!("unknown bound parameter '{other}'"))),
            }
        }
        Ok(b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub knapp: KnappConfig,
    pub averaging: ProbeAveraging,
    /// When set, `p`, `q` and the outer exponent come from this bound.
    pub bound: Option<BoundConfig>,
    pub expect: Expect,
    pub expected_slope: Option<f64>,
    pub slope_band: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        ProbeSection {
            knapp: KnappConfig::default(),
            averaging: ProbeAveraging::FixedTheta,
            bound: None,
            expect: Expect::Any,
            expected_slope: None,
            slope_band: 0.1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    /// Condition tags (`1.4`, `4.1`, `5.6`, `5.8`, `5.9`, `christ`) or names.
    pub conditions: Vec<String>,
    pub sampling: CheckConfig,
    /// Box of base points for the family rank check; defaults to `[−1, 1]^n`.
    pub x_box: Option<Vec<[f64; 2]>>,
    /// Named curve or surface family for the pullback checks.
    pub curve: Option<String>,
    /// Named graph for the graph rank check.
    pub graph: Option<String>,
    /// Overrides the `(s, t)` box of the named family or graph.
    pub st_box: Option<Vec<[f64; 2]>>,
    /// Base points for the pullback checks; defaults to the origin.
    pub y_samples: Option<Vec<Vec<f64>>>,
    pub expect: Expect,
    /// Keep every rank sample in the JSON report.
    pub keep_samples: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputField {
    Gaussian { sigma: f64 },
    Ball { radius: f64 },
    /// Read from a grid file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ApplyAveraging {
    /// Plain correlation with the surface measure.
    None,
    Rotations { count: usize },
    /// The configured family on a Gauss rule.
    Family { per_axis: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApplySection {
    pub input: InputField,
    pub cells: usize,
    pub half_width: f64,
    pub averaging: ApplyAveraging,
    pub method: ConvolveMethod,
    pub density: f64,
}

impl Default for ApplySection {
    fn default() -> Self {
        ApplySection {
            input: InputField::Ball { radius: 0.5 },
            cells: 256,
            half_width: 2.0,
            averaging: ApplyAveraging::None,
            method: ConvolveMethod::Fft,
            density: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuHatSection {
    /// Explicit frequencies; when empty a dyadic ray is used.
    pub xi: Vec<Vec<f64>>,
    pub direction: Option<Vec<f64>>,
    pub rho_min: f64,
    pub levels: usize,
}

impl Default for MuHatSection {
    fn default() -> Self {
        MuHatSection { xi: Vec::new(), direction: None, rho_min: 1.0, levels: 7 }
    }
}

/// Everything a run needs. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<CommandTag>,
    pub surface: Option<SurfaceConfig>,
    pub family: Option<FamilySpec>,
    pub seed: u64,
    /// Worker threads; not part of the report, results do not depend on it.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    pub output: OutputConfig,
    pub quad: QuadConfig,
    pub decay: DecaySection,
    pub probe: ProbeSection,
    pub check: CheckSection,
    pub apply: ApplySection,
    pub mu_hat: MuHatSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            surface: None,
            family: None,
            seed: 1,
            threads: None,
            output: OutputConfig { dir: PathBuf::from("."), stem: None },
            quad: QuadConfig::default(),
            decay: DecaySection::default(),
            probe: ProbeSection::default(),
            check: CheckSection::default(),
            apply: ApplySection::default(),
            mu_hat: MuHatSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    fn surface_chart(&self) -> Result<SurfaceChart, CliError> {
        let s = self.surface.as_ref().ok_or_else(|| CliError::Usage("no surface given (--surface or [surface])".into()))?;
        Ok(s.build()?)
    }

    fn family(&self) -> Result<TransformFamily, CliError> {
        let f = self.family.as_ref().ok_or_else(|| CliError::Usage("no family given (--family or [family])".into()))?;
        Ok(f.build()?)
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self, command: CommandTag) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(CliError::Usage(format!("config is for '{}' but '{}' was run", c.name(), command.name())));
            }
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        self.quad.validate()?;
        let needs_surface = match command {
            CommandTag::Check => false,
            _ => true,
        };
        if needs_surface {
            self.surface_chart()?;
        }
        match command {
            CommandTag::Decay => {
                let d = &self.decay;
                d.p.check_range(1.0, 64.0).map_err(CliError::Usage)?;
                if !(d.rho_min > 0.0) || d.levels < crate::decay::MIN_FIT_LEVELS {
                    return Err(CliError::Usage(format!(
                        "decay needs rho_min > 0 and at least {} levels",
                        crate::decay::MIN_FIT_LEVELS
                    )));
                }
                if !(d.band >= 0.0) {
                    return Err(CliError::Usage("band must be nonnegative".into()));
                }
                if d.mode == DecayMode::Family {
                    self.family()?;
                    if d.per_axis == 0 {
                        return Err(CliError::Usage("per_axis must be positive".into()));
                    }
                }
            }
            CommandTag::Probe => {
                if let Some(b) = &self.probe.bound {
                    exponent_table(&b.to_tag()?)?;
                }
                if !matches!(self.probe.expect, Expect::Any | Expect::Bounded | Expect::Blowup) {
                    return Err(CliError::Usage("probe expectation must be any, bounded or blowup".into()));
                }
            }
            CommandTag::Check => {
                if self.check.conditions.is_empty() {
                    return Err(CliError::Usage("no conditions given (--condition or check.conditions)".into()));
                }
                for c in &self.check.conditions {
                    c.parse::<Condition>()?;
                }
                if !matches!(self.check.expect, Expect::Any | Expect::Pass | Expect::Fail) {
                    return Err(CliError::Usage("check expectation must be any, pass or fail".into()));
                }
            }
            CommandTag::Apply => {
                let a = &self.apply;
                if a.cells < 2 || !(a.half_width > 0.0) {
                    return Err(CliError::Usage("apply needs cells >= 2 and half_width > 0".into()));
                }
                if let ApplyAveraging::Family { .. } = a.averaging {
                    self.family()?;
                }
            }
            CommandTag::MuHat => {
                if self.mu_hat.xi.is_empty() && (self.mu_hat.levels == 0 || !(self.mu_hat.rho_min > 0.0)) {
                    return Err(CliError::Usage("mu-hat needs xi values or rho_min > 0 and levels > 0".into()));
                }
            }
        }
        Ok(())
    }
}

// ----------------------------------------------------------------- flags

#[derive(Parser, Debug)]
#[command(name = "radonlab", version, about = "Fourier decay, averaged Radon transforms and rank conditions")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "RADONLAB_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Output file stem.
    #[arg(long, global = true)]
    pub stem: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Surface, e.g. `circle`, `square`, `beta:n=2,beta=4`.
    #[arg(long, global = true)]
    pub surface: Option<String>,
    /// Transformation family, e.g. `rotation2`, `so3:half_width=0.35`.
    #[arg(long, global = true)]
    pub family: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dyadic decay sweep of the Fourier transform with a slope fit.
    Decay(DecayArgs),
    /// Knapp-type norm ratio probe.
    Probe(ProbeArgs),
    /// Rank conditions on transformation or curve families.
    Check(CheckArgs),
    /// Apply the averaging operator to a grid.
    Apply(ApplyArgs),
    /// Evaluate the Fourier transform of the surface measure.
    MuHat(MuHatArgs),
}

#[derive(Args, Debug, Default)]
pub struct DecayArgs {
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub p: Option<Exponent>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Comma-separated components.
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub per_axis: Option<usize>,
    #[arg(long)]
    pub band: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub expected_slope: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct ProbeArgs {
    #[arg(long)]
    pub p: Option<Exponent>,
    #[arg(long)]
    pub q: Option<Exponent>,
    #[arg(long)]
    pub outer: Option<Exponent>,
    /// `ball` or `plate`.
    #[arg(long)]
    pub probe_family: Option<String>,
    /// Rotation samples; 0 keeps θ fixed.
    #[arg(long)]
    pub rotations: Option<usize>,
    /// Comma-separated, strictly decreasing.
    #[arg(long)]
    pub deltas: Option<String>,
    #[arg(long)]
    pub max_cells: Option<usize>,
    /// Grid box is `[−half_width, half_width]^n`.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// e.g. `beta_mixed:n=2,beta=4,p=8/5`.
    #[arg(long)]
    pub bound: Option<String>,
    #[arg(long)]
    pub expect: Option<Expect>,
    #[arg(long, allow_hyphen_values = true)]
    pub expected_slope: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct CheckArgs {
    /// Condition tags, comma-separated or repeated.
    #[arg(long = "condition", value_delimiter = ',')]
    pub conditions: Vec<String>,
    #[arg(long)]
    pub curve: Option<String>,
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long)]
    pub expect: Option<Expect>,
    #[arg(long)]
    pub keep_samples: bool,
}

#[derive(Args, Debug, Default)]
pub struct ApplyArgs {
    /// Grid file to read instead of the configured synthetic field.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Rotation samples; 0 for a single correlation.
    #[arg(long)]
    pub rotations: Option<usize>,
    /// `fft` or `direct`.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub density: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct MuHatArgs {
    /// Frequencies separated by `;`, components by `,`.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
}

fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("'{v}' is not a number"))))
        .collect()
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

impl Cli {
    pub fn tag(&self) -> CommandTag {
        match self.command {
            Command::Decay(_) => CommandTag::Decay,
            Command::Probe(_) => CommandTag::Probe,
            Command::Check(_) => CommandTag::Check,
            Command::Apply(_) => CommandTag::Apply,
            Command::MuHat(_) => CommandTag::MuHat,
        }
    }

    /// Config file (or defaults) with every given flag applied.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(t) = self.threads {
            c.threads = Some(t);
        }
        if let Some(d) = &self.out_dir {
            c.output.dir = d.clone();
        }
        if let Some(s) = &self.stem {
            c.output.stem = Some(s.clone());
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(s) = &self.surface {
            c.surface = Some(SurfaceConfig::Short(s.clone()));
        }
        if let Some(f) = &self.family {
            c.family = Some(f.parse()?);
        }
        match &self.command {
            Command::Decay(a) => {
                let d = &mut c.decay;
                if let Some(m) = &a.mode {
                    d.mode = serde_json::from_value(serde_json::Value::String(m.clone())).map_err(|_| usage(format!("unknown mode '{m}'")))?;
                }
                if let Some(p) = a.p {
                    d.p = p;
                }
                if let Some(r) = a.rho_min {
                    d.rho_min = r;
                }
                if let Some(l) = a.levels {
                    d.levels = l;
                }
                if let Some(v) = &a.direction {
                    d.direction = Some(parse_list(v)?);
                }
                if let Some(n) = a.per_axis {
                    d.per_axis = n;
                }
                if let Some(b) = a.band {
                    d.band = b;
                }
                if let Some(s) = a.expected_slope {
                    d.expected_slope = Some(s);
                }
            }
            Command::Probe(a) => {
                let p = &mut c.probe;
                if let Some(v) = a.p {
                    p.knapp.p = v;
                }
                if let Some(v) = a.q {
                    p.knapp.q = v;
                }
                if let Some(v) = a.outer {
                    p.knapp.outer = Some(v);
                }
                if let Some(f) = &a.probe_family {
                    p.knapp.family =
                        serde_json::from_value(serde_json::Value::String(f.clone())).map_err(|_| usage(format!("unknown probe family '{f}'")))?;
                }
                if let Some(r) = a.rotations {
                    p.averaging = if r == 0 { ProbeAveraging::FixedTheta } else { ProbeAveraging::Rotations { count: r, seed: c.seed } };
                }
                if let Some(d) = &a.deltas {
                    p.knapp.deltas = parse_list(d)?;
                }
                if let Some(m) = a.max_cells {
                    p.knapp.max_cells = m;
                }
                if let Some(h) = a.half_width {
                    p.knapp.half_width = h;
                }
                if let Some(b) = &a.bound {
                    p.bound = Some(b.parse()?);
                }
                if let Some(e) = a.expect {
                    p.expect = e;
                }
                if let Some(s) = a.expected_slope {
                    p.expected_slope = Some(s);
                }
            }
            Command::Check(a) => {
                let k = &mut c.check;
                if !a.conditions.is_empty() {
                    k.conditions = a.conditions.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                }
                if let Some(v) = &a.curve {
                    k.curve = Some(v.clone());
                }
                if let Some(v) = &a.graph {
                    k.graph = Some(v.clone());
                }
                if let Some(e) = a.expect {
                    k.expect = e;
                }
                if a.keep_samples {
                    k.keep_samples = true;
                }
                if self.seed.is_some() {
                    k.sampling.seed = c.seed;
                }
            }
            Command::Apply(a) => {
                let p = &mut c.apply;
                if let Some(path) = &a.input {
                    p.input = InputField::File { path: path.clone() };
                }
                if let Some(v) = a.cells {
                    p.cells = v;
                }
                if let Some(v) = a.half_width {
                    p.half_width = v;
                }
                if let Some(r) = a.rotations {
                    p.averaging = if r == 0 { ApplyAveraging::None } else { ApplyAveraging::Rotations { count: r } };
                }
                if let Some(m) = &a.method {
                    p.method = serde_json::from_value(serde_json::Value::String(m.clone())).map_err(|_| usage(format!("unknown method '{m}'")))?;
                }
                if let Some(d) = a.density {
                    p.density = d;
                }
            }
            Command::MuHat(a) => {
                let m = &mut c.mu_hat;
                if let Some(x) = &a.xi {
                    m.xi = x.split(';').filter(|s| !s.trim().is_empty()).map(parse_list).collect::<Result<_, _>>()?;
                }
                if let Some(v) = &a.direction {
                    m.direction = Some(parse_list(v)?);
                }
                if let Some(v) = a.rho_min {
                    m.rho_min = v;
                }
                if let Some(v) = a.levels {
                    m.levels = v;
                }
            }
        }
        c.validate(self.tag())?;
        Ok(c)
    }
}

// --------------------------------------------------------------- reports

/// Result of one subcommand: the report body, CSV rows and whether the
/// verdict met the expectation.
pub struct Outcome {
    pub schema: &'static str,
    pub result: serde_json::Value,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<f64>>,
    /// Extra string columns prepended to each CSV row.
    pub csv_labels: Vec<String>,
    pub pass: bool,
    pub summary: String,
    pub grid: Option<GridField>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'a str,
    version: &'a str,
    command: &'a str,
    pass: bool,
    config: &'a RunConfig,
    result: &'a serde_json::Value,
}

#[derive(Serialize)]
struct Meta<'a> {
    schema: &'a str,
    report: String,
    started_unix: f64,
    finished_unix: f64,
    elapsed_seconds: f64,
    threads: usize,
}

/// Full-precision scientific notation (17 significant digits).
pub fn csv_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Paths of the files written by a run.
#[derive(Clone, Debug)]
pub struct Written {
    pub report: PathBuf,
    pub meta: PathBuf,
    pub csv: PathBuf,
    pub grid: Option<PathBuf>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_outputs(cfg: &RunConfig, tag: CommandTag, out: &Outcome, started: f64, elapsed: f64, threads: usize) -> Result<Written, CliError> {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    let stem = cfg.output.stem.clone().unwrap_or_else(|| tag.name().to_string());
    let report = dir.join(format!("{stem}.json"));
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let csv = dir.join(format!("{stem}.csv"));
    let env = Envelope {
        schema: out.schema,
        version: env!("CARGO_PKG_VERSION"),
        command: tag.name(),
        pass: out.pass,
        config: cfg,
        result: &out.result,
    };
    let mut body = serde_json::to_string_pretty(&env).map_err(usage)?;
    body.push('\n');
    write_file(&report, body.as_bytes())?;

    let mut text = out.csv_header.join(",");
    text.push('\n');
    for (i, row) in out.csv_rows.iter().enumerate() {
        let mut cells: Vec<String> = Vec::new();
        if let Some(l) = out.csv_labels.get(i) {
            cells.push(l.clone());
        }
        cells.extend(row.iter().map(|v| csv_float(*v)));
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_file(&csv, text.as_bytes())?;

    let grid = match &out.grid {
        Some(g) => {
            let path = dir.join(format!("{stem}.grid"));
            write_grid_file(&path, g)?;
            Some(path)
        }
        None => None,
    };

    let meta = Meta {
        schema: "radonlab.meta/1",
        report: report.file_name().unwrap().to_string_lossy().into_owned(),
        started_unix: started,
        finished_unix: started + elapsed,
        elapsed_seconds: elapsed,
        threads,
    };
    let mut m = serde_json::to_string_pretty(&meta).map_err(usage)?;
    m.push('\n');
    write_file(&meta_path, m.as_bytes())?;
    Ok(Written { report, meta: meta_path, csv, grid })
}

// -------------------------------------------------------------- commands

fn default_direction(n: usize, given: &Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let d = given.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; n];
        e[n - 1] = 1.0;
        e
    });
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if d.len() != n || !(norm > 0.0) {
        return Err(CliError::Usage(format!("direction must be a nonzero vector in R^{n}")));
    }
    Ok(d.iter().map(|v| v / norm).collect())
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(usage)
}

fn decay_outcome(report: DecayReport, band: f64, schema: &'static str) -> Result<Outcome, CliError> {
    let pass = report.within(band);
    let summary = format!(
        "fitted slope {:.4} (stderr {:.4}), predicted {:.4}, band {band}: {}",
        report.fitted_slope,
        report.slope_stderr,
        report.predicted_slope,
        if pass { "pass" } else { "mismatch" }
    );
    let rows = report
        .rho_levels
        .iter()
        .zip(&report.direction_counts)
        .zip(&report.averages)
        .map(|((r, d), a)| vec![*r, *d as f64, *a])
        .collect();
    Ok(Outcome {
        schema,
        result: to_value(&report)?,
        csv_header: vec!["rho".into(), "directions".into(), "average".into()],
        csv_rows: rows,
        csv_labels: Vec::new(),
        pass,
        summary,
        grid: None,
    })
}

pub fn cmd_decay(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let d = &cfg.decay;
    let chart = cfg.surface_chart()?;
    let n = chart.ambient_dim();
    let class = SurfaceClass::of_chart(&chart);
    let with_override = |pred: Prediction| match d.expected_slope {
        Some(s) => Prediction { slope: s, ..pred },
        None => pred,
    };
    let report = match d.mode {
        DecayMode::Spherical => {
            let t = transform_for(&chart, &cfg.quad)?;
            let sweep = SweepConfig { p: d.p, rho_min: d.rho_min, levels: d.levels, directions: d.directions.clone().unwrap_or_else(|| DirectionBudget::for_chart(&chart)), seed: cfg.seed };
            let mut r = decay_sweep(t.as_ref(), class, &sweep)?;
            if let Some(s) = d.expected_slope {
                r.predicted_slope = s;
            }
            r
        }
        DecayMode::Ray => {
            let t = transform_for(&chart, &cfg.quad)?;
            let dir = default_direction(n, &d.direction)?;
            // along the normal of a β-flat point the modulus decays like ρ^{−(n−1)/β}
            let pred = match class {
                SurfaceClass::Beta { n, beta } => Prediction { slope: -(n as f64 - 1.0) / beta, regime: Regime::Supercritical, log_power: None },
                SurfaceClass::Smooth { k } => Prediction { slope: -(k as f64) / 2.0, regime: Regime::Smooth, log_power: None },
            };
            ray_sweep(t.as_ref(), &dir, d.rho_min, d.levels, with_override(pred))?
        }
        DecayMode::Family => {
            let family = cfg.family()?;
            let dir = default_direction(n, &d.direction)?;
            let periodic = vec![false; family.param_dim()];
            let psi = if d.bump_weight { Some(box_bump(family.param_box())) } else { None };
            let rule = ParamQuadrature::tensor(family.param_box(), d.per_axis, &periodic, psi.as_ref());
            let avg = FamilyAverage::new(chart, family, rule, cfg.quad.clone())?;
            let pred = Prediction { slope: -(n as f64 - 1.0) / 2.0, regime: Regime::Smooth, log_power: None };
            family_decay_sweep(&avg, &dir, d.rho_min, d.levels, with_override(pred))?
        }
    };
    decay_outcome(report, d.band, "radonlab.decay/1")
}

#[derive(Serialize)]
struct ProbeResult<'a> {
    bound: Option<BoundTag>,
    exponents: Option<ExponentSet>,
    expect: Expect,
    expected_slope: Option<f64>,
    slope_band: f64,
    report: &'a NormProbeReport,
}

/// Knapp config with the exponents of the configured bound filled in.
pub fn resolved_knapp(section: &ProbeSection) -> Result<(KnappConfig, Option<BoundTag>, Option<ExponentSet>), CliError> {
    let mut k = section.knapp.clone();
    let Some(b) = &section.bound else { return Ok((k, None, None)) };
    let tag = b.to_tag()?;
    let set = exponent_table(&tag)?;
    let (p, q, outer) = set.as_f64();
    k.p = Exponent::Finite(p);
    k.q = Exponent::Finite(q);
    k.outer = outer.map(|r| if r.is_infinite() { Exponent::Infinite } else { Exponent::Finite(r) });
    Ok((k, Some(tag), Some(set)))
}

pub fn cmd_probe(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sec = &cfg.probe;
    let chart = cfg.surface_chart()?;
    let (knapp, bound, exponents) = resolved_knapp(sec)?;
    let report = knapp_probe(&chart, &sec.averaging, &knapp)?;
    let verdict_ok = match sec.expect {
        Expect::Bounded => report.verdict.is_bounded(),
        Expect::Blowup => !report.verdict.is_bounded(),
        _ => true,
    };
    let slope_ok = sec.expected_slope.is_none_or(|s| (report.slope - s).abs() <= sec.slope_band);
    let pass = verdict_ok && slope_ok;
    let summary = format!(
        "ratio slope {:.4} (stderr {:.4}), verdict {}: {}",
        report.slope,
        report.slope_stderr,
        if report.verdict.is_bounded() { "bounded-consistent" } else { "blowup" },
        if pass { "pass" } else { "mismatch" }
    );
    let rows = (0..report.deltas.len())
        .map(|i| vec![report.deltas[i], report.cells[i] as f64, report.input_norms[i], report.output_norms[i], report.ratios[i]])
        .collect();
    let result = ProbeResult { bound, exponents, expect: sec.expect, expected_slope: sec.expected_slope, slope_band: sec.slope_band, report: &report };
    Ok(Outcome {
        schema: "radonlab.probe/1",
        result: to_value(&result)?,
        csv_header: ["delta", "cells", "input_norm", "output_norm", "ratio"].map(String::from).to_vec(),
        csv_rows: rows,
        csv_labels: Vec::new(),
        pass,
        summary,
        grid: None,
    })
}

fn boxes(v: &Option<Vec<[f64; 2]>>) -> Option<Vec<(f64, f64)>> {
    v.as_ref().map(|b| b.iter().map(|p| (p[0], p[1])).collect())
}

/// Curve or surface family for the pullback checks: a named one, or the
/// translates of the configured surface under the configured family.
fn point_family(cfg: &RunConfig) -> Result<(PointFamily, Vec<(f64, f64)>), CliError> {
    if let Some(name) = &cfg.check.curve {
        return named_point_family(name).ok_or_else(|| CliError::Usage(format!("unknown curve family '{name}'")));
    }
    let chart = cfg.surface_chart()?;
    let family = cfg.family()?;
    let op = GeneralizedRadon::translation_invariant(&chart, &family);
    let mut st: Vec<(f64, f64)> = family.param_box().to_vec();
    st.extend(chart.axes().iter().map(|a| (a.lo, a.hi)));
    Ok((PointFamily::from_radon(&op), st))
}

pub fn run_condition(cfg: &RunConfig, condition: Condition) -> Result<RankReport, CliError> {
    let sampling = &cfg.check.sampling;
    let report = match condition {
        Condition::FamilyRank => {
            let family = cfg.family()?;
            let n = family.ambient_dim();
            let x_box = boxes(&cfg.check.x_box).unwrap_or_else(|| vec![(-1.0, 1.0); n]);
            check_family_rank(&family, &x_box, sampling)?
        }
        Condition::TangentRank => check_tangent_rank(&cfg.family()?, &cfg.surface_chart()?, sampling)?,
        Condition::Christ => check_christ_condition(&cfg.family()?, &cfg.surface_chart()?, sampling)?,
        Condition::CurvePullback | Condition::SurfacePullback => {
            let (fam, st) = point_family(cfg)?;
            let st = boxes(&cfg.check.st_box).unwrap_or(st);
            let ys = cfg.check.y_samples.clone().unwrap_or_else(|| vec![vec![0.0; fam.n]]);
            if condition == Condition::CurvePullback {
                check_curve_pullback(&fam, &ys, &st, sampling)?
            } else {
                check_surface_pullback(&fam, &ys, &st, sampling)?
            }
        }
        Condition::GraphRank => {
            let name = cfg.check.graph.as_ref().ok_or_else(|| CliError::Usage("the graph rank check needs --graph".into()))?;
            let (n, g, st) = named_graph(name).ok_or_else(|| CliError::Usage(format!("unknown graph '{name}'")))?;
            let st = boxes(&cfg.check.st_box).unwrap_or(st);
            check_graph_rank(g.as_ref(), n, &st, sampling)?
        }
    };
    Ok(report)
}

#[derive(Serialize)]
struct CheckResult {
    expect: Expect,
    reports: Vec<RankReport>,
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut reports = Vec::new();
    for token in &cfg.check.conditions {
        let c: Condition = token.parse()?;
        let mut r = run_condition(cfg, c)?;
        if !cfg.check.keep_samples {
            r.samples.clear();
        }
        reports.push(r);
    }
    let pass = reports.iter().all(|r| match cfg.check.expect {
        Expect::Pass => r.pass,
        Expect::Fail => !r.pass,
        _ => true,
    });
    let summary = reports
        .iter()
        .map(|r| format!("{} {} (margin {:.3e})", r.condition.tag(), if r.pass { "pass" } else { "fail" }, r.min_margin))
        .collect::<Vec<_>>()
        .join("; ");
    let labels = reports.iter().map(|r| r.condition.tag().to_string()).collect();
    let rows = reports
        .iter()
        .map(|r| vec![if r.pass { 1.0 } else { 0.0 }, r.min_margin, r.scale, r.evaluations as f64])
        .collect();
    Ok(Outcome {
        schema: "radonlab.check/1",
        result: to_value(&CheckResult { expect: cfg.check.expect, reports })?,
        csv_header: ["condition", "pass", "min_margin", "scale", "evaluations"].map(String::from).to_vec(),
        csv_rows: rows,
        csv_labels: labels,
        pass,
        summary: format!("{summary}{}", if pass { "" } else { ": mismatch" }),
        grid: None,
    })
}

#[derive(Serialize)]
struct ApplyResult {
    input_dims: Vec<usize>,
    output_dims: Vec<usize>,
    /// Parameter samples stacked along the first output axis.
    params: Vec<Vec<f64>>,
    weights: Vec<f64>,
    input_l2: f64,
    output_l2: Vec<f64>,
    mass: f64,
}

fn l2(f: &GridField) -> f64 {
    crate::probes::lp_norm(f, Exponent::Finite(2.0))
}

pub fn cmd_apply(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let a = &cfg.apply;
    let chart = cfg.surface_chart()?;
    let n = chart.ambient_dim();
    let f = match &a.input {
        InputField::File { path } => read_grid_file(path)?,
        InputField::Gaussian { sigma } => {
            let s2 = sigma * sigma;
            GridField::from_fn(&vec![a.cells; n], &vec![(-a.half_width, a.half_width); n], |x| {
                (-x.iter().map(|v| v * v).sum::<f64>() / s2).exp()
            })?
        }
        InputField::Ball { radius } => GridField::from_fn(&vec![a.cells; n], &vec![(-a.half_width, a.half_width); n], |x| {
            if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius { 1.0 } else { 0.0 }
        })?,
    };
    if f.ndim() != n {
        return Err(CliError::Usage(format!("input grid is {}-dimensional but the surface lives in R^{n}", f.ndim())));
    }
    let h = f.spacings().iter().copied().fold(f64::INFINITY, f64::min);
    let mass = discretize_measure(&chart, h, a.density)?.mass();
    let (params, weights, outputs) = match &a.averaging {
        ApplyAveraging::None => {
            let m = discretize_measure(&chart, h, a.density)?;
            (vec![Vec::new()], vec![1.0], vec![convolve(&f, &m, a.method)?])
        }
        ApplyAveraging::Rotations { count } => {
            let sampler = RotationSampler::for_dim(n, *count, cfg.seed)?;
            let stack = apply_averaged(&f, &chart, &Averaging::Rotations(sampler), a.density, a.method)?;
            (stack.params, stack.weights, stack.slices)
        }
        ApplyAveraging::Family { per_axis } => {
            let family = cfg.family()?;
            let periodic = vec![false; family.param_dim()];
            let rule = ParamQuadrature::tensor(family.param_box(), *per_axis, &periodic, None);
            let stack = apply_averaged(&f, &chart, &Averaging::Family { family, rule }, a.density, a.method)?;
            (stack.params, stack.weights, stack.slices)
        }
    };
    let out_grid = if outputs.len() == 1 {
        outputs[0].clone()
    } else {
        crate::radon::ParamStack { params: params.clone(), weights: weights.clone(), slices: outputs.clone() }.to_field()?
    };
    let result = ApplyResult {
        input_dims: f.dims().to_vec(),
        output_dims: out_grid.dims().to_vec(),
        params,
        weights: weights.clone(),
        input_l2: l2(&f),
        output_l2: outputs.iter().map(l2).collect(),
        mass,
    };
    let rows = result.output_l2.iter().zip(&weights).enumerate().map(|(i, (v, w))| vec![i as f64, *w, *v]).collect();
    let summary = format!("applied to a {:?} grid, {} output slice(s), wrote {:?} grid", f.dims(), outputs.len(), out_grid.dims());
    Ok(Outcome {
        schema: "radonlab.apply/1",
        result: to_value(&result)?,
        csv_header: ["slice", "weight", "output_l2"].map(String::from).to_vec(),
        csv_rows: rows,
        csv_labels: Vec::new(),
        pass: true,
        summary,
        grid: Some(out_grid),
    })
}

#[derive(Serialize)]
struct MuHatRow {
    xi: Vec<f64>,
    value: Complex64,
    modulus: f64,
    closed_form: Option<Complex64>,
    rel_err: Option<f64>,
}

pub fn cmd_mu_hat(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = &cfg.mu_hat;
    let chart = cfg.surface_chart()?;
    let n = chart.ambient_dim();
    let t = transform_for(&chart, &cfg.quad)?;
    let oracle: Option<Box<dyn FourierTransform>> = match chart.kind() {
        ChartKind::Circle { .. } => Some(Box::new(CircleTransform::new(&chart, cfg.quad.clone())?)),
        _ => None,
    };
    let xis = if m.xi.is_empty() {
        let dir = default_direction(n, &m.direction)?;
        FrequencyGrid::dyadic_levels(m.rho_min, m.levels).into_iter().map(|r| dir.iter().map(|c| c * r).collect()).collect()
    } else {
        m.xi.clone()
    };
    let mut rows = Vec::new();
    for xi in xis {
        if xi.len() != n {
            return Err(CliError::Usage(format!("frequency {xi:?} is not in R^{n}")));
        }
        let value = t.eval(&xi)?;
        let closed = oracle.as_ref().map(|o| o.eval(&xi)).transpose()?;
        let rel_err = closed.map(|c| (value - c).norm() / c.norm().max(f64::MIN_POSITIVE));
        rows.push(MuHatRow { modulus: value.norm(), xi, value, closed_form: closed, rel_err });
    }
    let mut header: Vec<String> = (0..n).map(|i| format!("xi{i}")).collect();
    header.extend(["re", "im", "abs", "rel_err"].map(String::from));
    let csv_rows = rows
        .iter()
        .map(|r| {
            let mut v = r.xi.clone();
            v.extend([r.value.re, r.value.im, r.modulus, r.rel_err.unwrap_or(f64::NAN)]);
            v
        })
        .collect();
    let worst = rows.iter().filter_map(|r| r.rel_err).fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))));
    let summary = match worst {
        Some(e) => format!("{} frequencies, largest relative deviation from the closed form {e:.3e}", rows.len()),
        None => format!("{} frequencies", rows.len()),
    };
    Ok(Outcome {
        schema: "radonlab.mu_hat/1",
        result: to_value(&rows)?,
        csv_header: header,
        csv_rows,
        csv_labels: Vec::new(),
        pass: true,
        summary,
        grid: None,
    })
}

pub fn execute(cfg: &RunConfig, tag: CommandTag) -> Result<Outcome, CliError> {
    match tag {
        CommandTag::Decay => cmd_decay(cfg),
        CommandTag::Probe => cmd_probe(cfg),
        CommandTag::Check => cmd_check(cfg),
        CommandTag::Apply => cmd_apply(cfg),
        CommandTag::MuHat => cmd_mu_hat(cfg),
    }
}

/// Resolves, runs inside a pool of the configured size and writes reports.
pub fn run_resolved(cfg: &RunConfig, tag: CommandTag) -> Result<(Outcome, Written), CliError> {
    let threads = cfg.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(usage)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let out = pool.install(|| execute(cfg, tag))?;
    let written = write_outputs(cfg, tag, &out, started, clock.elapsed().as_secs_f64(), threads)?;
    Ok((out, written))
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let tag = cli.tag();
    let outcome = cli.resolve().and_then(|cfg| run_resolved(&cfg, tag));
    match outcome {
        Ok((out, written)) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}: {}", tag.name(), out.summary);
            let _ = writeln!(stdout, "report: {}", written.report.display());
            if out.pass { EXIT_PASS } else { EXIT_MISMATCH }
        }
        Err(e) => {
            eprintln!("radonlab {}: {e}", tag.name());
            e.exit_code()
        }
    }
}
