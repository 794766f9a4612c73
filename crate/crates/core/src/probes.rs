//! Norm probes for the `L^p → L^q` and mixed-norm bounds of averaging
//! operators: grid norms, Knapp-type scaling families, and the exponent
//! pairs the bounds assert.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decay::log_log_fit;
use crate::geometry::{GeometryError, RotationSampler, SurfaceChart};
use crate::numerics::{pairwise_sum, Exponent};
use crate::radon::{discretize_measure, convolve, Averaging, AveragedOperator, ConvolveMethod, GridField, ParamStack, RadonError};

/// Coarsest admissible grid: `h ≤ δ / MIN_CELLS_PER_DELTA`.
pub const MIN_CELLS_PER_DELTA: f64 = 4.0;
/// Fewest δ-levels in a probe.
pub const MIN_PROBE_LEVELS: usize = 4;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error(transparent)]
    Radon(#[from] RadonError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid delta sequence: {0}")]
    Deltas(String),
    #[error("grid spacing {spacing:e} is too coarse for delta = {delta:e}; need h <= {required:e}")]
    Resolution { delta: f64, spacing: f64, required: f64 },
    #[error("delta = {delta:e} needs {cells} cells per axis, above the cap of {max}")]
    GridTooLarge { delta: f64, cells: usize, max: usize },
    #[error("norm at level {index} is not positive ({value:e})")]
    NonPositive { index: usize, value: f64 },
    #[error("invalid exponent: {0}")]
    Exponent(String),
    #[error("unsupported exponent tag: {0}")]
    Unsupported(String),
}

/// `(Σ |v|^p dV)^{1/p}` over the cells, `max |v|` for `p = ∞`.
pub fn lp_norm(field: &GridField, p: Exponent) -> f64 {
    let top = field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    match p {
        Exponent::Infinite => top,
        Exponent::Finite(p) => {
            if top == 0.0 {
                return 0.0;
            }
            // scaled by the maximum so large p does not overflow
            let terms: Vec<f64> = field.values().iter().map(|v| (v.abs() / top).powf(p)).collect();
            top * (pairwise_sum(&terms) * field.cell_volume()).powf(1.0 / p)
        }
    }
}

/// `L^outer` over the parameter weights of the `L^inner` slice norms.
pub fn mixed_norm(stack: &ParamStack, inner: Exponent, outer: Exponent) -> f64 {
    let norms: Vec<f64> = stack.slices.iter().map(|s| lp_norm(s, inner)).collect();
    match outer {
        Exponent::Infinite => norms.iter().copied().fold(0.0, f64::max),
        Exponent::Finite(r) => {
            let top = norms.iter().copied().fold(0.0, f64::max);
            if top == 0.0 {
                return 0.0;
            }
            let terms: Vec<f64> = norms.iter().zip(&stack.weights).map(|(v, w)| w * (v / top).powf(r)).collect();
            top * pairwise_sum(&terms).powf(1.0 / r)
        }
    }
}

/// Test functions `f_δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    /// Indicator of the ball of radius δ about the origin.
    Ball,
    /// Indicator of `{|x_a| ≤ δ/2, |x_i| ≤ L/2 for i ≠ a}` with `a` the normal
    /// axis and `L` the plate length.
    Plate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeAveraging {
    FixedTheta,
    Rotations { count: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnappConfig {
    pub p: Exponent,
    /// Inner (spatial) exponent of the output norm.
    pub q: Exponent,
    /// Outer exponent over the rotation parameter; defaults to `q`.
    pub outer: Option<Exponent>,
    pub deltas: Vec<f64>,
    pub family: ProbeFamily,
    pub plate_length: f64,
    pub normal_axis: Option<usize>,
    /// Grid box is `[−half_width, half_width]^n`.
    pub half_width: f64,
    pub cells_per_delta: f64,
    pub max_cells: usize,
    pub density: f64,
    pub method: ConvolveMethod,
    /// Slopes at or above `−bounded_tol` read as bounded.
    pub bounded_tol: f64,
}

impl Default for KnappConfig {
    fn default() -> Self {
        KnappConfig {
            p: Exponent::Finite(1.5),
            q: Exponent::Finite(3.0),
            outer: None,
            deltas: (3..=7).map(|j| 2f64.powi(-j)).collect(),
            family: ProbeFamily::Ball,
            plate_length: 1.0,
            normal_axis: None,
            half_width: 1.0,
            cells_per_delta: MIN_CELLS_PER_DELTA,
            max_cells: 1024,
            density: 2.0,
            method: ConvolveMethod::Fft,
            bounded_tol: 0.02,
        }
    }
}

/// Default per-axis cell cap: 1024 in the plane, 128 in space.
pub fn default_max_cells(n: usize) -> usize {
    if n <= 2 { 1024 } else { 128 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    BoundedConsistent,
    Blowup { rate: f64 },
}

impl Verdict {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Verdict::BoundedConsistent)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormProbeReport {
    pub p: Exponent,
    pub q: Exponent,
    pub outer: Exponent,
    pub family: ProbeFamily,
    pub averaging: ProbeAveraging,
    pub deltas: Vec<f64>,
    pub cells: Vec<usize>,
    pub input_norms: Vec<f64>,
    pub output_norms: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log ratio` against `log δ`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub verdict: Verdict,
}

fn check_deltas(deltas: &[f64]) -> Result<(), ProbeError> {
    if deltas.len() < MIN_PROBE_LEVELS {
        return Err(ProbeError::Deltas(format!("{} levels given, at least {MIN_PROBE_LEVELS} required", deltas.len())));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(ProbeError::Deltas("every delta must be positive".into()));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ProbeError::Deltas("deltas must be strictly decreasing".into()));
    }
    Ok(())
}

/// Cells per axis for the level: the smallest count with `h ≤ δ/cells_per_delta`.
fn level_cells(cfg: &KnappConfig, delta: f64) -> Result<usize, ProbeError> {
    if !(cfg.cells_per_delta >= MIN_CELLS_PER_DELTA) {
        let spacing = delta / cfg.cells_per_delta;
        return Err(ProbeError::Resolution { delta, spacing, required: delta / MIN_CELLS_PER_DELTA });
    }
    let cells = (2.0 * cfg.half_width * cfg.cells_per_delta / delta * (1.0 - 1e-12)).ceil() as usize;
    if cells > cfg.max_cells {
        return Err(ProbeError::GridTooLarge { delta, cells, max: cfg.max_cells });
    }
    Ok(cells)
}

pub fn probe_field(n: usize, cells: usize, half_width: f64, family: ProbeFamily, delta: f64, plate_length: f64, normal_axis: usize) -> Result<GridField, RadonError> {
    GridField::from_fn(&vec![cells; n], &vec![(-half_width, half_width); n], |x| {
        let inside = match family {
            ProbeFamily::Ball => x.iter().map(|v| v * v).sum::<f64>() <= delta * delta,
            ProbeFamily::Plate => x
                .iter()
                .enumerate()
                .all(|(i, v)| if i == normal_axis { v.abs() <= delta / 2.0 } else { v.abs() <= plate_length / 2.0 }),
        };
        if inside { 1.0 } else { 0.0 }
    })
}

/// Fits `log(‖Rf_δ‖/‖f_δ‖_p)` against `log δ` over the δ-sequence.
pub fn knapp_probe(chart: &SurfaceChart, averaging: &ProbeAveraging, cfg: &KnappConfig) -> Result<NormProbeReport, ProbeError> {
    check_deltas(&cfg.deltas)?;
    for e in [cfg.p, cfg.q].into_iter().chain(cfg.outer) {
        e.check_range(1.0, f64::INFINITY).map_err(ProbeError::Exponent)?;
    }
    let n = chart.ambient_dim();
    let normal_axis = cfg.normal_axis.unwrap_or(n - 1);
    if normal_axis >= n {
        return Err(ProbeError::Deltas(format!("normal axis {normal_axis} out of range for R^{n}")));
    }
    let cells = cfg.deltas.iter().map(|&d| level_cells(cfg, d)).collect::<Result<Vec<_>, _>>()?;
    let outer = cfg.outer.unwrap_or(cfg.q);
    let sampler = match averaging {
        ProbeAveraging::FixedTheta => None,
        ProbeAveraging::Rotations { count, seed } => Some(RotationSampler::for_dim(n, *count, *seed)?),
    };
    let mut input_norms = Vec::with_capacity(cells.len());
    let mut output_norms = Vec::with_capacity(cells.len());
    for (&delta, &c) in cfg.deltas.iter().zip(&cells) {
        let f = probe_field(n, c, cfg.half_width, cfg.family, delta, cfg.plate_length, normal_axis)?;
        let out = match &sampler {
            None => {
                let m = discretize_measure(chart, f.spacing(0), cfg.density)?;
                lp_norm(&convolve(&f, &m, cfg.method)?, cfg.q)
            }
            Some(s) => {
                let op = AveragedOperator::new(chart, &Averaging::Rotations(s.clone()), &f, cfg.density)?;
                mixed_norm(&op.apply(&f, cfg.method)?, cfg.q, outer)
            }
        };
        input_norms.push(lp_norm(&f, cfg.p));
        output_norms.push(out);
    }
    report(cfg, averaging, cells, input_norms, output_norms, outer)
}

fn report(
    cfg: &KnappConfig,
    averaging: &ProbeAveraging,
    cells: Vec<usize>,
    input_norms: Vec<f64>,
    output_norms: Vec<f64>,
    outer: Exponent,
) -> Result<NormProbeReport, ProbeError> {
    for (i, (&a, &b)) in input_norms.iter().zip(&output_norms).enumerate() {
        for v in [a, b] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ProbeError::NonPositive { index: i, value: v });
            }
        }
    }
    let ratios: Vec<f64> = output_norms.iter().zip(&input_norms).map(|(o, i)| o / i).collect();
    let x: Vec<f64> = cfg.deltas.iter().map(|d| d.log2()).collect();
    let y: Vec<f64> = ratios.iter().map(|r| r.log2()).collect();
    let fit = log_log_fit(&x, &y).map_err(|e| ProbeError::Deltas(e.to_string()))?;
    let verdict = if fit.slope >= -cfg.bounded_tol { Verdict::BoundedConsistent } else { Verdict::Blowup { rate: fit.slope } };
    Ok(NormProbeReport {
        p: cfg.p,
        q: cfg.q,
        outer,
        family: cfg.family,
        averaging: averaging.clone(),
        deltas: cfg.deltas.clone(),
        cells,
        input_norms,
        output_norms,
        ratios,
        slope: fit.slope,
        slope_stderr: fit.stderr,
        verdict,
    })
}

/// The bounds whose exponents are tabulated.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundTag {
    /// Rotations of a convex plane curve.
    ConvexCurve,
    /// Rotations of a convex hypersurface in R^n.
    ConvexHypersurface { n: usize },
    /// Rotations of a smooth k-surface in R^n.
    SmoothSurface { n: usize, k: usize },
    /// Translation-invariant family `T_s` of a convex hypersurface.
    TransformedHypersurface { n: usize },
    /// Generalized Radon transform over k-surfaces with nondegenerate
    /// canonical relation.
    NondegenerateFamily { n: usize, k: usize },
    /// Rotations of `x_n = |x'|^β`, mixed norm for the given `p`.
    BetaMixed {
        n: usize,
        #[serde(serialize_with = "ratio_text")]
        beta: Rational,
        #[serde(serialize_with = "ratio_text")]
        p: Rational,
    },
    /// Family of curves whose pullback ratio has no critical points.
    CurveFamily { n: usize },
}

pub type Rational = Ratio<i64>;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSet {
    /// `L^p → L^q`.
    Pair {
        #[serde(serialize_with = "ratio_text")]
        p: Rational,
        #[serde(serialize_with = "ratio_text")]
        q: Rational,
    },
    /// `L^p → L^r(SO(n); L^{p′})`; `r = None` is `∞`.
    Mixed {
        #[serde(serialize_with = "ratio_text")]
        p: Rational,
        #[serde(serialize_with = "ratio_text")]
        p_prime: Rational,
        #[serde(serialize_with = "ratio_or_inf")]
        r: Option<Rational>,
    },
}

impl ExponentSet {
    pub fn as_f64(&self) -> (f64, f64, Option<f64>) {
        let f = |r: &Rational| *r.numer() as f64 / *r.denom() as f64;
        match self {
            ExponentSet::Pair { p, q } => (f(p), f(q), None),
            ExponentSet::Mixed { p, p_prime, r } => (f(p), f(p_prime), Some(r.as_ref().map_or(f64::INFINITY, f))),
        }
    }
}

fn ratio_text<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ratio_or_inf<S: serde::Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => ratio_text(r, s),
        None => s.serialize_str("inf"),
    }
}

fn ratio(a: i64, b: i64) -> Rational {
    Ratio::new(a, b)
}

/// Exponents on the duality line asserted by each bound.
pub fn exponent_table(tag: &BoundTag) -> Result<ExponentSet, ProbeError> {
    let dim = |n: usize| -> Result<i64, ProbeError> {
        if n < 2 {
            return Err(ProbeError::Unsupported(format!("ambient dimension {n} < 2")));
        }
        Ok(n as i64)
    };
    let surface = |n: usize, k: usize| -> Result<ExponentSet, ProbeError> {
        let n = dim(n)?;
        let k = k as i64;
        if !(1..n).contains(&k) {
            return Err(ProbeError::Unsupported(format!("surface dimension {k} outside 1..{}", n - 1)));
        }
        Ok(ExponentSet::Pair { p: ratio(2 * n - k, n), q: ratio(2 * n - k, n - k) })
    };
    match tag {
        BoundTag::ConvexCurve => Ok(ExponentSet::Pair { p: ratio(3, 2), q: ratio(3, 1) }),
        BoundTag::ConvexHypersurface { n } | BoundTag::TransformedHypersurface { n } => {
            let n = dim(*n)?;
            Ok(ExponentSet::Pair { p: ratio(n + 1, n), q: ratio(n + 1, 1) })
        }
        BoundTag::SmoothSurface { n, k } | BoundTag::NondegenerateFamily { n, k } => surface(*n, *k),
        BoundTag::CurveFamily { n } => surface(*n, 1),
        BoundTag::BetaMixed { n, beta, p } => beta_mixed(dim(*n)?, *beta, *p),
    }
}

fn beta_mixed(n: i64, beta: Rational, p: Rational) -> Result<ExponentSet, ProbeError> {
    let one = Rational::from_integer(1);
    let two = Rational::from_integer(2);
    let m = Rational::from_integer(n - 1);
    if beta <= two {
        return Err(ProbeError::Unsupported(format!("beta = {beta} must exceed 2")));
    }
    let lower = ratio(n + 1, n);
    let upper = (two * beta + two * m) / (beta + two * m);
    if p <= lower || p == upper {
        return Err(ProbeError::Unsupported(format!("p = {p} outside the open ranges ({lower}, {upper}) and ({upper}, ∞)")));
    }
    let p_prime = p / (p - one);
    let r = (p < upper).then(|| p_prime * m * (beta - one) / ((p_prime - two) * beta - two * m));
    Ok(ExponentSet::Mixed { p, p_prime, r })
}

/// `β` or `p` given as a decimal, converted to the nearest small fraction.
pub fn rational_from_f64(v: f64) -> Result<Rational, ProbeError> {
    Ratio::approximate_float(v).ok_or_else(|| ProbeError::Exponent(format!("{v} has no rational approximation")))
}

/// `‖Rf‖` for one field under every rotation sample and under the identity,
/// returned as (averaged, fixed).
pub fn rotation_vs_fixed_norms(
    chart: &SurfaceChart,
    f: &GridField,
    sampler: &RotationSampler,
    q: Exponent,
    density: f64,
    method: ConvolveMethod,
) -> Result<(f64, f64), ProbeError> {
    let op = AveragedOperator::new(chart, &Averaging::Rotations(sampler.clone()), f, density)?;
    let averaged = mixed_norm(&op.apply(f, method)?, q, q);
    let m = discretize_measure(chart, f.spacing(0), density)?;
    let fixed = lp_norm(&convolve(f, &m, method)?, q);
    Ok((averaged, fixed))
}

/// Per-level norms for several exponent pairs sharing one field family,
/// fixed θ only.
pub fn corner_slopes(chart: &SurfaceChart, cfg: &KnappConfig, pairs: &[(Exponent, Exponent)]) -> Result<Vec<f64>, ProbeError> {
    check_deltas(&cfg.deltas)?;
    let n = chart.ambient_dim();
    let axis = cfg.normal_axis.unwrap_or(n - 1);
    let levels: Vec<(GridField, GridField)> = cfg
        .deltas
        .par_iter()
        .map(|&d| {
            let c = level_cells(cfg, d)?;
            let f = probe_field(n, c, cfg.half_width, cfg.family, d, cfg.plate_length, axis)?;
            let m = discretize_measure(chart, f.spacing(0), cfg.density)?;
            let rf = convolve(&f, &m, cfg.method)?;
            Ok((f, rf))
        })
        .collect::<Result<_, ProbeError>>()?;
    pairs
        .iter()
        .map(|&(p, q)| {
            let input: Vec<f64> = levels.iter().map(|(f, _)| lp_norm(f, p)).collect();
            let output: Vec<f64> = levels.iter().map(|(_, rf)| lp_norm(rf, q)).collect();
            let cells = levels.iter().map(|(f, _)| f.dims()[0]).collect();
            let sub = KnappConfig { p, q, ..cfg.clone() };
            Ok(report(&sub, &ProbeAveraging::FixedTheta, cells, input, output, q)?.slope)
        })
        .collect()
}
