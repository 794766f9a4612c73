//! Directional averages of `|μ̂(ρω)|`, dyadic sweeps, power-law fits and
//! the exponents they are compared against.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{apply_family, bump, ChartKind, GeometryError, ScalarFn, SurfaceChart, TransformFamily};
use crate::numerics::{gauss_legendre, pairwise_sum, Exponent};
use crate::oscillatory::{
    affine_image_transform, transform_for, ChartTransform, DirectionSet, FourierTransform, FrequencyGrid, OscillatoryError,
    QuadConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecayError {
    #[error(transparent)]
    Oscillatory(#[from] OscillatoryError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("a fit needs at least {min} levels, got {got}")]
    TooFewLevels { got: usize, min: usize },
    #[error("average at level {index} is not positive ({value:e})")]
    NonPositive { index: usize, value: f64 },
    #[error("{got} directions at rho = {rho} but at least {min} are required")]
    TooFewDirections { got: usize, min: usize, rho: f64 },
    #[error("invalid exponent: {0}")]
    Exponent(String),
    #[error("levels and averages differ in length ({0} vs {1})")]
    Length(usize, usize),
}

/// Minimum number of levels accepted by the fit.
pub const MIN_FIT_LEVELS: usize = 5;

/// Smallest admissible direction count at radius ρ: `max(64, 4ρ^{1/2})`, or
/// `max(64, 4ρ^{(n−1)/2})` for the sampled supremum.
pub fn min_direction_count(n: usize, rho: f64, p: Exponent) -> usize {
    let power = if p.is_infinite() { (n as f64 - 1.0) / 2.0 } else { 0.5 };
    64usize.max((4.0 * rho.max(0.0).powf(power)).ceil() as usize)
}

/// `{Σ_ω w_ω |μ̂(ρω)|^p}^{1/p}`, or the maximum over sampled ω for `p = ∞`.
pub fn spherical_average(t: &dyn FourierTransform, p: Exponent, rho: f64, dirs: &DirectionSet) -> Result<f64, DecayError> {
    spherical_average_estimate(t, p, rho, dirs).map(|e| e.value)
}

/// A directional average with its sampling standard error (zero for `p = ∞`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AverageEstimate {
    pub value: f64,
    pub stderr: f64,
}

pub fn spherical_average_estimate(t: &dyn FourierTransform, p: Exponent, rho: f64, dirs: &DirectionSet) -> Result<AverageEstimate, DecayError> {
    p.check_range(1.0, 64.0).map_err(DecayError::Exponent)?;
    let min = min_direction_count(t.ambient_dim(), rho, p);
    if dirs.len() < min {
        return Err(DecayError::TooFewDirections { got: dirs.len(), min, rho });
    }
    let mags: Vec<f64> = dirs
        .directions
        .par_iter()
        .map(|w| {
            let xi: Vec<f64> = w.iter().map(|c| c * rho).collect();
            t.eval(&xi).map(|v| v.norm())
        })
        .collect::<Result<_, _>>()?;
    Ok(match p {
        Exponent::Infinite => AverageEstimate { value: mags.iter().copied().fold(0.0, f64::max), stderr: 0.0 },
        Exponent::Finite(q) => {
            let g: Vec<f64> = mags.iter().map(|m| m.powf(q)).collect();
            let terms: Vec<f64> = g.iter().zip(&dirs.weights).map(|(v, w)| w * v).collect();
            let mean = pairwise_sum(&terms);
            let var_terms: Vec<f64> = g.iter().zip(&dirs.weights).map(|(v, w)| w * (v - mean).powi(2)).collect();
            let se_mean = (pairwise_sum(&var_terms) / (g.len() as f64 - 1.0).max(1.0)).sqrt();
            let value = mean.powf(1.0 / q);
            // d(m^{1/q}) = m^{1/q−1}/q · dm
            let stderr = if mean > 0.0 { value / (q * mean) * se_mean } else { 0.0 };
            AverageEstimate { value, stderr }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub intercept: f64,
}

/// Least-squares slope of `log₂ A` against `log₂ ρ`.
pub fn fit_decay_exponent(levels: &[f64], averages: &[f64]) -> Result<SlopeFit, DecayError> {
    if levels.len() != averages.len() {
        return Err(DecayError::Length(levels.len(), averages.len()));
    }
    if levels.len() < MIN_FIT_LEVELS {
        return Err(DecayError::TooFewLevels { got: levels.len(), min: MIN_FIT_LEVELS });
    }
    for (i, (&r, &a)) in levels.iter().zip(averages).enumerate() {
        if !(a > 0.0) || !a.is_finite() {
            return Err(DecayError::NonPositive { index: i, value: a });
        }
        if !(r > 0.0) {
            return Err(DecayError::NonPositive { index: i, value: r });
        }
    }
    let x: Vec<f64> = levels.iter().map(|v| v.log2()).collect();
    let y: Vec<f64> = averages.iter().map(|v| v.log2()).collect();
    log_log_fit(&x, &y)
}

pub(crate) fn log_log_fit(x: &[f64], y: &[f64]) -> Result<SlopeFit, DecayError> {
    let m = x.len() as f64;
    let xm = x.iter().sum::<f64>() / m;
    let ym = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let syy: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DecayError::TooFewLevels { got: 1, min: MIN_FIT_LEVELS });
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ssr / syy };
    Ok(SlopeFit { slope, stderr, r_squared, intercept })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Smooth surface, `ρ^{−k/2}`.
    Smooth,
    Subcritical,
    Critical,
    Supercritical,
}

/// Surface data that determines the predicted exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SurfaceClass {
    Smooth { k: usize },
    Beta { n: usize, beta: f64 },
}

impl SurfaceClass {
    pub fn of_chart(chart: &SurfaceChart) -> Self {
        match chart.kind() {
            ChartKind::BetaSurface { beta } => SurfaceClass::Beta { n: chart.ambient_dim(), beta: *beta },
            _ => SurfaceClass::Smooth { k: chart.param_dim() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub slope: f64,
    pub regime: Regime,
    /// Power of `log ρ` multiplying `ρ^slope` at the critical exponent.
    pub log_power: Option<f64>,
}

/// `2(β−1)/(β−2)`.
pub fn critical_exponent(beta: f64) -> f64 {
    2.0 * (beta - 1.0) / (beta - 2.0)
}

/// Predicted power of ρ for the directional `L^p` average.
pub fn predicted_slope(class: SurfaceClass, p: Exponent) -> Prediction {
    match class {
        SurfaceClass::Smooth { k } => Prediction { slope: -(k as f64) / 2.0, regime: Regime::Smooth, log_power: None },
        SurfaceClass::Beta { n, beta } => {
            let m = n as f64 - 1.0;
            let pc = critical_exponent(beta);
            let pv = p.value();
            if !p.is_infinite() && (pv - pc).abs() <= 1e-12 * pc {
                Prediction {
                    slope: -m / 2.0,
                    regime: Regime::Critical,
                    log_power: Some((beta - 2.0) * m / (2.0 * (beta - 1.0))),
                }
            } else if pv < pc {
                Prediction { slope: -m / 2.0, regime: Regime::Subcritical, log_power: None }
            } else {
                let ip = p.reciprocal();
                Prediction { slope: -m * (ip + 1.0 / beta - ip / beta), regime: Regime::Supercritical, log_power: None }
            }
        }
    }
}

/// Direction count per level: `max(min_count, ceil(coef ρ^power))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectionBudget {
    pub coef: f64,
    pub power: f64,
}

impl Default for DirectionBudget {
    fn default() -> Self {
        DirectionBudget { coef: 4.0, power: 0.5 }
    }
}

impl DirectionBudget {
    /// Default budget for a surface class. Near a flat point of order β the
    /// transform is concentrated in a cone of angular width `ρ^{−(1−1/β)}`
    /// per transverse axis, so the count grows like `ρ^{(n−1)(1−1/β)}`.
    pub fn for_class(class: SurfaceClass) -> Self {
        match class {
            SurfaceClass::Smooth { .. } => DirectionBudget::default(),
            SurfaceClass::Beta { n, beta } => DirectionBudget { coef: 32.0, power: (n as f64 - 1.0) * (1.0 - 1.0 / beta) },
        }
    }

    /// As [`DirectionBudget::for_class`], except that flat polygon edges put
    /// the transform's mass in cones of width `ρ^{−1}` about each edge normal,
    /// so the count grows linearly.
    pub fn for_chart(chart: &SurfaceChart) -> Self {
        match chart.kind() {
            ChartKind::PolygonBoundary(_) => DirectionBudget { coef: 16.0, power: 1.0 },
            _ => DirectionBudget::for_class(SurfaceClass::of_chart(chart)),
        }
    }

    pub fn count(&self, n: usize, rho: f64, p: Exponent) -> usize {
        min_direction_count(n, rho, p).max((self.coef * rho.powf(self.power)).ceil() as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub p: Exponent,
    pub rho_min: f64,
    pub levels: usize,
    pub directions: DirectionBudget,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { p: Exponent::Finite(2.0), rho_min: 32.0, levels: 7, directions: DirectionBudget::default(), seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub p: Exponent,
    pub rho_levels: Vec<f64>,
    pub direction_counts: Vec<usize>,
    pub averages: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub predicted_slope: f64,
    pub regime: Regime,
    pub log_power: Option<f64>,
}

impl DecayReport {
    pub fn from_averages(p: Exponent, rho_levels: Vec<f64>, direction_counts: Vec<usize>, averages: Vec<f64>, prediction: Prediction) -> Result<Self, DecayError> {
        let fit = fit_decay_exponent(&rho_levels, &averages)?;
        Ok(DecayReport {
            p,
            rho_levels,
            direction_counts,
            averages,
            fitted_slope: fit.slope,
            slope_stderr: fit.stderr,
            r_squared: fit.r_squared,
            predicted_slope: prediction.slope,
            regime: prediction.regime,
            log_power: prediction.log_power,
        })
    }

    pub fn within(&self, band: f64) -> bool {
        (self.fitted_slope - self.predicted_slope).abs() <= band
    }
}

/// Dyadic sweep of directional averages with a slope fit.
pub fn decay_sweep(t: &dyn FourierTransform, class: SurfaceClass, cfg: &SweepConfig) -> Result<DecayReport, DecayError> {
    let n = t.ambient_dim();
    let grid = FrequencyGrid::spherical(n, cfg.rho_min, cfg.levels, |r| cfg.directions.count(n, r, cfg.p), cfg.seed);
    let mut averages = Vec::with_capacity(cfg.levels);
    for (rho, dirs) in grid.rho_levels.iter().zip(&grid.directions) {
        averages.push(spherical_average(t, cfg.p, *rho, dirs)?);
    }
    let counts = grid.directions.iter().map(|d| d.len()).collect();
    DecayReport::from_averages(cfg.p, grid.rho_levels, counts, averages, predicted_slope(class, cfg.p))
}

/// Pointwise `|μ̂(ρω)|` along a fixed ray with a slope fit against `slope`.
pub fn ray_sweep(t: &dyn FourierTransform, direction: &[f64], rho_min: f64, levels: usize, prediction: Prediction) -> Result<DecayReport, DecayError> {
    let grid = FrequencyGrid::ray(direction, rho_min, levels);
    let mut averages = Vec::with_capacity(levels);
    for (rho, dirs) in grid.rho_levels.iter().zip(&grid.directions) {
        let xi: Vec<f64> = dirs.directions[0].iter().map(|c| c * rho).collect();
        averages.push(t.eval(&xi)?.norm());
    }
    DecayReport::from_averages(Exponent::Infinite, grid.rho_levels, vec![1; levels], averages, prediction)
}

/// Quadrature on a family parameter box, weighted by Ψ and normalized to
/// total weight 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamQuadrature {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl ParamQuadrature {
    /// Tensor rule with `per_axis` nodes: equally spaced on periodic axes,
    /// Gauss–Legendre otherwise. Nodes with `Ψ(s) = 0` are dropped.
    pub fn tensor(param_box: &[(f64, f64)], per_axis: usize, periodic: &[bool], psi: Option<&ScalarFn>) -> Self {
        let (gx, gw) = gauss_legendre(per_axis);
        let axes: Vec<Vec<(f64, f64)>> = param_box
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| {
                if periodic.get(i).copied().unwrap_or(false) {
                    let h = (hi - lo) / per_axis as f64;
                    (0..per_axis).map(|j| (lo + j as f64 * h, h)).collect()
                } else {
                    gx.iter().zip(&gw).map(|(x, w)| (lo + (x + 1.0) * (hi - lo) / 2.0, w * (hi - lo) / 2.0)).collect()
                }
            })
            .collect();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        'outer: loop {
            let s: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i].0).collect();
            let w: f64 = idx.iter().zip(&axes).map(|(&i, a)| a[i].1).product();
            let psi_v = psi.map_or(1.0, |f| f(&s));
            if psi_v != 0.0 {
                nodes.push(s);
                weights.push(w * psi_v);
            }
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        let total = pairwise_sum(&weights);
        weights.iter_mut().for_each(|w| *w /= total);
        ParamQuadrature { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Bump on the ball inscribed in the parameter box (in box-normalized
/// coordinates).
pub fn box_bump(param_box: &[(f64, f64)]) -> ScalarFn {
    let b = param_box.to_vec();
    Arc::new(move |s: &[f64]| {
        let v: Vec<f64> = s.iter().zip(&b).map(|(x, (lo, hi))| (2.0 * x - lo - hi) / (hi - lo)).collect();
        bump(&v, &vec![0.0; v.len()], 1.0)
    })
}

/// `(Σ_s w_s |μ̂_s(ξ)|²)^{1/2}` for the family of pushed-forward measures.
pub struct FamilyAverage {
    family: TransformFamily,
    chart: SurfaceChart,
    base: Option<Box<dyn FourierTransform>>,
    rule: ParamQuadrature,
    cfg: QuadConfig,
}

impl FamilyAverage {
    pub fn new(chart: SurfaceChart, family: TransformFamily, rule: ParamQuadrature, cfg: QuadConfig) -> Result<Self, DecayError> {
        if family.ambient_dim() != chart.ambient_dim() {
            return Err(GeometryError::Dimension("family and chart dimensions differ".into()).into());
        }
        for s in &rule.nodes {
            family.check_param(s)?;
        }
        let base = if family.is_affine() { Some(transform_for(&chart, &cfg)?) } else { None };
        Ok(FamilyAverage { family, chart, base, rule, cfg })
    }

    pub fn rule(&self) -> &ParamQuadrature {
        &self.rule
    }

    /// `μ̂_s(ξ)`.
    pub fn transform_at(&self, s: &[f64], xi: &[f64]) -> Result<Complex64, DecayError> {
        match &self.base {
            Some(base) => {
                let (a, b) = self.family.affine_part(s).expect("affine family");
                Ok(affine_image_transform(base.as_ref(), &a, &b, xi)?)
            }
            None => {
                let moved = apply_family(&self.family, s, &self.chart)?;
                Ok(ChartTransform::new(moved, self.cfg.clone())?.eval(xi)?)
            }
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Result<f64, DecayError> {
        let terms: Vec<f64> = self
            .rule
            .nodes
            .par_iter()
            .zip(&self.rule.weights)
            .map(|(s, w)| self.transform_at(s, xi).map(|v| w * v.norm_sqr()))
            .collect::<Result<_, _>>()?;
        Ok(pairwise_sum(&terms).sqrt())
    }
}

/// Family-averaged `L²` decay of `μ̂_s(ξ)` at a single frequency.
pub fn family_average_decay(
    chart: &SurfaceChart,
    family: &TransformFamily,
    xi: &[f64],
    psi: Option<&ScalarFn>,
    per_axis: usize,
    cfg: &QuadConfig,
) -> Result<f64, DecayError> {
    let periodic = vec![false; family.param_dim()];
    let rule = ParamQuadrature::tensor(family.param_box(), per_axis, &periodic, psi);
    FamilyAverage::new(chart.clone(), family.clone(), rule, cfg.clone())?.eval(xi)
}

/// Dyadic sweep of the family average along `ρΞ`.
pub fn family_decay_sweep(avg: &FamilyAverage, direction: &[f64], rho_min: f64, levels: usize, prediction: Prediction) -> Result<DecayReport, DecayError> {
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rhos = FrequencyGrid::dyadic_levels(rho_min, levels);
    let mut averages = Vec::with_capacity(levels);
    for &rho in &rhos {
        let xi: Vec<f64> = direction.iter().map(|c| c * rho / norm).collect();
        averages.push(avg.eval(&xi)?);
    }
    DecayReport::from_averages(Exponent::Finite(2.0), rhos, vec![avg.rule().len(); levels], averages, prediction)
}
