//! Sampled rank and critical-point checks for the geometric conditions that
//! make averaging operators smoothing.
//!
//! Every check assembles a small matrix per sample, takes its singular
//! values and reports the margin `σ_r / max(σ₁*, 1)`, where `r` is the
//! required rank and `σ₁*` is the largest singular value seen over the whole
//! sample cloud. A pass certifies the condition on the sampled points only.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{tensor_points, GeometryError, SurfaceChart, TransformFamily, RANK_REL_TOL};
use crate::numerics::{halton, newton_solve, singular_values_desc, sphere_directions, NewtonError};
use crate::radon::{GeneralizedRadon, SurfaceFamilyMap};

/// Floor on the margin normalizer, so that a matrix cloud vanishing up to
/// rounding cannot look full-rank.
pub const MARGIN_FLOOR: f64 = 1.0;
/// Smallest admissible `|Γ₁|` for the curve pullback check.
pub const GAMMA1_MIN: f64 = 1e-6;
/// Step of the five-point stencils used for derivatives of curves,
/// pullbacks and graph maps.
pub const STENCIL_STEP: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum NondegError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("inverting gamma_t at y = {y:?}: {source}")]
    Inversion { y: Vec<f64>, source: NewtonError },
    #[error("{m} family parameters but at least {required} are needed")]
    TooFewParameters { m: usize, required: usize },
    #[error(
        "|Gamma_1| = {value:e} at y = {y:?}, s = {s:?}, t = {t} is below {GAMMA1_MIN:e}; rotate coordinates so the first velocity component is nonzero"
    )]
    Gamma1Vanishes { y: Vec<f64>, s: Vec<f64>, t: f64, value: f64 },
    #[error("Gamma' is singular at y = {y:?}, s = {s:?}, t = {t:?} (sigma_min {sigma_min:e}, sigma_max {sigma_max:e})")]
    SingularPullback { y: Vec<f64>, s: Vec<f64>, t: Vec<f64>, sigma_min: f64, sigma_max: f64 },
    #[error("{got} evaluations, at least {required} required")]
    TooFewSamples { got: usize, required: usize },
    #[error("empty sample set: {0}")]
    EmptySample(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown condition '{0}'")]
    UnknownCondition(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `[Ξᵀ J_{T_s}; Ξᵀ J_{∂T/∂s_k}]` has rank n.
    FamilyRank,
    /// `[J_{T_s}Φ; J_{dT_s/ds}Φ]` is nonsingular for tangent directions Φ.
    TangentRank,
    /// `(s, t) ↦ Γ′·η′/Γ₁` has no critical points.
    CurvePullback,
    /// `[D_s ġ; g̈]` has rank n−1.
    GraphRank,
    /// `D_{s,t}((Γ′ᵀ)⁻¹ Γ″ᵀ η″)` has rank k.
    SurfacePullback,
    /// `[J_{T_s}γ̇, J_{T_s}γ̈, J_{dT_s/ds}γ̇]` has rank 2.
    Christ,
}

impl Condition {
    /// Short command-line tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Condition::FamilyRank => "1.4",
            Condition::TangentRank => "4.1",
            Condition::CurvePullback => "5.6",
            Condition::GraphRank => "5.8",
            Condition::SurfacePullback => "5.9",
            Condition::Christ => "christ",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = NondegError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            Condition::FamilyRank,
            Condition::TangentRank,
            Condition::CurvePullback,
            Condition::GraphRank,
            Condition::SurfacePullback,
            Condition::Christ,
        ];
        let t = s.trim().to_ascii_lowercase();
        all.into_iter()
            .find(|c| c.tag() == t || serde_json::to_value(c).ok().and_then(|v| v.as_str().map(|v| v == t)).unwrap_or(false))
            .ok_or_else(|| NondegError::UnknownCondition(s.into()))
    }
}

/// Sampling and tolerance settings shared by the checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Directions Ξ, η′ or η″ on the unit sphere.
    pub directions: usize,
    /// Family parameter samples for the family rank check.
    pub s_points: usize,
    /// Base point samples x or y.
    pub x_points: usize,
    /// Approximate number of (s, t) grid points.
    pub grid_points: usize,
    /// Points per axis of the (s, t) grid in the critical-point check, when
    /// there are at most two such axes.
    pub critical_per_axis: usize,
    pub tol: f64,
    /// Fewest evaluations accepted when two or more parameters are sampled.
    pub min_samples: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            directions: 256,
            s_points: 16,
            x_points: 4,
            grid_points: 16384,
            critical_per_axis: 64,
            tol: RANK_REL_TOL,
            min_samples: 10_000,
            seed: 0,
        }
    }
}

impl CheckConfig {
    fn required(&self, sampled_dims: usize) -> usize {
        if sampled_dims >= 2 { self.min_samples } else { self.min_samples.min(64) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankSample {
    /// Sample coordinates, concatenated in the order documented by each check.
    pub point: Vec<f64>,
    pub singular_values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub condition: Condition,
    pub required_rank: usize,
    pub tol: f64,
    /// Matrix or direction evaluations behind the verdict.
    pub evaluations: usize,
    /// `max(σ₁*, MARGIN_FLOOR)`.
    pub scale: f64,
    pub min_margin: f64,
    pub worst_point: Vec<f64>,
    /// Smallest `|∇(Γ′·η′/Γ₁)|` over the sampled points and directions, for
    /// the curve pullback check.
    pub min_gradient_norm: Option<f64>,
    pub pass: bool,
    pub samples: Vec<RankSample>,
}

fn assemble(
    condition: Condition,
    required_rank: usize,
    samples: Vec<RankSample>,
    evaluations: usize,
    required_evaluations: usize,
    cfg: &CheckConfig,
) -> Result<RankReport, NondegError> {
    if samples.is_empty() {
        return Err(NondegError::EmptySample(format!("{condition:?}")));
    }
    if evaluations < required_evaluations {
        return Err(NondegError::TooFewSamples { got: evaluations, required: required_evaluations });
    }
    let top = samples.iter().map(|s| s.singular_values.first().copied().unwrap_or(0.0)).fold(0.0f64, f64::max);
    let scale = top.max(MARGIN_FLOOR);
    let margin = |s: &RankSample| s.singular_values.get(required_rank - 1).map_or(0.0, |v| v / scale);
    let (worst, min_margin) = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, margin(s)))
        .fold((0, f64::INFINITY), |acc, (i, m)| if m < acc.1 { (i, m) } else { acc });
    Ok(RankReport {
        condition,
        required_rank,
        tol: cfg.tol,
        evaluations,
        scale,
        min_margin,
        worst_point: samples[worst].point.clone(),
        min_gradient_norm: None,
        pass: min_margin.is_finite() && min_margin > cfg.tol,
        samples,
    })
}

/// Cell-centered tensor grid with about `target` points.
pub fn param_grid(param_box: &[(f64, f64)], target: usize) -> Vec<Vec<f64>> {
    let d = param_box.len().max(1);
    let per_axis = ((target as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    grid_with(param_box, per_axis)
}

fn grid_with(param_box: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let coords: Vec<Vec<f64>> = param_box
        .iter()
        .map(|&(lo, hi)| (0..per_axis).map(|i| lo + (i as f64 + 0.5) / per_axis as f64 * (hi - lo)).collect())
        .collect();
    tensor_points(&coords)
}

/// Halton points in a box.
pub fn halton_box(param_box: &[(f64, f64)], count: usize, seed: u64) -> Vec<Vec<f64>> {
    halton(param_box.len(), count, seed)
        .into_iter()
        .map(|u| u.iter().zip(param_box).map(|(v, &(lo, hi))| lo + v * (hi - lo)).collect())
        .collect()
}

/// Unit directions in R^d; `{±1}` when d = 1.
pub fn unit_directions(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if d == 1 { vec![vec![1.0], vec![-1.0]] } else { sphere_directions(d, count, seed) }
}

fn combinations(m: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, m: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, r, cur, out);
            cur.pop();
        }
    }
    rec(0, m, r, &mut cur, &mut out);
    out
}

/// Five-point first derivative of `f` along coordinate `j`.
fn partial(f: &dyn Fn(&[f64]) -> Vec<f64>, at: &[f64], j: usize) -> Vec<f64> {
    let h = STENCIL_STEP;
    let mut p = at.to_vec();
    let mut eval = |d: f64| {
        p[j] = at[j] + d * h;
        f(&p)
    };
    let (a, b, c, d) = (eval(2.0), eval(1.0), eval(-1.0), eval(-2.0));
    (0..a.len()).map(|i| (-a[i] + 8.0 * b[i] - 8.0 * c[i] + d[i]) / (12.0 * h)).collect()
}

/// Five-point second derivative of `f` along coordinate `j`.
fn second_partial(f: &dyn Fn(&[f64]) -> Vec<f64>, at: &[f64], j: usize) -> Vec<f64> {
    let h = STENCIL_STEP;
    let mut p = at.to_vec();
    let mut eval = |d: f64| {
        p[j] = at[j] + d * h;
        f(&p)
    };
    let (a, b, z, c, d) = (eval(2.0), eval(1.0), eval(0.0), eval(-1.0), eval(-2.0));
    (0..a.len()).map(|i| (-a[i] + 16.0 * b[i] - 30.0 * z[i] + 16.0 * c[i] - d[i]) / (12.0 * h * h)).collect()
}

fn row(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

/// `[Ξᵀ J_{T_s}(x); Ξᵀ J_{∂T/∂s_k}(x)]` with k over the (n−1)-subsets of the
/// parameters; per sample the best subset is kept. Sample points are
/// `(Ξ, s, x)`.
pub fn family_rank_on(
    family: &TransformFamily,
    directions: &[Vec<f64>],
    s_samples: &[Vec<f64>],
    x_samples: &[Vec<f64>],
    cfg: &CheckConfig,
) -> Result<RankReport, NondegError> {
    let n = family.ambient_dim();
    let m = family.param_dim();
    if m + 1 < n {
        return Err(NondegError::TooFewParameters { m, required: n - 1 });
    }
    if directions.is_empty() || s_samples.is_empty() || x_samples.is_empty() {
        return Err(NondegError::EmptySample("directions, s and x samples must be nonempty".into()));
    }
    let subsets = combinations(m, n - 1);
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = s_samples.iter().flat_map(|s| x_samples.iter().map(move |x| (s, x))).collect();
    let samples: Vec<RankSample> = pairs
        .par_iter()
        .flat_map_iter(|&(s, x)| {
            let j = family.jacobian_x(s, x);
            let dj: Vec<DMatrix<f64>> = (0..m).map(|k| family.ds_jacobian(s, x, k)).collect();
            let subsets = &subsets;
            directions.iter().map(move |xi| {
                let xi = DVector::from_column_slice(xi);
                let first = j.tr_mul(&xi);
                let rows: Vec<DVector<f64>> = dj.iter().map(|d| d.tr_mul(&xi)).collect();
                let best = subsets
                    .iter()
                    .map(|sub| {
                        let mut c = DMatrix::zeros(n, n);
                        c.set_row(0, &row(&first).row(0));
                        for (r, &k) in sub.iter().enumerate() {
                            c.set_row(r + 1, &row(&rows[k]).row(0));
                        }
                        singular_values_desc(&c)
                    })
                    .max_by(|a, b| a[n - 1].partial_cmp(&b[n - 1]).unwrap_or(std::cmp::Ordering::Equal))
                    .unwrap_or_default();
                let mut point = xi.as_slice().to_vec();
                point.extend_from_slice(s);
                point.extend_from_slice(x);
                RankSample { point, singular_values: best }
            })
        })
        .collect();
    let evaluations = samples.len();
    assemble(Condition::FamilyRank, n, samples, evaluations, cfg.required(m + n), cfg)
}

/// Family rank check on default samples: sphere directions, Halton points in
/// the parameter box and in `x_box`.
pub fn check_family_rank(family: &TransformFamily, x_box: &[(f64, f64)], cfg: &CheckConfig) -> Result<RankReport, NondegError> {
    let n = family.ambient_dim();
    if x_box.len() != n {
        return Err(NondegError::Dimension(format!("x box has {} axes for R^{n}", x_box.len())));
    }
    let dirs = sphere_directions(n, cfg.directions, cfg.seed);
    let ss = halton_box(family.param_box(), cfg.s_points, cfg.seed);
    let xs = halton_box(x_box, cfg.x_points, cfg.seed.wrapping_add(1));
    family_rank_on(family, &dirs, &ss, &xs, cfg)
}

/// Parameter values of a curve chart where its weight is positive.
fn curve_params(chart: &SurfaceChart, count: usize) -> Result<Vec<f64>, NondegError> {
    if chart.param_dim() != 1 {
        return Err(NondegError::Dimension(format!("expected a curve, got a {}-surface", chart.param_dim())));
    }
    let ts: Vec<f64> = chart.probe_points(count).into_iter().filter(|u| chart.weight(u) > 0.0).map(|u| u[0]).collect();
    if ts.is_empty() {
        return Err(NondegError::EmptySample("curve has no points of positive weight".into()));
    }
    Ok(ts)
}

fn curve_derivatives(chart: &SurfaceChart, t: f64) -> (Vec<f64>, DVector<f64>, DVector<f64>) {
    let f = |u: &[f64]| chart.eval(u);
    let x = chart.eval(&[t]);
    let d1 = DVector::from_vec(partial(&f, &[t], 0));
    let d2 = DVector::from_vec(second_partial(&f, &[t], 0));
    (x, d1, d2)
}

fn plane_family(family: &TransformFamily, chart: &SurfaceChart) -> Result<(), NondegError> {
    if family.ambient_dim() != 2 || chart.ambient_dim() != 2 {
        return Err(NondegError::Dimension("the tangent and Christ checks are planar".into()));
    }
    if family.param_dim() == 0 {
        return Err(NondegError::TooFewParameters { m: 0, required: 1 });
    }
    Ok(())
}

/// `[J_{T_s}(x)Φ; J_{dT_s/ds_k}(x)Φ]` at curve points `x = γ(t)` with unit
/// tangent Φ, best k per sample. Sample points are `(s, t)`.
pub fn check_tangent_rank(family: &TransformFamily, chart: &SurfaceChart, cfg: &CheckConfig) -> Result<RankReport, NondegError> {
    plane_family(family, chart)?;
    let m = family.param_dim();
    let per = ((cfg.grid_points as f64).powf(1.0 / (m + 1) as f64).ceil() as usize).max(2);
    let ts = curve_params(chart, per)?;
    let ss = grid_with(family.param_box(), per);
    let pts: Vec<(&Vec<f64>, f64)> = ss.iter().flat_map(|s| ts.iter().map(move |&t| (s, t))).collect();
    let samples: Vec<RankSample> = pts
        .par_iter()
        .map(|&(s, t)| {
            let (x, d1, _) = curve_derivatives(chart, t);
            let phi = &d1 / d1.norm();
            let first = family.jacobian_x(s, &x) * &phi;
            let best = (0..m)
                .map(|k| {
                    let second = family.ds_jacobian(s, &x, k) * &phi;
                    singular_values_desc(&DMatrix::from_rows(&[row(&first).row(0).into_owned(), row(&second).row(0).into_owned()]))
                })
                .max_by(|a, b| a[1].partial_cmp(&b[1]).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap_or_default();
            let mut point = s.clone();
            point.push(t);
            RankSample { point, singular_values: best }
        })
        .collect();
    let evaluations = samples.len();
    assemble(Condition::TangentRank, 2, samples, evaluations, cfg.required(m + 1), cfg)
}

/// `[J_{T_s}γ̇, J_{T_s}γ̈, J_{dT_s/ds_k}γ̇]` at `γ(t)`, best k per sample.
/// Sample points are `(s, t)`.
pub fn check_christ_condition(family: &TransformFamily, chart: &SurfaceChart, cfg: &CheckConfig) -> Result<RankReport, NondegError> {
    plane_family(family, chart)?;
    let m = family.param_dim();
    let per = ((cfg.grid_points as f64).powf(1.0 / (m + 1) as f64).ceil() as usize).max(2);
    let ts = curve_params(chart, per)?;
    let ss = grid_with(family.param_box(), per);
    let pts: Vec<(&Vec<f64>, f64)> = ss.iter().flat_map(|s| ts.iter().map(move |&t| (s, t))).collect();
    let samples: Vec<RankSample> = pts
        .par_iter()
        .map(|&(s, t)| {
            let (x, d1, d2) = curve_derivatives(chart, t);
            let j = family.jacobian_x(s, &x);
            let a = &j * &d1;
            let b = &j * &d2;
            let best = (0..m)
                .map(|k| {
                    let c = family.ds_jacobian(s, &x, k) * &d1;
                    singular_values_desc(&DMatrix::from_columns(&[a.clone(), b.clone(), c]))
                })
                .max_by(|a, b| a[1].partial_cmp(&b[1]).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap_or_default();
            let mut point = s.clone();
            point.push(t);
            RankSample { point, singular_values: best }
        })
        .collect();
    let evaluations = samples.len();
    assemble(Condition::Christ, 2, samples, evaluations, cfg.required(m + 1), cfg)
}

/// `inf_Φ max_k |Ξᵀ J_{∂T/∂s_k}(x₀) Φ|` over the sampled Φ, k over the first
/// n−1 parameters.
pub fn delta_s(family: &TransformFamily, xi: &[f64], s: &[f64], x0: &[f64], omega_perp: &[Vec<f64>]) -> Result<f64, NondegError> {
    let n = family.ambient_dim();
    let m = family.param_dim();
    if m + 1 < n {
        return Err(NondegError::TooFewParameters { m, required: n - 1 });
    }
    if omega_perp.is_empty() {
        return Err(NondegError::EmptySample("no directions orthogonal to the Gauss map".into()));
    }
    let xi = DVector::from_column_slice(xi);
    let rows: Vec<DVector<f64>> = (0..n - 1).map(|k| family.ds_jacobian(s, x0, k).tr_mul(&xi)).collect();
    Ok(omega_perp
        .iter()
        .map(|phi| {
            let phi = DVector::from_column_slice(phi);
            rows.iter().map(|r| r.dot(&phi).abs()).fold(0.0f64, f64::max)
        })
        .fold(f64::INFINITY, f64::min))
}

/// Unit vectors orthogonal to the unit normals of a hypersurface chart at
/// `per_axis` probe points per axis, `per_normal` of them for each normal.
pub fn omega_perp(chart: &SurfaceChart, per_axis: usize, per_normal: usize) -> Vec<Vec<f64>> {
    let n = chart.ambient_dim();
    let mut out = Vec::new();
    for u in chart.probe_points(per_axis).into_iter().filter(|u| chart.weight(u) > 0.0) {
        let Some(nu) = chart.unit_normal(&u) else { continue };
        // orthonormal basis of ν⊥ by Gram–Schmidt on the coordinate vectors
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for i in 0..n {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            v -= &nu * nu.dot(&v);
            for b in &basis {
                v -= b * b.dot(&v);
            }
            if v.norm() > 1e-6 && basis.len() + 1 < n {
                basis.push(v.normalize());
            }
        }
        for w in unit_directions(n - 1, per_normal, 0) {
            let v = basis.iter().zip(&w).fold(DVector::zeros(n), |acc, (b, c)| acc + b * *c);
            out.push(v.as_slice().to_vec());
        }
    }
    out
}

/// `γ(x, s, t)` with `x ∈ R^n`, `s ∈ R^m`, `t ∈ R^k`.
#[derive(Clone)]
pub struct PointFamily {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    map: SurfaceFamilyMap,
}

impl PointFamily {
    pub fn new(n: usize, m: usize, k: usize, map: SurfaceFamilyMap) -> Self {
        PointFamily { n, m, k, map }
    }

    /// `γ(x, s, t) = x + γ⁰(s; t)`.
    pub fn translation_invariant(n: usize, m: usize, k: usize, g0: Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>) -> Self {
        PointFamily::new(
            n,
            m,
            k,
            Arc::new(move |x, s, t, out| {
                g0(s, t, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += xi;
                }
            }),
        )
    }

    pub fn from_radon(op: &GeneralizedRadon) -> Self {
        let op2 = op.clone();
        PointFamily::new(
            op.ambient_dim(),
            op.param_dim(),
            op.surface_dim(),
            Arc::new(move |x, s, t, out| out.copy_from_slice(&op2.eval(x, s, t))),
        )
    }

    pub fn eval(&self, x: &[f64], s: &[f64], t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        (self.map)(x, s, t, &mut out);
        out
    }
}

/// `Γ(y, s; t) = D_{t′}(γ_{t+t′} ∘ γ_t⁻¹)(y)|_{t′=0}` as a k×n matrix whose
/// rows are the pulled-back velocities.
pub fn gamma_pullback(family: &PointFamily, y: &[f64], s: &[f64], t: &[f64]) -> Result<DMatrix<f64>, NondegError> {
    let x = newton_solve(|x, out| (family.map)(x, s, t, out), y, y, 1e-13, 60)
        .map_err(|source| NondegError::Inversion { y: y.to_vec(), source })?;
    let f = |tt: &[f64]| family.eval(&x, s, tt);
    let mut out = DMatrix::zeros(family.k, family.n);
    for j in 0..family.k {
        let v = partial(&f, t, j);
        for (i, vi) in v.iter().enumerate() {
            out[(j, i)] = *vi;
        }
    }
    Ok(out)
}

fn split_st(st: &[f64], m: usize) -> (&[f64], &[f64]) {
    st.split_at(m)
}

/// Curve pullback check: rank n−1 of
/// `[Γ₁ D_sΓ′ − D_sΓ₁ ⊗ Γ′; Γ₁ ∂_tΓ′ − ∂_tΓ₁ ⊗ Γ′]` on a grid over the
/// `(s, t)` box for each y, and the smallest gradient norm of
/// `Γ′·η′/Γ₁` over sampled η′. Sample points are `(y, s, t)`.
pub fn check_curve_pullback(
    family: &PointFamily,
    y_samples: &[Vec<f64>],
    st_box: &[(f64, f64)],
    cfg: &CheckConfig,
) -> Result<RankReport, NondegError> {
    let (n, m) = (family.n, family.m);
    if family.k != 1 || n < 2 {
        return Err(NondegError::Dimension("the curve pullback check needs a family of curves in R^n, n >= 2".into()));
    }
    if st_box.len() != m + 1 {
        return Err(NondegError::Dimension(format!("(s, t) box has {} axes, expected {}", st_box.len(), m + 1)));
    }
    let etas: Vec<DVector<f64>> = unit_directions(n - 1, cfg.directions, cfg.seed).into_iter().map(DVector::from_vec).collect();
    let per_y = cfg.required(m + 1).div_ceil(etas.len() * y_samples.len().max(1));
    let grid = if m + 1 <= 2 && cfg.critical_per_axis.pow(m as u32 + 1) >= per_y {
        grid_with(st_box, cfg.critical_per_axis)
    } else {
        param_grid(st_box, cfg.critical_per_axis.pow(2).max(per_y))
    };
    let pts: Vec<(&Vec<f64>, &Vec<f64>)> = y_samples.iter().flat_map(|y| grid.iter().map(move |st| (y, st))).collect();
    let results: Vec<Result<(RankSample, f64), NondegError>> = pts
        .par_iter()
        .map(|&(y, st)| {
            let pull = |p: &[f64]| -> Result<Vec<f64>, NondegError> {
                let (s, t) = split_st(p, m);
                Ok(gamma_pullback(family, y, s, t)?.row(0).iter().copied().collect())
            };
            let gamma = pull(st)?;
            let (s, t) = split_st(st, m);
            if gamma[0].abs() <= GAMMA1_MIN {
                return Err(NondegError::Gamma1Vanishes { y: y.clone(), s: s.to_vec(), t: t[0], value: gamma[0] });
            }
            let f = |p: &[f64]| pull(p).unwrap_or_else(|_| vec![f64::NAN; n]);
            let mut mat = DMatrix::zeros(m + 1, n - 1);
            for j in 0..=m {
                let d = partial(&f, st, j);
                for i in 1..n {
                    mat[(j, i - 1)] = gamma[0] * d[i] - d[0] * gamma[i];
                }
            }
            let g1sq = gamma[0] * gamma[0];
            let min_grad = etas.iter().map(|e| (&mat * e).norm() / g1sq).fold(f64::INFINITY, f64::min);
            let mut point = y.clone();
            point.extend_from_slice(st);
            Ok((RankSample { point, singular_values: singular_values_desc(&mat) }, min_grad))
        })
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut min_grad = f64::INFINITY;
    for r in results {
        let (s, g) = r?;
        min_grad = min_grad.min(g);
        samples.push(s);
    }
    if samples.iter().any(|s| s.singular_values.iter().any(|v| !v.is_finite())) {
        return Err(NondegError::EmptySample("pullback evaluation failed near the sample grid".into()));
    }
    let evaluations = samples.len() * etas.len();
    let mut report = assemble(Condition::CurvePullback, n - 1, samples, evaluations, cfg.required(m + 1), cfg)?;
    report.min_gradient_norm = Some(min_grad);
    Ok(report)
}

/// Graph form `γ⁰(s; t) = (t, g(s; t))`, `g: R^{m+1} → R^{n−1}` taking
/// `(s, t)` with t last: rank n−1 of `[D_s ġ; g̈]`. Sample points are `(s, t)`.
pub fn check_graph_rank(
    g: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    n: usize,
    st_box: &[(f64, f64)],
    cfg: &CheckConfig,
) -> Result<RankReport, NondegError> {
    if n < 2 || st_box.is_empty() {
        return Err(NondegError::Dimension("graph form needs n >= 2 and a t axis".into()));
    }
    let m = st_box.len() - 1;
    let grid = param_grid(st_box, cfg.grid_points);
    let samples: Vec<RankSample> = grid
        .par_iter()
        .map(|st| {
            let gdot = |p: &[f64]| partial(&g, p, m);
            let mut mat = DMatrix::zeros(m + 1, n - 1);
            for j in 0..m {
                for (i, v) in partial(&gdot, st, j).into_iter().enumerate() {
                    mat[(j, i)] = v;
                }
            }
            for (i, v) in second_partial(&g, st, m).into_iter().enumerate() {
                mat[(m, i)] = v;
            }
            RankSample { point: st.clone(), singular_values: singular_values_desc(&mat) }
        })
        .collect();
    let evaluations = samples.len();
    assemble(Condition::GraphRank, n - 1, samples, evaluations, cfg.required(m + 1), cfg)
}

/// Surface pullback check: with `Γ = [Γ′ | Γ″]` split after the first k
/// coordinates, `A = (Γ′ᵀ)⁻¹ Γ″ᵀ` (k×(n−k)) and `D_{s,t}(Aη″)` must have rank
/// k for every sampled η″. Per point the worst η″ is kept; sample points are
/// `(y, s, t, η″)`.
pub fn check_surface_pullback(
    family: &PointFamily,
    y_samples: &[Vec<f64>],
    st_box: &[(f64, f64)],
    cfg: &CheckConfig,
) -> Result<RankReport, NondegError> {
    let (n, m, k) = (family.n, family.m, family.k);
    if k == 0 || k >= n {
        return Err(NondegError::Dimension(format!("surface dimension {k} must lie in 1..{n}")));
    }
    if st_box.len() != m + k {
        return Err(NondegError::Dimension(format!("(s, t) box has {} axes, expected {}", st_box.len(), m + k)));
    }
    let etas: Vec<DVector<f64>> = unit_directions(n - k, cfg.directions, cfg.seed).into_iter().map(DVector::from_vec).collect();
    let per_y = cfg.required(m + k).div_ceil(etas.len() * y_samples.len().max(1));
    let grid = param_grid(st_box, cfg.critical_per_axis.pow(2).max(per_y));
    let pts: Vec<(&Vec<f64>, &Vec<f64>)> = y_samples.iter().flat_map(|y| grid.iter().map(move |st| (y, st))).collect();
    let a_of = |y: &[f64], p: &[f64]| -> Result<DMatrix<f64>, NondegError> {
        let (s, t) = p.split_at(m);
        let gamma = gamma_pullback(family, y, s, t)?.transpose();
        let g1 = gamma.rows(0, k).into_owned();
        let g2 = gamma.rows(k, n - k).into_owned();
        let sv = singular_values_desc(&g1);
        if !(sv[k - 1] > RANK_REL_TOL * sv[0]) {
            return Err(NondegError::SingularPullback {
                y: y.to_vec(),
                s: s.to_vec(),
                t: t.to_vec(),
                sigma_min: sv[k - 1],
                sigma_max: sv[0],
            });
        }
        let inv = g1.transpose().try_inverse().ok_or_else(|| NondegError::SingularPullback {
            y: y.to_vec(),
            s: s.to_vec(),
            t: t.to_vec(),
            sigma_min: 0.0,
            sigma_max: sv[0],
        })?;
        Ok(inv * g2.transpose())
    };
    let results: Vec<Result<RankSample, NondegError>> = pts
        .par_iter()
        .map(|&(y, st)| {
            a_of(y, st)?;
            let f = |p: &[f64]| a_of(y, p).map(|a| a.as_slice().to_vec()).unwrap_or_else(|_| vec![f64::NAN; k * (n - k)]);
            let da: Vec<DMatrix<f64>> = (0..m + k).map(|j| DMatrix::from_vec(k, n - k, partial(&f, st, j))).collect();
            let mut worst: Option<(Vec<f64>, &DVector<f64>)> = None;
            for eta in &etas {
                let cols: Vec<DVector<f64>> = da.iter().map(|d| d * eta).collect();
                let sv = singular_values_desc(&DMatrix::from_columns(&cols));
                let better = match &worst {
                    None => true,
                    Some((w, _)) => sv.get(k - 1).copied().unwrap_or(0.0) < w.get(k - 1).copied().unwrap_or(0.0),
                };
                if better {
                    worst = Some((sv, eta));
                }
            }
            let (sv, eta) = worst.expect("at least one direction");
            let mut point = y.clone();
            point.extend_from_slice(st);
            point.extend(eta.iter());
            Ok(RankSample { point, singular_values: sv })
        })
        .collect();
    let samples = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if samples.iter().any(|s| s.singular_values.iter().any(|v| !v.is_finite())) {
        return Err(NondegError::EmptySample("pullback evaluation failed near the sample grid".into()));
    }
    let evaluations = samples.len() * etas.len();
    assemble(Condition::SurfacePullback, k, samples, evaluations, cfg.required(m + k), cfg)
}

/// Graph function `g(s; t)` for the graph rank check, called on `(s, t)`
/// with `t` last.
pub type GraphFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Named curve and surface families with their default `(s, t)` boxes.
///
/// `parabola` and `line` are fixed plane curves; `rotated_parabola` turns
/// `(t, t², 0)` about the `x₂` axis; `rotated_paraboloid` applies all small
/// rotations to a paraboloid patch; `flat_plane` is a fixed coordinate plane.
pub fn named_point_family(name: &str) -> Option<(PointFamily, Vec<(f64, f64)>)> {
    let g0: Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
    let (n, m, k, st) = match name {
        "parabola" => {
            g0 = Arc::new(|_, t, o| {
                o[0] = t[0];
                o[1] = t[0] * t[0];
            });
            (2, 0, 1, vec![(-0.5, 0.5)])
        }
        "line" => {
            g0 = Arc::new(|_, t, o| {
                o[0] = t[0];
                o[1] = 0.7 * t[0];
            });
            (2, 0, 1, vec![(-0.5, 0.5)])
        }
        "rotated_parabola" => {
            g0 = Arc::new(|s, t, o| {
                o[0] = t[0] * s[0].cos();
                o[1] = t[0] * t[0];
                o[2] = t[0] * s[0].sin();
            });
            (3, 1, 1, vec![(-0.5, 0.5); 2])
        }
        "rotated_paraboloid" => {
            g0 = Arc::new(|s, t, o| {
                let r = crate::geometry::so3_exp(s);
                let p = [t[0], t[1], 0.5 * (t[0] * t[0] + t[1] * t[1])];
                for i in 0..3 {
                    o[i] = r[(i, 0)] * p[0] + r[(i, 1)] * p[1] + r[(i, 2)] * p[2];
                }
            });
            (3, 3, 2, vec![(-0.3, 0.3), (-0.3, 0.3), (-0.3, 0.3), (-0.4, 0.4), (-0.4, 0.4)])
        }
        "flat_plane" => {
            g0 = Arc::new(|_, t, o| {
                o[0] = t[0];
                o[1] = t[1];
                o[2] = 0.0;
            });
            (3, 1, 2, vec![(-0.3, 0.3), (-0.4, 0.4), (-0.4, 0.4)])
        }
        _ => return None,
    };
    Some((PointFamily::translation_invariant(n, m, k, g0), st))
}

/// Named graph-form families: ambient dimension, `g` and the `(s, t)` box.
///
/// `rotated_parabola` is the graph form of the family of the same name in
/// [`named_point_family`].
pub fn named_graph(name: &str) -> Option<(usize, GraphFn, Vec<(f64, f64)>)> {
    Some(match name {
        "parabola" => (2, Arc::new(|p: &[f64]| vec![p[0] * p[0]]) as GraphFn, vec![(-0.5, 0.5)]),
        "line" => (2, Arc::new(|p: &[f64]| vec![0.3 * p[0]]) as GraphFn, vec![(-0.5, 0.5)]),
        "sheared_line" => (2, Arc::new(|p: &[f64]| vec![p[0] * p[1]]) as GraphFn, vec![(-0.5, 0.5); 2]),
        "rotated_parabola" => (
            3,
            Arc::new(|p: &[f64]| {
                let (s, t) = (p[0], p[1]);
                vec![t * t / s.cos().powi(2), t * s.tan()]
            }) as GraphFn,
            vec![(-0.5, 0.5); 2],
        ),
        _ => return None,
    })
}
