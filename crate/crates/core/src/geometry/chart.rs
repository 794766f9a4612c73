use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::GeometryError;
use crate::numerics::{fd_jacobian, singular_values_desc, FD_REL_STEP};

/// `u ↦ Φ(u)`, writing into the output slice.
pub type PointMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Scalar function of the parameter.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Rank threshold for the parameter Jacobian, relative to its largest
/// singular value.
pub const RANK_REL_TOL: f64 = 1e-8;
/// Largest weight value tolerated on a non-periodic domain face.
pub const BOUNDARY_WEIGHT_TOL: f64 = 1e-12;

/// One coordinate of the parameter box.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ParamAxis {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
    /// Interior points where the map is only piecewise smooth (polygon corners).
    pub breaks: Vec<f64>,
}

impl ParamAxis {
    pub fn interval(lo: f64, hi: f64) -> Self {
        ParamAxis { lo, hi, periodic: false, breaks: Vec::new() }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        ParamAxis { lo, hi, periodic: true, breaks: Vec::new() }
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `lo`, the interior breakpoints, then `hi`.
    pub fn cuts(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.breaks.len() + 2);
        c.push(self.lo);
        c.extend(self.breaks.iter().copied().filter(|b| *b > self.lo && *b < self.hi));
        c.push(self.hi);
        c
    }
}

/// Closed convex polygon data kept alongside a polygon-boundary chart so the
/// exact per-edge transform can be used.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PolygonData {
    pub vertices: Vec<[f64; 2]>,
    /// Constant density per edge, relative to arc length.
    pub edge_weights: Vec<f64>,
}

impl PolygonData {
    pub fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % self.vertices.len()];
        (a, b)
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.vertices.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
            })
            .collect()
    }

    pub fn perimeter(&self) -> f64 {
        self.edge_lengths().iter().sum()
    }

    /// Total mass of the weighted arc-length measure.
    pub fn mass(&self) -> f64 {
        self.edge_lengths().iter().zip(&self.edge_weights).map(|(l, w)| l * w).sum()
    }

    /// Cross products of consecutive edge vectors.
    pub fn turn_crosses(&self) -> Vec<f64> {
        let m = self.vertices.len();
        (0..m)
            .map(|i| {
                let (a, b) = self.edge(i);
                let (_, c) = self.edge((i + 1) % m);
                let e1 = [b[0] - a[0], b[1] - a[1]];
                let e2 = [c[0] - b[0], c[1] - b[1]];
                e1[0] * e2[1] - e1[1] * e2[0]
            })
            .collect()
    }

    pub fn is_convex(&self) -> bool {
        let crosses = self.turn_crosses();
        let scale = self.perimeter().powi(2) * 1e-14;
        let pos = crosses.iter().any(|c| *c > scale);
        let neg = crosses.iter().any(|c| *c < -scale);
        !(pos && neg) && (pos || neg)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartKind {
    Graph,
    Circle { radius: f64 },
    PolygonBoundary(PolygonData),
    BetaSurface { beta: f64 },
    Custom,
}

/// A parametrized patch `Φ: Ω ⊂ R^k → R^n` carrying the measure
/// `Φ_*(χ(u) du)`.
#[derive(Clone)]
pub struct SurfaceChart {
    ambient_dim: usize,
    axes: Vec<ParamAxis>,
    map: PointMap,
    weight: ScalarFn,
    kind: ChartKind,
    convex: bool,
    label: String,
}

impl fmt::Debug for SurfaceChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceChart")
            .field("label", &self.label)
            .field("ambient_dim", &self.ambient_dim)
            .field("axes", &self.axes)
            .field("kind", &self.kind)
            .field("convex", &self.convex)
            .finish()
    }
}

impl SurfaceChart {
    /// Builds a chart and verifies its invariants: `1 ≤ k ≤ n−1`, weight
    /// vanishing on non-periodic faces, full-rank parameter Jacobian at probe
    /// points, and discrete convexity when `convex` is set.
    pub fn new(
        ambient_dim: usize,
        axes: Vec<ParamAxis>,
        map: PointMap,
        weight: ScalarFn,
        kind: ChartKind,
        convex: bool,
    ) -> Result<Self, GeometryError> {
        let chart = Self::assemble(ambient_dim, axes, map, weight, kind, convex);
        chart.validate()?;
        Ok(chart)
    }

    /// Construction without validation, for charts derived from valid ones by
    /// diffeomorphisms (which preserve every invariant).
    pub(crate) fn assemble(
        ambient_dim: usize,
        axes: Vec<ParamAxis>,
        map: PointMap,
        weight: ScalarFn,
        kind: ChartKind,
        convex: bool,
    ) -> Self {
        SurfaceChart { ambient_dim, axes, map, weight, kind, convex, label: String::from("custom") }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn param_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[ParamAxis] {
        &self.axes
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn map_fn(&self) -> &PointMap {
        &self.map
    }

    pub fn weight_fn(&self) -> &ScalarFn {
        &self.weight
    }

    #[inline]
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        (self.map)(u, out)
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        (self.map)(u, &mut out);
        out
    }

    #[inline]
    pub fn weight(&self, u: &[f64]) -> f64 {
        (self.weight)(u)
    }

    /// `D_uΦ(u)` by central differences, n×k.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        fd_jacobian(|v, out| (self.map)(v, out), u, self.ambient_dim, FD_REL_STEP)
    }

    /// Unit normal of a hypersurface chart (k = n−1) at `u`.
    pub fn unit_normal(&self, u: &[f64]) -> Option<DVector<f64>> {
        if self.param_dim() + 1 != self.ambient_dim {
            return None;
        }
        let j = self.jacobian(u);
        let q = orthonormal_columns(&j);
        let n = self.ambient_dim;
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for i in 0..n {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            for c in q.column_iter() {
                let proj = c.dot(&v);
                v -= c * proj;
            }
            let nv = v.norm();
            if nv > best_norm {
                best_norm = nv;
                best = Some(v / nv);
            }
        }
        best
    }

    /// Tensor grid of `per_axis` interior points per parameter axis.
    pub fn probe_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let coords: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| (0..per_axis).map(|i| a.lo + (i as f64 + 0.5) / per_axis as f64 * a.width()).collect())
            .collect();
        tensor_points(&coords)
    }

    /// Same geometric measure under the linear reparametrization
    /// `v = u / scale`: `Φ'(v) = Φ(scale·v)`, `χ'(v) = scale^k χ(scale·v)`.
    pub fn reparametrized(&self, scale: f64) -> SurfaceChart {
        let k = self.param_dim();
        let axes = self
            .axes
            .iter()
            .map(|a| ParamAxis {
                lo: a.lo / scale,
                hi: a.hi / scale,
                periodic: a.periodic,
                breaks: a.breaks.iter().map(|b| b / scale).collect(),
            })
            .collect();
        let map = self.map.clone();
        let weight = self.weight.clone();
        let jac = scale.abs().powi(k as i32);
        let scaled = move |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * scale).collect() };
        let scaled2 = scaled.clone();
        SurfaceChart {
            ambient_dim: self.ambient_dim,
            axes,
            map: Arc::new(move |v, out| map(&scaled(v), out)),
            weight: Arc::new(move |v| jac * weight(&scaled2(v))),
            kind: ChartKind::Custom,
            convex: self.convex,
            label: format!("{}:reparam", self.label),
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let n = self.ambient_dim;
        let k = self.param_dim();
        if k < 1 || k + 1 > n {
            return Err(GeometryError::Dimension(format!("param_dim {k} must satisfy 1 <= k <= n-1 with n = {n}")));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if !(a.hi > a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(GeometryError::Dimension(format!("axis {i} has empty or non-finite range")));
            }
        }
        self.check_boundary_weight()?;
        self.check_rank()?;
        if self.convex {
            if let ChartKind::PolygonBoundary(p) = &self.kind {
                if !p.is_convex() {
                    return Err(GeometryError::NonConvex);
                }
            }
            if let ChartKind::Circle { .. } = self.kind {
                let pts: Vec<[f64; 2]> = self
                    .probe_points(64)
                    .iter()
                    .map(|u| {
                        let x = self.eval(u);
                        [x[0], x[1]]
                    })
                    .collect();
                let poly = PolygonData { vertices: pts, edge_weights: vec![1.0; 64] };
                if !poly.is_convex() {
                    return Err(GeometryError::NonConvex);
                }
            }
        }
        Ok(())
    }

    fn check_boundary_weight(&self) -> Result<(), GeometryError> {
        let k = self.param_dim();
        const FACE_PTS: usize = 9;
        for (d, axis) in self.axes.iter().enumerate() {
            if axis.periodic {
                continue;
            }
            let others: Vec<Vec<f64>> = self
                .axes
                .iter()
                .enumerate()
                .map(|(e, a)| {
                    if e == d {
                        vec![0.0]
                    } else {
                        (0..FACE_PTS).map(|i| a.lo + i as f64 / (FACE_PTS - 1) as f64 * a.width()).collect()
                    }
                })
                .collect();
            for face in [axis.lo, axis.hi] {
                for mut p in tensor_points(&others) {
                    p[d] = face;
                    let w = self.weight(&p);
                    if w.abs() > BOUNDARY_WEIGHT_TOL {
                        return Err(GeometryError::BoundaryWeight { axis: d, value: w, point: p[..k].to_vec() });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_rank(&self) -> Result<(), GeometryError> {
        let k = self.param_dim();
        let per_axis = match k {
            1 => 33,
            2 => 9,
            _ => 5,
        };
        let svs: Vec<(Vec<f64>, Vec<f64>)> =
            self.probe_points(per_axis).into_iter().map(|u| (singular_values_desc(&self.jacobian(&u)), u)).collect();
        // σ_1 is taken over the whole probe set so that k = 1 is not vacuous
        let scale = svs.iter().map(|(sv, _)| sv.first().copied().unwrap_or(0.0)).fold(0.0f64, f64::max);
        for (sv, u) in svs {
            let smin = sv.get(k - 1).copied().unwrap_or(0.0);
            if !(smin > RANK_REL_TOL * scale) || scale == 0.0 {
                return Err(GeometryError::RankDeficient { point: u, sigma_min: smin, sigma_max: scale });
            }
        }
        Ok(())
    }
}

pub fn tensor_points(coords: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for c in coords {
        let mut next = Vec::with_capacity(pts.len() * c.len());
        for p in &pts {
            for &x in c {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Orthonormal basis of the column span (modified Gram–Schmidt).
fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for c in m.column_iter() {
        let mut v = c.clone_owned();
        for q in &cols {
            let p = q.dot(&v);
            v -= q * p;
        }
        let nv = v.norm();
        if nv > 1e-300 {
            cols.push(v / nv);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Standard bump normalized to 1 at its center:
/// `e · exp(1/((|u−c|/r)² − 1))` on `|u−c| < r`, zero elsewhere.
pub fn bump(u: &[f64], center: &[f64], radius: f64) -> f64 {
    let r2: f64 = u.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (radius * radius);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 + 1.0 / (r2 - 1.0)).exp()
    }
}

/// C^∞ transition from 0 (x ≤ 0) to 1 (x ≥ 1).
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Radial plateau cutoff: 1 on `|x| ≤ 1/2`, 0 on `|x| ≥ 1`, C^∞ between.
pub fn plateau_cutoff(x: &[f64]) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    1.0 - smooth_step(2.0 * r - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_profile() {
        assert!((bump(&[0.0], &[0.0], 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(bump(&[1.0], &[0.0], 1.0), 0.0);
        assert!(bump(&[0.999_999], &[0.0], 1.0) < 1e-12);
        assert!(bump(&[0.3, 0.1], &[0.0, 0.0], 0.5) > 0.0);
    }

    #[test]
    fn plateau_cutoff_profile() {
        assert_eq!(plateau_cutoff(&[0.4]), 1.0);
        assert_eq!(plateau_cutoff(&[1.0]), 0.0);
        let mid = plateau_cutoff(&[0.75]);
        assert!((mid - 0.5).abs() < 1e-12);
        assert!(plateau_cutoff(&[0.6, 0.0]) < 1.0 && plateau_cutoff(&[0.6, 0.0]) > 0.0);
    }

    #[test]
    fn rejects_weight_not_vanishing_on_boundary() {
        let r = SurfaceChart::new(
            2,
            vec![ParamAxis::interval(-1.0, 1.0)],
            Arc::new(|u, out| {
                out[0] = u[0];
                out[1] = 0.0;
            }),
            Arc::new(|_| 1.0),
            ChartKind::Custom,
            false,
        );
        assert!(matches!(r, Err(GeometryError::BoundaryWeight { .. })));
    }

    #[test]
    fn rejects_rank_deficient_map() {
        let r = SurfaceChart::new(
            2,
            vec![ParamAxis::interval(-1.0, 1.0)],
            Arc::new(|u, out| {
                out[0] = u[0].powi(3);
                out[1] = 0.0;
            }),
            Arc::new(|u| bump(u, &[0.0], 1.0)),
            ChartKind::Custom,
            false,
        );
        // probe grid hits u = 0 where d/du u^3 vanishes
        assert!(matches!(r, Err(GeometryError::RankDeficient { .. })));
    }
}
