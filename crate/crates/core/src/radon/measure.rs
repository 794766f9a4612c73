use nalgebra::{DMatrix, DVector};

use super::RadonError;
use crate::geometry::{ParamAxis, SurfaceChart};
use crate::numerics::{gauss_legendre, pairwise_sum, AxisRule};

/// Minimum number of quadrature points per grid cell crossed by the surface.
pub const MIN_DENSITY: f64 = 2.0;

/// Floor on the node count per parameter axis, so that moments are resolved
/// even on coarse target grids.
const MIN_AXIS_NODES: usize = 256;
const GL_ORDER: usize = 8;

/// Weighted point cloud in R^n approximating a surface-carried measure.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Mass, first moments and second moments `∫ x_i x_j dμ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub first: DVector<f64>,
    pub second: DMatrix<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, RadonError> {
        if points.len() != weights.len() {
            return Err(RadonError::Dimension(format!("{} points but {} weights", points.len(), weights.len())));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(RadonError::Dimension(format!("every point must have {dim} coordinates")));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(RadonError::NegativeWeight);
        }
        Ok(DiscreteMeasure { dim, points, weights })
    }

    /// Unit mass at the origin.
    pub fn dirac(dim: usize) -> Self {
        DiscreteMeasure { dim, points: vec![vec![0.0; dim]], weights: vec![1.0] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn moments(&self) -> Moments {
        let n = self.dim;
        let mut first = DVector::zeros(n);
        let mut second = DMatrix::zeros(n, n);
        for (p, w) in self.points.iter().zip(&self.weights) {
            for i in 0..n {
                first[i] += w * p[i];
                for j in 0..n {
                    second[(i, j)] += w * p[i] * p[j];
                }
            }
        }
        Moments { mass: self.mass(), first, second }
    }

    /// Pushforward under `T`: points move, weights stay.
    pub fn pushforward(&self, t: impl Fn(&[f64], &mut [f64])) -> DiscreteMeasure {
        let points = self
            .points
            .iter()
            .map(|p| {
                let mut q = vec![0.0; self.dim];
                t(p, &mut q);
                q
            })
            .collect();
        DiscreteMeasure { dim: self.dim, points, weights: self.weights.clone() }
    }

    /// Image under `x ↦ Ax`.
    pub fn linear_image(&self, a: &DMatrix<f64>) -> DiscreteMeasure {
        self.pushforward(|p, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (0..p.len()).map(|j| a[(i, j)] * p[j]).sum();
            }
        })
    }

    /// Per-axis bounding interval of the points.
    pub fn extent(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|i| {
                self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[i]), hi.max(p[i])))
            })
            .collect()
    }
}

/// Quadrature pushforward of the chart measure, fine enough that at least
/// `density` points fall in every grid cell of width `spacing` the surface
/// crosses.
pub fn discretize_measure(chart: &SurfaceChart, spacing: f64, density: f64) -> Result<DiscreteMeasure, RadonError> {
    if !(density >= MIN_DENSITY) {
        return Err(RadonError::DensityTooLow { density, required: MIN_DENSITY, spacing });
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(RadonError::Dimension(format!("grid spacing must be positive, got {spacing}")));
    }
    let k = chart.param_dim();
    let n = chart.ambient_dim();
    let per_axis = match k {
        1 => 257,
        2 => 33,
        _ => 11,
    };
    // longest image of a parameter line, per axis
    let mut speed = vec![0.0f64; k];
    for u in chart.probe_points(per_axis).into_iter().filter(|u| chart.weight(u) != 0.0) {
        let j = chart.jacobian(&u);
        for (i, s) in speed.iter_mut().enumerate() {
            *s = s.max(j.column(i).norm());
        }
    }
    let lengths: Vec<f64> = chart.axes().iter().zip(&speed).map(|(a, v)| v * a.width()).collect();
    let rules = axis_rules(chart.axes(), &lengths, spacing, density);
    let (nodes, weights) = tensor_rule(&rules, |u| chart.weight(u));
    let points = nodes.iter().map(|u| chart.eval(u)).collect();
    DiscreteMeasure::new(n, points, weights)
}

/// Per-axis rules whose image-space node gap is at most `spacing/density`,
/// given the image length of each parameter axis.
pub(crate) fn axis_rules(axes: &[ParamAxis], lengths: &[f64], spacing: f64, density: f64) -> Vec<AxisRule> {
    let gl_gap = gl_max_gap(GL_ORDER);
    axes.iter()
        .zip(lengths)
        .map(|(axis, &l)| {
            let length = 1.1 * l;
            if axis.periodic && axis.breaks.is_empty() {
                let count = (density * length / spacing).ceil() as usize;
                AxisRule::periodic_trapezoid(axis.lo, axis.hi, count.max(MIN_AXIS_NODES))
            } else {
                let panels = ((gl_gap * density * length / spacing).ceil() as usize).max(MIN_AXIS_NODES / GL_ORDER);
                AxisRule::gauss_panels(&axis.cuts(), panels, GL_ORDER)
            }
        })
        .collect()
}

/// Tensor product of axis rules with the weight folded in; nodes where the
/// weight vanishes are dropped.
pub(crate) fn tensor_rule(rules: &[AxisRule], weight: impl Fn(&[f64]) -> f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = rules.len();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; k];
    let mut u = vec![0.0; k];
    'outer: loop {
        let mut w = 1.0;
        for d in 0..k {
            u[d] = rules[d].nodes[idx[d]];
            w *= rules[d].weights[idx[d]];
        }
        let chi = weight(&u);
        if chi != 0.0 {
            nodes.push(u.clone());
            weights.push(w * chi);
        }
        for d in (0..k).rev() {
            idx[d] += 1;
            if idx[d] < rules[d].len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    (nodes, weights)
}

/// Largest gap between consecutive nodes of a composite Gauss–Legendre rule,
/// as a fraction of the panel width.
fn gl_max_gap(order: usize) -> f64 {
    let (x, _) = gauss_legendre(order);
    let mut t: Vec<f64> = x.iter().map(|v| (v + 1.0) / 2.0).collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let inner = t.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    inner.max(t[0] + 1.0 - t[t.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, BuiltinSurface};
    use crate::oscillatory::{ChartTransform, FourierTransform, QuadConfig};
    use std::f64::consts::PI;

    #[test]
    fn circle_uniform_rule_has_equal_weights() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        let m = discretize_measure(&c, 0.05, 2.0).unwrap();
        let w0 = m.weights()[0];
        assert!(m.weights().iter().all(|w| (w - w0).abs() < 1e-15));
    }

    #[test]
    fn unit_circle_second_moment_is_half_mass_per_axis() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        let mo = discretize_measure(&c, 0.1, 2.0).unwrap().moments();
        // ∫cos²θ dθ = π = mass / 2
        assert!((mo.mass - 2.0 * PI).abs() < 1e-10);
        assert!((mo.second[(0, 0)] - PI).abs() < 1e-6);
        assert!((mo.second[(1, 1)] - PI).abs() < 1e-6);
        assert!(mo.second[(0, 1)].abs() < 1e-6);
        assert!(mo.first.amax() < 1e-6);
    }

    #[test]
    fn mass_matches_chart_mass() {
        for spec in [
            BuiltinSurface::Square { side: 1.0 },
            BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 },
            BuiltinSurface::Sphere { n: 3, radius: 0.5 },
            BuiltinSurface::Segment { n: 2, half_length: 0.25 },
        ] {
            let c = make_builtin_surface(&spec).unwrap();
            let exact = ChartTransform::new(c.clone(), QuadConfig::default().with_tol(1e-12)).unwrap().mass();
            let m = discretize_measure(&c, 0.02, 2.0).unwrap();
            assert!((m.mass() - exact).abs() < 1e-10, "{spec:?}: {} vs {exact}", m.mass());
        }
    }

    #[test]
    fn moments_match_fine_reference() {
        for spec in [BuiltinSurface::Square { side: 1.0 }, BuiltinSurface::ParabolaGraph { n: 3, radius: 0.5 }] {
            let c = make_builtin_surface(&spec).unwrap();
            let coarse = discretize_measure(&c, 0.05, 2.0).unwrap().moments();
            let fine = discretize_measure(&c, 0.002, 4.0).unwrap().moments();
            assert!((coarse.first - fine.first).amax() < 1e-6, "{spec:?}");
            assert!((coarse.second - fine.second).amax() < 1e-6, "{spec:?}");
        }
    }

    #[test]
    fn point_spacing_respects_density() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        let h = 0.01;
        let m = discretize_measure(&c, h, 2.0).unwrap();
        let p = m.points();
        let gap = (0..p.len()).map(|i| {
            let q = &p[(i + 1) % p.len()];
            ((p[i][0] - q[0]).powi(2) + (p[i][1] - q[1]).powi(2)).sqrt()
        });
        assert!(gap.fold(0.0f64, f64::max) <= h / 2.0);
    }

    #[test]
    fn low_density_is_rejected() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        assert!(matches!(discretize_measure(&c, 0.1, 1.5), Err(RadonError::DensityTooLow { .. })));
    }
}
