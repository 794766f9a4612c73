use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use super::{FourierTransform, OscillatoryError, QuadConfig};
use crate::geometry::{ChartKind, PolygonData, SurfaceChart};

/// `J₀(x) = (1/π)∫₀^π cos(x sin t) dt` by the trapezoid rule, which is
/// spectrally accurate for this periodic integrand once the node count
/// exceeds the Bessel cutoff.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    let n = (0.75 * x).ceil() as usize + 50;
    let h = PI / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        acc += (x * (j as f64 * h).sin()).cos();
    }
    acc / n as f64
}

/// `sin(x)/x` with its removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Exact transform of a polygon boundary with per-edge constant density.
pub struct PolygonTransform {
    poly: PolygonData,
    cfg: QuadConfig,
    mass: f64,
}

impl PolygonTransform {
    pub fn new(chart: &SurfaceChart, cfg: QuadConfig) -> Result<Self, OscillatoryError> {
        match chart.kind() {
            ChartKind::PolygonBoundary(p) => Ok(Self::from_polygon(p.clone(), cfg)),
            k => Err(OscillatoryError::WrongKind(format!("exact polygon transform needs a polygon boundary, got {k:?}"))),
        }
    }

    pub fn from_polygon(poly: PolygonData, cfg: QuadConfig) -> Self {
        let mass = poly.mass();
        PolygonTransform { poly, cfg, mass }
    }
}

impl FourierTransform for PolygonTransform {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn mass(&self) -> f64 {
        self.mass
    }

    /// Each edge `[a, b]` contributes `w L e^{−2πiξ·m} sinc(π ξ·(b−a))` with
    /// `m` the midpoint.
    fn eval(&self, xi: &[f64]) -> Result<Complex64, OscillatoryError> {
        self.cfg.check_xi(xi, 2)?;
        let lengths = self.poly.edge_lengths();
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (len, w)) in lengths.iter().zip(&self.poly.edge_weights).enumerate() {
            let (a, b) = self.poly.edge(i);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let along = xi[0] * (b[0] - a[0]) + xi[1] * (b[1] - a[1]);
            let amp = w * len * sinc(PI * along);
            let (s, c) = (TAU * (xi[0] * mid[0] + xi[1] * mid[1])).sin_cos();
            acc += Complex64::new(amp * c, -amp * s);
        }
        Ok(acc)
    }
}

/// Exact per-edge transform of a polygon-boundary chart.
pub fn mu_hat_polygon_exact(chart: &SurfaceChart, xi: &[f64]) -> Result<Complex64, OscillatoryError> {
    PolygonTransform::new(chart, QuadConfig::default())?.eval(xi)
}

/// Arc-length measure on a centered circle: `μ̂(ξ) = 2πr J₀(2πr|ξ|)`.
pub struct CircleTransform {
    radius: f64,
    cfg: QuadConfig,
}

impl CircleTransform {
    pub fn new(chart: &SurfaceChart, cfg: QuadConfig) -> Result<Self, OscillatoryError> {
        match chart.kind() {
            ChartKind::Circle { radius } => Ok(CircleTransform { radius: *radius, cfg }),
            k => Err(OscillatoryError::WrongKind(format!("circle closed form needs a circle chart, got {k:?}"))),
        }
    }
}

impl FourierTransform for CircleTransform {
    fn ambient_dim(&self) -> usize {
        2
    }

    fn mass(&self) -> f64 {
        TAU * self.radius
    }

    fn eval(&self, xi: &[f64]) -> Result<Complex64, OscillatoryError> {
        self.cfg.check_xi(xi, 2)?;
        let r = xi[0].hypot(xi[1]);
        Ok(Complex64::new(TAU * self.radius * bessel_j0(TAU * self.radius * r), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, BuiltinSurface};
    use crate::oscillatory::ChartTransform;

    #[test]
    fn j0_reference_values() {
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j0(2.404_825_557_695_773).abs()) < 1e-14);
        assert!((bessel_j0(10.0) + 0.245_935_764_451_348_3).abs() < 1e-14);
    }

    #[test]
    fn edge_perpendicular_to_frequency_has_no_oscillation() {
        let poly = PolygonData { vertices: vec![[0.0, 1.0], [2.0, 1.0], [2.0, 2.0]], edge_weights: vec![1.0, 0.0, 0.0] };
        let t = PolygonTransform::from_polygon(poly, QuadConfig::default());
        // ξ ⟂ first edge: a pure phase e^{-2πi ξ·x0} times the weighted length 2
        let v = t.eval(&[0.0, 0.1]).unwrap();
        assert!((v.norm() - 2.0).abs() < 1e-14);
        assert!((v.arg() + TAU * 0.1).abs() < 1e-14);
    }

    #[test]
    fn square_zero_frequency_is_perimeter() {
        let sq = make_builtin_surface(&BuiltinSurface::Square { side: 1.0 }).unwrap();
        let v = mu_hat_polygon_exact(&sq, &[0.0, 0.0]).unwrap();
        assert!((v.re - 4.0).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn square_exact_matches_quadrature() {
        let sq = make_builtin_surface(&BuiltinSurface::Square { side: 1.0 }).unwrap();
        let quad = ChartTransform::new(sq.clone(), QuadConfig::default().with_tol(1e-12)).unwrap();
        for xi in [[64.0, 0.0], [13.7, -5.2], [100.0, 41.0]] {
            let a = mu_hat_polygon_exact(&sq, &xi).unwrap();
            let b = quad.eval(&xi).unwrap();
            assert!((a - b).norm() < 1e-8, "xi={xi:?}: {a} vs {b}");
        }
    }

    #[test]
    fn removable_singularity_branch_is_continuous() {
        for x in [1e-4 * (1.0 - 1e-9), 1e-4 * (1.0 + 1e-9)] {
            assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
        }
    }
}
