//! Fourier transforms `μ̂(ξ) = ∫ e^{−2πi ξ·Φ(u)} χ(u) du` of surface-carried
//! measures.

mod beta;
mod chart_transform;
mod closed_form;
mod grid;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use beta::{lemma1_envelope, mu_hat_beta_dyadic, BetaDyadic, BetaDyadicResult};
pub use chart_transform::{ChartTransform, QuadCloud};
pub use closed_form::{bessel_j0, mu_hat_polygon_exact, CircleTransform, PolygonTransform};
pub use grid::{evaluate_grid, write_grid_csv, DirectionSet, FrequencyGrid, GridSample};

use crate::geometry::{ChartKind, GeometryError, SurfaceChart};
use crate::numerics::cis_turns;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OscillatoryError {
    #[error("quadrature did not converge at xi = {xi:?}: last {last}, previous {previous}")]
    NonConvergence { xi: Vec<f64>, last: Complex64, previous: Complex64 },
    #[error("|xi| = {norm} exceeds configured rho_max = {rho_max}")]
    FrequencyTooLarge { norm: f64, rho_max: f64 },
    #[error("frequency has dimension {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("chart kind not supported here: {0}")]
    WrongKind(String),
    #[error("invalid quadrature configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Accuracy contract for the oscillatory quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    /// Relative tolerance between successive refinements.
    pub tol: f64,
    /// Absolute acceptance floor, as a fraction of the total mass; covers
    /// frequencies where the transform is at roundoff level.
    pub abs_floor: f64,
    pub nodes_per_period: usize,
    /// Gauss–Legendre nodes per panel.
    pub order: usize,
    pub min_panels: usize,
    pub max_refinements: usize,
    /// Multiplier on the sampled frequency bound.
    pub safety: f64,
    pub rho_max: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            tol: 1e-6,
            abs_floor: 1e-12,
            nodes_per_period: 8,
            order: 16,
            min_panels: 4,
            max_refinements: 4,
            safety: 1.25,
            rho_max: 1e5,
        }
    }
}

impl QuadConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), OscillatoryError> {
        let bad = |m: &str| Err(OscillatoryError::Config(m.into()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.abs_floor >= 0.0) {
            return bad("abs_floor must be nonnegative");
        }
        if self.nodes_per_period < 8 {
            return bad("nodes_per_period must be at least 8");
        }
        if self.order == 0 || self.min_panels == 0 || self.max_refinements == 0 {
            return bad("order, min_panels and max_refinements must be positive");
        }
        if !(self.safety >= 1.0) {
            return bad("safety must be at least 1");
        }
        if !(self.rho_max > 0.0) {
            return bad("rho_max must be positive");
        }
        Ok(())
    }

    pub(crate) fn check_xi(&self, xi: &[f64], n: usize) -> Result<(), OscillatoryError> {
        if xi.len() != n {
            return Err(OscillatoryError::Dimension { got: xi.len(), expected: n });
        }
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm < self.rho_max) {
            return Err(OscillatoryError::FrequencyTooLarge { norm, rho_max: self.rho_max });
        }
        Ok(())
    }
}

/// Something that can evaluate the Fourier transform of a finite measure.
pub trait FourierTransform: Send + Sync {
    fn ambient_dim(&self) -> usize;
    /// `μ̂(0)`.
    fn mass(&self) -> f64;
    fn eval(&self, xi: &[f64]) -> Result<Complex64, OscillatoryError>;
}

/// The best available evaluator for a chart: exact per-edge formula for
/// polygons, quadrature otherwise.
pub fn transform_for(chart: &SurfaceChart, cfg: &QuadConfig) -> Result<Box<dyn FourierTransform>, OscillatoryError> {
    match chart.kind() {
        ChartKind::PolygonBoundary(_) => Ok(Box::new(PolygonTransform::new(chart, cfg.clone())?)),
        _ => Ok(Box::new(ChartTransform::new(chart.clone(), cfg.clone())?)),
    }
}

/// `μ̂(ξ)` by oscillation-resolving quadrature.
pub fn mu_hat(chart: &SurfaceChart, xi: &[f64], cfg: &QuadConfig) -> Result<Complex64, OscillatoryError> {
    ChartTransform::new(chart.clone(), cfg.clone())?.eval(xi)
}

/// Transform of the pushforward of μ under `x ↦ Ax + b`:
/// `e^{−2πi ξ·b} μ̂(Aᵀξ)`.
pub fn affine_image_transform(
    base: &dyn FourierTransform,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    xi: &[f64],
) -> Result<Complex64, OscillatoryError> {
    let x = DVector::from_column_slice(xi);
    let at = a.transpose() * &x;
    let v = base.eval(at.as_slice())?;
    let (c, s) = cis_turns(x.dot(b));
    Ok(v * Complex64::new(c, -s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, rotate_chart, rotation2, BuiltinSurface};
    use proptest::prelude::*;

    fn circle() -> SurfaceChart {
        make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap()
    }

    #[test]
    fn zero_frequency_gives_mass() {
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 3, radius: 0.5 }).unwrap();
        let t = ChartTransform::new(c, QuadConfig::default()).unwrap();
        let m = t.eval(&[0.0, 0.0, 0.0]).unwrap();
        assert!(m.re > 0.0 && m.im == 0.0);
        let circ = ChartTransform::new(circle(), QuadConfig::default()).unwrap();
        assert!((circ.mass() - std::f64::consts::TAU).abs() < 1e-13);
    }

    #[test]
    fn conjugate_symmetry() {
        let c = make_builtin_surface(&BuiltinSurface::BetaSurface { n: 2, beta: 4.0 }).unwrap();
        let t = ChartTransform::new(c, QuadConfig::default()).unwrap();
        for xi in [[3.0, 7.5], [-40.0, 12.0], [100.0, -250.0]] {
            let a = t.eval(&xi).unwrap();
            let b = t.eval(&[-xi[0], -xi[1]]).unwrap();
            assert!((a - b.conj()).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn reparametrization_independence() {
        for spec in [BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }, BuiltinSurface::Sphere { n: 3, radius: 0.5 }] {
            let c = make_builtin_surface(&spec).unwrap();
            let r = c.reparametrized(2.0);
            let cfg = QuadConfig::default().with_tol(1e-10);
            let (tc, tr) = (ChartTransform::new(c.clone(), cfg.clone()).unwrap(), ChartTransform::new(r, cfg).unwrap());
            let n = c.ambient_dim();
            for k in 0..4 {
                let xi: Vec<f64> = (0..n).map(|d| 9.0 * (k as f64 + 1.0) * ((d + k) as f64).cos()).collect();
                let (a, b) = (tc.eval(&xi).unwrap(), tr.eval(&xi).unwrap());
                assert!((a - b).norm() < 1e-8, "{spec:?} xi={xi:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rotation_covariance() {
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        let cfg = QuadConfig::default().with_tol(1e-12);
        let base = ChartTransform::new(c.clone(), cfg.clone()).unwrap();
        for angle in [0.3, 1.7, -2.4] {
            let th = rotation2(angle);
            let rot = ChartTransform::new(rotate_chart(&c, &th).unwrap(), cfg.clone()).unwrap();
            let xi = DVector::from_vec(vec![17.0, -31.0]);
            let lhs = rot.eval(xi.as_slice()).unwrap();
            let rhs = base.eval((&th * &xi).as_slice()).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn affine_fast_path_matches_composed_chart() {
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        let cfg = QuadConfig::default().with_tol(1e-11);
        let base = ChartTransform::new(c.clone(), cfg.clone()).unwrap();
        let fam = crate::geometry::shears(-1.0, 1.0);
        let moved = crate::geometry::apply_family(&fam, &[0.4], &c).unwrap();
        let direct = ChartTransform::new(moved, cfg).unwrap().eval(&[12.0, 20.0]).unwrap();
        let (a, b) = fam.affine_part(&[0.4]).unwrap();
        let fast = affine_image_transform(&base, &a, &b, &[12.0, 20.0]).unwrap();
        assert!((direct - fast).norm() < 1e-9);
    }

    #[test]
    fn too_large_frequency_rejected() {
        let cfg = QuadConfig { rho_max: 100.0, ..Default::default() };
        assert!(matches!(mu_hat(&circle(), &[200.0, 0.0], &cfg), Err(OscillatoryError::FrequencyTooLarge { .. })));
    }

    #[test]
    fn refinement_budget_exhaustion_reports_estimates() {
        let cfg = QuadConfig { tol: 1e-300, abs_floor: 0.0, max_refinements: 1, ..Default::default() };
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        match ChartTransform::new(c, cfg) {
            Err(OscillatoryError::NonConvergence { last, previous, .. }) => {
                assert!((last - previous).norm() < 1e-6 * last.norm());
            }
            other => panic!("expected non-convergence, got {:?}", other.map(|_| ())),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mass_bounds_transform(x in -300.0f64..300.0, y in -300.0f64..300.0) {
            let t = ChartTransform::new(
                make_builtin_surface(&BuiltinSurface::BetaSurface { n: 2, beta: 3.0 }).unwrap(),
                QuadConfig::default(),
            ).unwrap();
            let v = t.eval(&[x, y]).unwrap();
            prop_assert!(v.norm() <= t.mass() * (1.0 + 1e-9));
        }
    }
}
