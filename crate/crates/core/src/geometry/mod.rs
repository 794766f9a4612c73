//! Surfaces carrying measures, smooth transformation families, and
//! quadrature on the rotation group.

mod builtin;
mod chart;
mod family;
mod rotation;
mod spec;

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

pub use builtin::{make_builtin_surface, vertices_from_flat, BuiltinSurface};
pub use chart::{
    bump, plateau_cutoff, smooth_step, tensor_points, ChartKind, ParamAxis, PointMap, PolygonData, ScalarFn, SurfaceChart,
    BOUNDARY_WEIGHT_TOL, RANK_REL_TOL,
};
pub use family::{
    axis_rotations, identity_family, planar_rotations, rotation2, shears, so3_exp, so3_rotations, translations,
    AffinePart, FamilyMap, JacobianFn, TransformFamily, FD_MIXED_STEP, INVERSE_TOL,
};
pub use rotation::{RotationSample, RotationSampler, RotationScheme};
pub use spec::{FamilySpec, SurfaceConfig, SurfaceSpec};

use crate::numerics::NewtonError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vertex list is not convex")]
    NonConvex,
    #[error("weight does not vanish on boundary face of axis {axis}: value {value:e} at {point:?}")]
    BoundaryWeight { axis: usize, value: f64, point: Vec<f64> },
    #[error("parameter Jacobian rank-deficient at {point:?} (sigma_min {sigma_min:e}, sigma_max {sigma_max:e})")]
    RankDeficient { point: Vec<f64>, sigma_min: f64, sigma_max: f64 },
    #[error("parameter {s:?} outside family box {param_box:?}")]
    ParamOutOfBox { s: Vec<f64>, param_box: Vec<(f64, f64)> },
    #[error("transformation is not invertible")]
    NotInvertible,
    #[error("round-trip inversion error {0:e} exceeds tolerance")]
    RoundTrip(f64),
    #[error(transparent)]
    Newton(#[from] NewtonError),
    #[error("cannot parse specification: {0}")]
    Parse(String),
}

fn is_rotation(theta: &DMatrix<f64>, tol: f64) -> bool {
    let n = theta.nrows();
    theta.is_square() && (theta.transpose() * theta - DMatrix::identity(n, n)).amax() < tol
}

/// The rotated measure `⟨f, μ_θ⟩ = ⟨f(θ⁻¹·), μ⟩`, realized as the chart
/// `u ↦ θᵀΦ(u)` with the same weight. Its transform is `μ̂(θξ)`.
pub fn rotate_chart(chart: &SurfaceChart, theta: &DMatrix<f64>) -> Result<SurfaceChart, GeometryError> {
    let n = chart.ambient_dim();
    if theta.nrows() != n || theta.ncols() != n {
        return Err(GeometryError::Dimension(format!(
            "rotation is {}x{} but chart lives in R^{n}",
            theta.nrows(),
            theta.ncols()
        )));
    }
    if !is_rotation(theta, 1e-10) {
        return Err(GeometryError::InvalidParameter("matrix is not orthogonal".into()));
    }
    let tt = theta.transpose();
    let kind = match chart.kind() {
        ChartKind::Circle { radius } => ChartKind::Circle { radius: *radius },
        ChartKind::PolygonBoundary(p) => ChartKind::PolygonBoundary(PolygonData {
            vertices: p
                .vertices
                .iter()
                .map(|v| [tt[(0, 0)] * v[0] + tt[(0, 1)] * v[1], tt[(1, 0)] * v[0] + tt[(1, 1)] * v[1]])
                .collect(),
            edge_weights: p.edge_weights.clone(),
        }),
        _ => ChartKind::Custom,
    };
    let inner = chart.map_fn().clone();
    let map: PointMap = Arc::new(move |u, out| {
        let mut buf = [0.0f64; 8];
        let mut heap;
        let x: &mut [f64] = if n <= 8 {
            &mut buf[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        inner(u, x);
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += tt[(i, j)] * xj;
            }
            *o = acc;
        }
    });
    Ok(SurfaceChart::assemble(n, chart.axes().to_vec(), map, chart.weight_fn().clone(), kind, chart.is_convex())
        .with_label(format!("{}:rotated", chart.label())))
}

/// The chart `u ↦ T_s(Φ(u))` with the weight unchanged.
pub fn apply_family(family: &TransformFamily, s: &[f64], chart: &SurfaceChart) -> Result<SurfaceChart, GeometryError> {
    let n = chart.ambient_dim();
    if family.ambient_dim() != n {
        return Err(GeometryError::Dimension(format!("family acts on R^{} but chart lives in R^{n}", family.ambient_dim())));
    }
    family.check_param(s)?;
    let affine = family.affine_part(s);
    let (kind, convex) = match (&affine, chart.kind()) {
        (Some((a, b)), ChartKind::PolygonBoundary(p)) => {
            let vertices: Vec<[f64; 2]> = p
                .vertices
                .iter()
                .map(|v| [a[(0, 0)] * v[0] + a[(0, 1)] * v[1] + b[0], a[(1, 0)] * v[0] + a[(1, 1)] * v[1] + b[1]])
                .collect();
            let old = p.edge_lengths();
            let mut q = PolygonData { vertices, edge_weights: p.edge_weights.clone() };
            let new = q.edge_lengths();
            // pushforward of w·dℓ along an edge stretched by L'/L has density w·L/L'
            for ((w, lo), ln) in q.edge_weights.iter_mut().zip(&old).zip(&new) {
                *w *= lo / ln;
            }
            (ChartKind::PolygonBoundary(q), chart.is_convex())
        }
        (Some((a, b)), ChartKind::Circle { radius }) if is_rotation(a, 1e-12) && b.amax() == 0.0 => {
            (ChartKind::Circle { radius: *radius }, chart.is_convex())
        }
        (Some(_), _) => (ChartKind::Custom, chart.is_convex()),
        (None, _) => (ChartKind::Custom, false),
    };
    let inner = chart.map_fn().clone();
    let fmap = family.map_fn().clone();
    let s_owned = s.to_vec();
    let map: PointMap = Arc::new(move |u, out| {
        let mut x = vec![0.0; n];
        inner(u, &mut x);
        fmap(&s_owned, &x, out);
    });
    Ok(SurfaceChart::assemble(n, chart.axes().to_vec(), map, chart.weight_fn().clone(), kind, convex)
        .with_label(format!("{}:{}", chart.label(), family.label())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_by_identity_is_identity() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        let r = rotate_chart(&c, &DMatrix::identity(2, 2)).unwrap();
        for u in c.probe_points(17) {
            assert_eq!(c.eval(&u), r.eval(&u));
            assert_eq!(c.weight(&u), r.weight(&u));
        }
    }

    #[test]
    fn rotating_segment_by_quarter_turn_lands_on_y_axis() {
        let seg = make_builtin_surface(&BuiltinSurface::Segment { n: 2, half_length: 0.5 }).unwrap();
        let r = rotate_chart(&seg, &rotation2(std::f64::consts::FRAC_PI_2)).unwrap();
        for u in seg.probe_points(9) {
            let p = r.eval(&u);
            assert!(p[0].abs() < 1e-15);
            assert!((p[1].abs() - u[0].abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn rotate_rejects_bad_dimensions() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        assert!(matches!(rotate_chart(&c, &DMatrix::identity(3, 3)), Err(GeometryError::Dimension(_))));
    }

    #[test]
    fn family_at_zero_rotation_leaves_circle() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        let moved = apply_family(&planar_rotations(-1.0, 1.0), &[0.0], &c).unwrap();
        for u in c.probe_points(13) {
            let (a, b) = (c.eval(&u), moved.eval(&u));
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
        assert!(matches!(moved.kind(), ChartKind::Circle { .. }));
    }

    #[test]
    fn translation_family_shifts_chart() {
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        let moved = apply_family(&translations(vec![1.0, -2.0], 0.0, 1.0), &[0.5], &c).unwrap();
        let (a, b) = (c.eval(&[0.2]), moved.eval(&[0.2]));
        assert!((b[0] - a[0] - 0.5).abs() < 1e-15 && (b[1] - a[1] + 1.0).abs() < 1e-15);
        assert_eq!(moved.weight(&[0.2]), c.weight(&[0.2]));
    }

    #[test]
    fn sheared_parabola_jacobian_matches_composition() {
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        let moved = apply_family(&shears(-1.0, 1.0), &[0.3], &c).unwrap();
        for u in [-0.4, -0.1, 0.0, 0.25] {
            // d/du (u + 0.3u², u²) = (1 + 0.6u, 2u)
            let j = moved.jacobian(&[u]);
            let exact = [1.0 + 0.6 * u, 2.0 * u];
            for i in 0..2 {
                let err = (j[(i, 0)] - exact[i]).abs() / (1.0 + exact[i].abs());
                assert!(err < 1e-6, "u={u} row {i}: {} vs {}", j[(i, 0)], exact[i]);
            }
        }
    }

    #[test]
    fn family_outside_box_rejected() {
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 }).unwrap();
        assert!(matches!(
            apply_family(&planar_rotations(0.0, 1.0), &[2.0], &c),
            Err(GeometryError::ParamOutOfBox { .. })
        ));
    }

    #[test]
    fn affine_family_keeps_polygon_mass() {
        let sq = make_builtin_surface(&BuiltinSurface::Square { side: 1.0 }).unwrap();
        let moved = apply_family(&shears(-1.0, 1.0), &[0.7], &sq).unwrap();
        match moved.kind() {
            ChartKind::PolygonBoundary(p) => assert!((p.mass() - 4.0).abs() < 1e-12),
            k => panic!("unexpected {k:?}"),
        }
    }
}
