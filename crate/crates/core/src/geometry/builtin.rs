use std::f64::consts::TAU;
use std::str::FromStr;
use std::sync::Arc;

use super::chart::{bump, plateau_cutoff, ChartKind, ParamAxis, PolygonData, SurfaceChart};
use super::GeometryError;

/// Named surfaces with their numeric parameters.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BuiltinSurface {
    /// Full circle of the given radius with arc-length measure.
    Circle { radius: f64 },
    /// Closed polygon with (per-edge constant) arc-length measure.
    Polygon { vertices: Vec<[f64; 2]>, convex: bool, edge_weights: Option<Vec<f64>> },
    /// Axis-aligned square of the given side, centered at the origin.
    Square { side: f64 },
    /// Paraboloid patch `x_n = |u|²` with a bump cutoff of the given radius.
    ParabolaGraph { n: usize, radius: f64 },
    /// `x_n = |x'|^β`, β > 2, weight identically 1 near the origin.
    BetaSurface { n: usize, beta: f64 },
    /// Polar cap of the unit sphere in R^n with a bump cutoff.
    Sphere { n: usize, radius: f64 },
    /// `t ↦ (t, t², …, t^n)` on `|t| < 1/2` with a bump cutoff.
    MomentCurveSegment { n: usize },
    /// Segment on the first coordinate axis with a bump cutoff.
    Segment { n: usize, half_length: f64 },
}

impl BuiltinSurface {
    pub fn unit_square() -> Self {
        BuiltinSurface::Square { side: 1.0 }
    }
}

/// Builds the chart for a named surface.
pub fn make_builtin_surface(spec: &BuiltinSurface) -> Result<SurfaceChart, GeometryError> {
    match spec {
        BuiltinSurface::Circle { radius } => circle(*radius),
        BuiltinSurface::Polygon { vertices, convex, edge_weights } => polygon(vertices.clone(), *convex, edge_weights.clone()),
        BuiltinSurface::Square { side } => {
            let h = side / 2.0;
            polygon(vec![[-h, -h], [h, -h], [h, h], [-h, h]], true, None).map(|c| c.with_label("square"))
        }
        BuiltinSurface::ParabolaGraph { n, radius } => parabola_graph(*n, *radius),
        BuiltinSurface::BetaSurface { n, beta } => beta_surface(*n, *beta),
        BuiltinSurface::Sphere { n, radius } => sphere_cap(*n, *radius),
        BuiltinSurface::MomentCurveSegment { n } => moment_curve(*n),
        BuiltinSurface::Segment { n, half_length } => segment(*n, *half_length),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, GeometryError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(GeometryError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn ambient(n: usize, min: usize) -> Result<usize, GeometryError> {
    if n >= min {
        Ok(n)
    } else {
        Err(GeometryError::InvalidParameter(format!("ambient dimension must be at least {min}, got {n}")))
    }
}

fn circle(radius: f64) -> Result<SurfaceChart, GeometryError> {
    let r = positive("radius", radius)?;
    SurfaceChart::new(
        2,
        vec![ParamAxis::periodic(0.0, TAU)],
        Arc::new(move |u, out| {
            out[0] = r * u[0].cos();
            out[1] = r * u[0].sin();
        }),
        Arc::new(move |_| r),
        ChartKind::Circle { radius: r },
        true,
    )
    .map(|c| c.with_label("circle"))
}

fn polygon(vertices: Vec<[f64; 2]>, convex: bool, edge_weights: Option<Vec<f64>>) -> Result<SurfaceChart, GeometryError> {
    let m = vertices.len();
    if m < 3 {
        return Err(GeometryError::InvalidParameter(format!("polygon needs at least 3 vertices, got {m}")));
    }
    let edge_weights = edge_weights.unwrap_or_else(|| vec![1.0; m]);
    if edge_weights.len() != m || edge_weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(GeometryError::InvalidParameter("edge_weights must be one nonnegative value per edge".into()));
    }
    let data = PolygonData { vertices, edge_weights };
    let lengths = data.edge_lengths();
    if lengths.iter().any(|l| *l <= 0.0) {
        return Err(GeometryError::InvalidParameter("polygon has a repeated vertex".into()));
    }
    if convex && !data.is_convex() {
        return Err(GeometryError::NonConvex);
    }
    let mut cum = vec![0.0];
    for l in &lengths {
        cum.push(cum.last().unwrap() + l);
    }
    let perimeter = *cum.last().unwrap();
    let breaks = cum[1..m].to_vec();
    let verts = data.vertices.clone();
    let cum_map = cum.clone();
    let cum_w = cum.clone();
    let weights = data.edge_weights.clone();
    let locate = move |cum: &[f64], u: f64| -> (usize, f64) {
        let s = u.rem_euclid(perimeter);
        let e = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(m - 1),
            Err(i) => i - 1,
        };
        (e, s - cum[e])
    };
    let locate2 = locate;
    SurfaceChart::new(
        2,
        vec![ParamAxis::periodic(0.0, perimeter).with_breaks(breaks)],
        Arc::new(move |u, out| {
            let (e, s) = locate(&cum_map, u[0]);
            let a = verts[e];
            let b = verts[(e + 1) % m];
            let len = cum_map[e + 1] - cum_map[e];
            let f = s / len;
            out[0] = a[0] + f * (b[0] - a[0]);
            out[1] = a[1] + f * (b[1] - a[1]);
        }),
        Arc::new(move |u| weights[locate2(&cum_w, u[0]).0]),
        ChartKind::PolygonBoundary(data),
        convex,
    )
    .map(|c| c.with_label("polygon"))
}

fn parabola_graph(n: usize, radius: f64) -> Result<SurfaceChart, GeometryError> {
    let n = ambient(n, 2)?;
    let r = positive("radius", radius)?;
    let k = n - 1;
    let center = vec![0.0; k];
    SurfaceChart::new(
        n,
        vec![ParamAxis::interval(-r, r); k],
        Arc::new(move |u, out| {
            out[..k].copy_from_slice(u);
            out[k] = u.iter().map(|x| x * x).sum();
        }),
        Arc::new(move |u| bump(u, &center, r)),
        ChartKind::Graph,
        true,
    )
    .map(|c| c.with_label("parabola"))
}

fn beta_surface(n: usize, beta: f64) -> Result<SurfaceChart, GeometryError> {
    let n = ambient(n, 2)?;
    if !(beta > 2.0) || !beta.is_finite() {
        return Err(GeometryError::InvalidParameter(format!("beta_surface requires beta > 2, got {beta}")));
    }
    let k = n - 1;
    SurfaceChart::new(
        n,
        vec![ParamAxis::interval(-0.5, 0.5); k],
        Arc::new(move |u, out| {
            out[..k].copy_from_slice(u);
            out[k] = u.iter().map(|x| x * x).sum::<f64>().sqrt().powf(beta);
        }),
        // ψ(2u): equal to 1 for |u| ≤ 1/4, zero for |u| ≥ 1/2
        Arc::new(move |u| {
            let v: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
            plateau_cutoff(&v)
        }),
        ChartKind::BetaSurface { beta },
        true,
    )
    .map(|c| c.with_label(format!("beta(n={n},beta={beta})")))
}

fn sphere_cap(n: usize, radius: f64) -> Result<SurfaceChart, GeometryError> {
    let n = ambient(n, 2)?;
    let r = positive("radius", radius)?;
    if r >= 1.0 {
        return Err(GeometryError::InvalidParameter("sphere cap radius must be below 1".into()));
    }
    let k = n - 1;
    let center = vec![0.0; k];
    SurfaceChart::new(
        n,
        vec![ParamAxis::interval(-r, r); k],
        Arc::new(move |u, out| {
            out[..k].copy_from_slice(u);
            out[k] = (1.0 - u.iter().map(|x| x * x).sum::<f64>()).max(0.0).sqrt();
        }),
        Arc::new(move |u| bump(u, &center, r)),
        ChartKind::Graph,
        true,
    )
    .map(|c| c.with_label(format!("sphere(n={n})")))
}

fn moment_curve(n: usize) -> Result<SurfaceChart, GeometryError> {
    let n = ambient(n, 2)?;
    SurfaceChart::new(
        n,
        vec![ParamAxis::interval(-0.5, 0.5)],
        Arc::new(move |u, out| {
            let mut p = 1.0;
            for o in out.iter_mut().take(n) {
                p *= u[0];
                *o = p;
            }
        }),
        Arc::new(|u| bump(u, &[0.0], 0.5)),
        ChartKind::Custom,
        false,
    )
    .map(|c| c.with_label(format!("moment(n={n})")))
}

fn segment(n: usize, half_length: f64) -> Result<SurfaceChart, GeometryError> {
    let n = ambient(n, 2)?;
    let l = positive("half_length", half_length)?;
    SurfaceChart::new(
        n,
        vec![ParamAxis::interval(-l, l)],
        Arc::new(move |u, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            out[0] = u[0];
        }),
        Arc::new(move |u| bump(u, &[0.0], l)),
        ChartKind::Graph,
        false,
    )
    .map(|c| c.with_label("segment"))
}

/// Parses `name` or `name:key=value,key=value`. Polygon vertices are a flat
/// list `vertices=x0;y0;x1;y1;…` (semicolon separated inside the value).
impl FromStr for BuiltinSurface {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), ""),
        };
        let mut kv: Vec<(String, String)> = Vec::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| GeometryError::Parse(format!("expected key=value in '{part}'")))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut take = |key: &str| -> Option<String> { kv.iter().position(|(k, _)| k == key).map(|i| kv.remove(i).1) };
        let num = |v: Option<String>, key: &str, default: Option<f64>| -> Result<f64, GeometryError> {
            match v {
                Some(v) => v.parse::<f64>().map_err(|_| GeometryError::Parse(format!("{key}: '{v}' is not a number"))),
                None => default.ok_or_else(|| GeometryError::Parse(format!("missing parameter '{key}'"))),
            }
        };
        let int = |v: Option<String>, key: &str, default: usize| -> Result<usize, GeometryError> {
            match v {
                Some(v) => v.parse::<usize>().map_err(|_| GeometryError::Parse(format!("{key}: '{v}' is not an integer"))),
                None => Ok(default),
            }
        };
        let surface = match name {
            "circle" => BuiltinSurface::Circle { radius: num(take("radius"), "radius", Some(1.0))? },
            "square" => BuiltinSurface::Square { side: num(take("side"), "side", Some(1.0))? },
            "polygon" => {
                let raw = take("vertices").ok_or_else(|| GeometryError::Parse("polygon needs vertices=x0;y0;…".into()))?;
                let flat: Result<Vec<f64>, _> = raw.split(';').map(|t| t.trim().parse::<f64>()).collect();
                let flat = flat.map_err(|_| GeometryError::Parse(format!("bad vertex list '{raw}'")))?;
                let convex = match take("convex").as_deref() {
                    None | Some("true") | Some("1") => true,
                    Some("false") | Some("0") => false,
                    Some(o) => return Err(GeometryError::Parse(format!("convex: '{o}' is not a boolean"))),
                };
                BuiltinSurface::Polygon { vertices: vertices_from_flat(&flat)?, convex, edge_weights: None }
            }
            "parabola" | "parabola_graph" => BuiltinSurface::ParabolaGraph {
                n: int(take("n"), "n", 2)?,
                radius: num(take("radius"), "radius", Some(0.5))?,
            },
            "beta" | "beta_surface" => BuiltinSurface::BetaSurface {
                n: int(take("n"), "n", 2)?,
                beta: num(take("beta"), "beta", None)?,
            },
            "sphere" => BuiltinSurface::Sphere { n: int(take("n"), "n", 3)?, radius: num(take("radius"), "radius", Some(0.5))? },
            "moment" | "moment_curve_segment" => BuiltinSurface::MomentCurveSegment { n: int(take("n"), "n", 3)? },
            "segment" => BuiltinSurface::Segment {
                n: int(take("n"), "n", 2)?,
                half_length: num(take("half_length"), "half_length", Some(0.5))?,
            },
            other => return Err(GeometryError::Parse(format!("unknown surface '{other}'"))),
        };
        if let Some((k, _)) = kv.first() {
            return Err(GeometryError::Parse(format!("unknown parameter '{k}' for surface '{name}'")));
        }
        Ok(surface)
    }
}

pub fn vertices_from_flat(flat: &[f64]) -> Result<Vec<[f64; 2]>, GeometryError> {
    if flat.len() % 2 != 0 || flat.len() < 6 {
        return Err(GeometryError::Parse(format!(
            "vertex list must hold an even count of at least 6 numbers, got {}",
            flat.len()
        )));
    }
    Ok(flat.chunks(2).map(|c| [c[0], c[1]]).collect())
}
