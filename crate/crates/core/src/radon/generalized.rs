use std::sync::Arc;

use rayon::prelude::*;

use super::measure::{axis_rules, tensor_rule};
use super::{GridField, ParamStack, RadonError, MIN_DENSITY};
use crate::geometry::{ParamAxis, ScalarFn, SurfaceChart, TransformFamily, RANK_REL_TOL};
use crate::numerics::{fd_jacobian, singular_values_desc, FD_REL_STEP};

/// `(x, s, t, out) ↦ out = γ(x, s, t)`.
pub type SurfaceFamilyMap = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// `Rf(x, s) = ∫ f(γ(x, s, t)) χ(t) dt` for a family of k-surfaces in R^n
/// indexed by `(x, s) ∈ R^n × R^m`.
#[derive(Clone)]
pub struct GeneralizedRadon {
    ambient_dim: usize,
    param_dim: usize,
    t_axes: Vec<ParamAxis>,
    map: SurfaceFamilyMap,
    chi: ScalarFn,
}

/// Quadrature in t with `χ` folded into the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct TRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GeneralizedOutput {
    pub stack: ParamStack,
    /// Evaluations with `γ(x, s, t)` outside the box of `f`; these read as 0.
    pub out_of_box: usize,
    pub evaluations: usize,
}

impl GeneralizedRadon {
    pub fn new(ambient_dim: usize, param_dim: usize, t_axes: Vec<ParamAxis>, map: SurfaceFamilyMap, chi: ScalarFn) -> Self {
        GeneralizedRadon { ambient_dim, param_dim, t_axes, map, chi }
    }

    /// `γ(x, s, t) = x + T_s(Φ(t))` with `χ` the chart weight.
    pub fn translation_invariant(chart: &SurfaceChart, family: &TransformFamily) -> Self {
        let phi = chart.map_fn().clone();
        let t_map = family.map_fn().clone();
        let n = chart.ambient_dim();
        GeneralizedRadon {
            ambient_dim: n,
            param_dim: family.param_dim(),
            t_axes: chart.axes().to_vec(),
            map: Arc::new(move |x, s, t, out| {
                let mut y = [0.0; 8];
                let mut z = [0.0; 8];
                phi(t, &mut y[..n]);
                t_map(s, &y[..n], &mut z[..n]);
                for i in 0..n {
                    out[i] = x[i] + z[i];
                }
            }),
            chi: chart.weight_fn().clone(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn surface_dim(&self) -> usize {
        self.t_axes.len()
    }

    pub fn t_axes(&self) -> &[ParamAxis] {
        &self.t_axes
    }

    pub fn eval(&self, x: &[f64], s: &[f64], t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        (self.map)(x, s, t, &mut out);
        out
    }

    /// `D_tγ(x, s, t)`, n×k.
    pub fn dt_jacobian(&self, x: &[f64], s: &[f64], t: &[f64]) -> nalgebra::DMatrix<f64> {
        fd_jacobian(|tt, out| (self.map)(x, s, tt, out), t, self.ambient_dim, FD_REL_STEP)
    }

    fn t_probes(&self) -> Vec<Vec<f64>> {
        let per_axis = match self.surface_dim() {
            1 => 65,
            2 => 17,
            _ => 7,
        };
        let coords: Vec<Vec<f64>> = self
            .t_axes
            .iter()
            .map(|a| (0..per_axis).map(|i| a.lo + (i as f64 + 0.5) / per_axis as f64 * a.width()).collect())
            .collect();
        crate::geometry::tensor_points(&coords).into_iter().filter(|t| (self.chi)(t) != 0.0).collect()
    }

    /// Smallest `σ_k/σ_1` of `D_tγ` over the probes; errors below the rank
    /// tolerance.
    pub fn check_injective(&self, xs: &[Vec<f64>], ss: &[Vec<f64>]) -> Result<f64, RadonError> {
        let k = self.surface_dim();
        let mut worst = f64::INFINITY;
        for t in self.t_probes() {
            for x in xs {
                for s in ss {
                    let sv = singular_values_desc(&self.dt_jacobian(x, s, &t));
                    let ratio = if sv[0] > 0.0 { sv[k - 1] / sv[0] } else { 0.0 };
                    if !(ratio > RANK_REL_TOL) {
                        return Err(RadonError::NotInjective {
                            x: x.clone(),
                            s: s.clone(),
                            t,
                            sigma_min: sv[k - 1],
                            sigma_max: sv[0],
                        });
                    }
                    worst = worst.min(ratio);
                }
            }
        }
        Ok(worst)
    }

    /// t-rule with image-space node gap at most `spacing/density`, sized from
    /// the largest `|∂_{t_i}γ|` over the probes.
    pub fn t_rule(&self, xs: &[Vec<f64>], ss: &[Vec<f64>], spacing: f64, density: f64) -> Result<TRule, RadonError> {
        if !(density >= MIN_DENSITY) {
            return Err(RadonError::DensityTooLow { density, required: MIN_DENSITY, spacing });
        }
        let k = self.surface_dim();
        let mut speed = vec![0.0f64; k];
        for t in self.t_probes() {
            for x in xs {
                for s in ss {
                    let j = self.dt_jacobian(x, s, &t);
                    for (i, v) in speed.iter_mut().enumerate() {
                        *v = v.max(j.column(i).norm());
                    }
                }
            }
        }
        let lengths: Vec<f64> = self.t_axes.iter().zip(&speed).map(|(a, v)| v * a.width()).collect();
        let rules = axis_rules(&self.t_axes, &lengths, spacing, density);
        let (nodes, weights) = tensor_rule(&rules, |t| (self.chi)(t));
        Ok(TRule { nodes, weights })
    }

    /// Evaluates on the cells of `x_grid` for each `(s, weight)` sample.
    pub fn apply(&self, f: &GridField, x_grid: &GridField, samples: &[(Vec<f64>, f64)], rule: &TRule) -> Result<GeneralizedOutput, RadonError> {
        self.check_dims(f, x_grid, samples)?;
        let n = self.ambient_dim;
        let results: Vec<(GridField, usize)> = samples
            .par_iter()
            .map(|(s, _)| {
                let mut slice = x_grid.zeros_like();
                let mut outside = 0usize;
                let mut x = vec![0.0; n];
                let mut y = vec![0.0; n];
                for flat in 0..slice.len() {
                    x_grid.center_into(flat, &mut x);
                    let mut acc = 0.0;
                    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                        (self.map)(&x, s, t, &mut y);
                        if !f.contains(&y) {
                            outside += 1;
                            continue;
                        }
                        acc += w * f.interpolate(&y);
                    }
                    slice.values_mut()[flat] = acc;
                }
                (slice, outside)
            })
            .collect();
        let out_of_box = results.iter().map(|r| r.1).sum();
        Ok(GeneralizedOutput {
            stack: ParamStack {
                params: samples.iter().map(|s| s.0.clone()).collect(),
                weights: samples.iter().map(|s| s.1).collect(),
                slices: results.into_iter().map(|r| r.0).collect(),
            },
            out_of_box,
            evaluations: x_grid.len() * samples.len() * rule.nodes.len(),
        })
    }

    /// Transpose of `apply` with respect to `∫ f h dx` on the grid of `f` and
    /// `Σ_j w_j ∫ F_j G_j dx` on the x-grid.
    pub fn adjoint(&self, g: &ParamStack, f_grid: &GridField, rule: &TRule) -> Result<GridField, RadonError> {
        let n = self.ambient_dim;
        let mut out = f_grid.zeros_like();
        let ratio = |x_grid: &GridField| x_grid.cell_volume() / f_grid.cell_volume();
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for ((s, w), slice) in g.params.iter().zip(&g.weights).zip(&g.slices) {
            let scale = w * ratio(slice);
            for flat in 0..slice.len() {
                let v = slice.values()[flat];
                if v == 0.0 {
                    continue;
                }
                slice.center_into(flat, &mut x);
                for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                    (self.map)(&x, s, t, &mut y);
                    if f_grid.contains(&y) {
                        out.scatter_add(&y, scale * wt * v);
                    }
                }
            }
        }
        Ok(out)
    }

    fn check_dims(&self, f: &GridField, x_grid: &GridField, samples: &[(Vec<f64>, f64)]) -> Result<(), RadonError> {
        if f.ndim() != self.ambient_dim || x_grid.ndim() != self.ambient_dim {
            return Err(RadonError::Dimension(format!("operator acts on R^{} fields", self.ambient_dim)));
        }
        if let Some((s, _)) = samples.iter().find(|(s, _)| s.len() != self.param_dim) {
            return Err(RadonError::Dimension(format!("parameter sample {s:?} should have {} entries", self.param_dim)));
        }
        Ok(())
    }
}

/// Checks injectivity of `D_tγ` at the corners and center of the x-grid for
/// every sample, builds a t-rule at `density` points per cell of `f`, and
/// applies the operator.
pub fn apply_generalized(
    f: &GridField,
    op: &GeneralizedRadon,
    x_grid: &GridField,
    samples: &[(Vec<f64>, f64)],
    density: f64,
) -> Result<GeneralizedOutput, RadonError> {
    op.check_dims(f, x_grid, samples)?;
    let xs = probe_xs(x_grid);
    let ss: Vec<Vec<f64>> = samples.iter().map(|s| s.0.clone()).collect();
    op.check_injective(&xs, &ss)?;
    let h = f.spacings().iter().copied().fold(f64::INFINITY, f64::min);
    let rule = op.t_rule(&xs, &ss, h, density)?;
    op.apply(f, x_grid, samples, &rule)
}

fn probe_xs(g: &GridField) -> Vec<Vec<f64>> {
    let d = g.ndim();
    let mut xs: Vec<Vec<f64>> = (0..(1usize << d))
        .map(|c| (0..d).map(|a| if (c >> a) & 1 == 1 { g.extents()[a].1 } else { g.extents()[a].0 }).collect())
        .collect();
    xs.push(g.extents().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect());
    xs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decay::ParamQuadrature;
    use crate::geometry::{make_builtin_surface, planar_rotations, BuiltinSurface};
    use crate::radon::{apply_averaged, Averaging, ConvolveMethod};
    use std::f64::consts::PI;

    fn bump(r: f64) -> impl Fn(&[f64]) -> f64 {
        move |x: &[f64]| {
            let q: f64 = x.iter().map(|v| v * v).sum::<f64>() / (r * r);
            if q < 1.0 { (-1.0 / (1.0 - q)).exp() } else { 0.0 }
        }
    }

    #[test]
    fn translation_invariant_path_reproduces_averaged_operator() {
        let f = GridField::from_fn(&[96, 96], &[(-2.0, 2.0), (-2.0, 2.0)], bump(0.7)).unwrap();
        let chart = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        let family = planar_rotations(-0.6, 0.6);
        let rule = ParamQuadrature::tensor(&[(-0.6, 0.6)], 16, &[false], None);
        let avg = apply_averaged(&f, &chart, &Averaging::Family { family: family.clone(), rule: rule.clone() }, 4.0, ConvolveMethod::Fft).unwrap();
        let op = GeneralizedRadon::translation_invariant(&chart, &family);
        let samples: Vec<(Vec<f64>, f64)> = rule.nodes.iter().cloned().zip(rule.weights.iter().copied()).collect();
        let gen = apply_generalized(&f, &op, &f, &samples, 4.0).unwrap();
        let scale = avg.slices.iter().flat_map(|s| s.values()).fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in avg.slices.iter().zip(&gen.stack.slices) {
            let d = a.values().iter().zip(b.values()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(d < 1e-4 * scale, "{d}");
        }
    }

    #[test]
    fn constant_input_integrates_the_cutoff() {
        let f = GridField::from_fn(&[40, 40], &[(-3.0, 3.0), (-3.0, 3.0)], |_| 1.0).unwrap();
        let chart = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.5 }).unwrap();
        let op = GeneralizedRadon::translation_invariant(&chart, &planar_rotations(0.0, 1.0));
        let xg = GridField::zeros(&[5, 5], &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let out = apply_generalized(&f, &op, &xg, &[(vec![0.3], 1.0)], 2.0).unwrap();
        for v in out.stack.slices[0].values() {
            assert!((v - PI).abs() < 1e-10, "{v}");
        }
        assert_eq!(out.out_of_box, 0);
    }

    #[test]
    fn gaussian_line_integral() {
        // ∫ exp(−|x + tω|²/σ²) dt over the line is σ√π exp(−|x⊥|²/σ²)
        let sigma: f64 = 0.5;
        let f = GridField::from_fn(&[6144, 6144], &[(-2.4, 2.4), (-2.4, 2.4)], |x| {
            (-(x[0] * x[0] + x[1] * x[1]) / (sigma * sigma)).exp()
        })
        .unwrap();
        let op = GeneralizedRadon::new(
            2,
            1,
            vec![ParamAxis::interval(-5.0, 5.0)],
            Arc::new(|x, s, t, out| {
                out[0] = x[0] + t[0] * s[0].cos();
                out[1] = x[1] + t[0] * s[0].sin();
            }),
            Arc::new(|t| crate::geometry::plateau_cutoff(&[t[0] / 10.0])),
        );
        let xg = GridField::zeros(&[4, 4], &[(-0.25, 0.25), (-0.25, 0.25)]).unwrap();
        let samples = vec![(vec![0.37], 1.0), (vec![1.9], 1.0)];
        let out = apply_generalized(&f, &op, &xg, &samples, 4.0).unwrap();
        for ((s, _), slice) in samples.iter().zip(&out.stack.slices) {
            for flat in 0..slice.len() {
                let x = slice.center(flat);
                let perp = -x[0] * s[0].sin() + x[1] * s[0].cos();
                let want = sigma * PI.sqrt() * (-perp * perp / (sigma * sigma)).exp();
                assert!((slice.values()[flat] - want).abs() < 1e-6, "{} vs {want}", slice.values()[flat]);
            }
        }
    }

    #[test]
    fn adjoint_is_the_transpose() {
        let f = GridField::from_fn(&[24, 24], &[(-1.5, 1.5), (-1.5, 1.5)], bump(0.6)).unwrap();
        let xg = GridField::zeros(&[10, 12], &[(-0.7, 0.7), (-0.6, 0.6)]).unwrap();
        let op = GeneralizedRadon::new(
            2,
            1,
            vec![ParamAxis::interval(-0.5, 0.5)],
            Arc::new(|x, s, t, out| {
                out[0] = x[0] + t[0] + 0.2 * s[0] * x[1];
                out[1] = x[1] + t[0] * t[0] * (1.0 + s[0]) + 0.1 * x[0] * t[0];
            }),
            Arc::new(|t| crate::geometry::bump(t, &[0.0], 0.5)),
        );
        let samples = vec![(vec![0.1], 0.5), (vec![-0.4], 0.3), (vec![0.8], 0.2)];
        let xs = vec![vec![0.0, 0.0]];
        let ss: Vec<Vec<f64>> = samples.iter().map(|s| s.0.clone()).collect();
        let rule = op.t_rule(&xs, &ss, f.spacing(0), 2.0).unwrap();
        let rf = op.apply(&f, &xg, &samples, &rule).unwrap().stack;
        let g = rf.map_slices(|s| {
            let mut t = s.zeros_like();
            for (i, v) in t.values_mut().iter_mut().enumerate() {
                *v = ((i * 31) % 17) as f64 / 17.0 - 0.3;
            }
            t
        });
        let lhs = rf.dot(&g).unwrap();
        let rhs = f.dot(&op.adjoint(&g, &f, &rule).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn out_of_box_reads_are_counted() {
        let f = GridField::from_fn(&[16, 16], &[(-1.0, 1.0), (-1.0, 1.0)], |_| 1.0).unwrap();
        let chart = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.8 }).unwrap();
        let op = GeneralizedRadon::translation_invariant(&chart, &planar_rotations(0.0, 1.0));
        let xg = GridField::zeros(&[2, 2], &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let out = apply_generalized(&f, &op, &xg, &[(vec![0.0], 1.0)], 2.0).unwrap();
        assert!(out.out_of_box > 0 && out.out_of_box < out.evaluations);
    }

    #[test]
    fn degenerate_surface_family_is_rejected() {
        let op = GeneralizedRadon::new(
            2,
            0,
            vec![ParamAxis::interval(-1.0, 1.0)],
            Arc::new(|x, _, _, out| out.copy_from_slice(x)),
            Arc::new(|t| crate::geometry::bump(t, &[0.0], 1.0)),
        );
        let f = GridField::zeros(&[8, 8], &[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        assert!(matches!(apply_generalized(&f, &op, &f, &[(vec![], 1.0)], 2.0), Err(RadonError::NotInjective { .. })));
    }
}
