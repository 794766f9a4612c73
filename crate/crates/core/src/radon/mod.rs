//! Averaged Radon operators on sampled grids.
//!
//! Throughout, `Rf(x, s) = ∫ f(x + y) dμ_s(y)` where `μ_s` is the image of a
//! chart measure under the s-th transformation.

mod convolve;
mod generalized;
mod grid;
mod io;
mod measure;

use rayon::prelude::*;
use thiserror::Error;

pub use convolve::{check_padding, convolve, correlate, ConvolveMethod, FftCorrelator, LatticeKernel};
pub use generalized::{apply_generalized, GeneralizedOutput, GeneralizedRadon, SurfaceFamilyMap, TRule};
pub use grid::GridField;
pub use io::{read_grid, read_grid_file, write_grid, write_grid_file, GridHeader, GRID_FORMAT};
pub use measure::{discretize_measure, DiscreteMeasure, Moments, MIN_DENSITY};

use crate::decay::ParamQuadrature;
use crate::geometry::{GeometryError, RotationSampler, SurfaceChart, TransformFamily};

/// Fewest parameter samples accepted by the averaged operators.
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Error)]
pub enum RadonError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite grid value at flat index {index}")]
    NonFinite { index: usize },
    #[error("measure weights must be finite and nonnegative")]
    NegativeWeight,
    #[error("rule density {density} is below the required {required} points per cell of width {spacing}")]
    DensityTooLow { density: f64, required: f64, spacing: f64 },
    #[error("insufficient padding on axis {axis}: need {cells} more cells ({length} in length) between the support of f and the box face")]
    InsufficientPadding { axis: usize, cells: usize, length: f64 },
    #[error("{got} parameter samples given, at least {required} required")]
    TooFewSamples { got: usize, required: usize },
    #[error("D_t gamma is rank-deficient at x={x:?}, s={s:?}, t={t:?} (sigma_min {sigma_min:e}, sigma_max {sigma_max:e})")]
    NotInjective { x: Vec<f64>, s: Vec<f64>, t: Vec<f64>, sigma_min: f64, sigma_max: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Slices `Rf(·, s_j)` with parameter quadrature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStack {
    pub params: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub slices: Vec<GridField>,
}

impl ParamStack {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// `Σ_j w_j ∫ a_j b_j dx`.
    pub fn dot(&self, other: &ParamStack) -> Result<f64, RadonError> {
        if self.len() != other.len() {
            return Err(RadonError::Dimension("stacks have different lengths".into()));
        }
        let mut acc = 0.0;
        for ((a, b), w) in self.slices.iter().zip(&other.slices).zip(&self.weights) {
            acc += w * a.dot(b)?;
        }
        Ok(acc)
    }

    /// Same parameters and weights, new slice values.
    pub fn map_slices(&self, f: impl Fn(&GridField) -> GridField) -> ParamStack {
        ParamStack { params: self.params.clone(), weights: self.weights.clone(), slices: self.slices.iter().map(f).collect() }
    }

    /// One field over (sample index, x), the sample axis first with extent
    /// `[0, len)`.
    pub fn to_field(&self) -> Result<GridField, RadonError> {
        let first = self.slices.first().ok_or_else(|| RadonError::Dimension("empty stack".into()))?;
        let mut dims = vec![self.len()];
        dims.extend_from_slice(first.dims());
        let mut extents = vec![(0.0, self.len() as f64)];
        extents.extend_from_slice(first.extents());
        let mut values = Vec::with_capacity(first.len() * self.len());
        for s in &self.slices {
            values.extend_from_slice(s.values());
        }
        GridField::from_values(&dims, &extents, values)
    }
}

/// How the surface measure is moved around.
#[derive(Clone, Debug)]
pub enum Averaging {
    /// `μ_θ` with `⟨f, μ_θ⟩ = ⟨f(θ⁻¹·), μ⟩`; parameters are the matrix
    /// entries, row-major.
    Rotations(RotationSampler),
    /// `μ_s = (T_s)_*μ` at the nodes of a parameter rule.
    Family { family: TransformFamily, rule: ParamQuadrature },
}

struct Slice {
    param: Vec<f64>,
    weight: f64,
    kernel: LatticeKernel,
}

/// The discrete operator `f ↦ (Rf(·, s_j))_j` on a fixed grid, together
/// with its exact transpose.
pub struct AveragedOperator {
    template: GridField,
    slices: Vec<Slice>,
}

impl AveragedOperator {
    /// Discretizes the chart once at `density` points per cell and moves the
    /// points for each sample.
    pub fn new(chart: &SurfaceChart, averaging: &Averaging, grid: &GridField, density: f64) -> Result<Self, RadonError> {
        if chart.ambient_dim() != grid.ndim() {
            return Err(RadonError::Dimension(format!("chart in R^{} but grid in R^{}", chart.ambient_dim(), grid.ndim())));
        }
        let h = grid.spacings().iter().copied().fold(f64::INFINITY, f64::min);
        let base = discretize_measure(chart, h, density)?;
        let measures: Vec<(Vec<f64>, f64, DiscreteMeasure)> = match averaging {
            Averaging::Rotations(sampler) => sampler
                .samples()
                .into_iter()
                .map(|r| {
                    let param = r.matrix.transpose().as_slice().to_vec();
                    (param, r.weight, base.linear_image(&r.matrix.transpose()))
                })
                .collect(),
            Averaging::Family { family, rule } => {
                if family.ambient_dim() != grid.ndim() {
                    return Err(RadonError::Dimension("family and grid dimensions differ".into()));
                }
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(s, w)| (s.clone(), *w, base.pushforward(|y, out| family.eval_into(s, y, out))))
                    .collect()
            }
        };
        Self::from_measures(grid, measures)
    }

    /// Operator from explicit per-sample measures.
    pub fn from_measures(grid: &GridField, measures: Vec<(Vec<f64>, f64, DiscreteMeasure)>) -> Result<Self, RadonError> {
        if measures.len() < MIN_SAMPLES {
            return Err(RadonError::TooFewSamples { got: measures.len(), required: MIN_SAMPLES });
        }
        let spacings = grid.spacings();
        let slices = measures
            .into_par_iter()
            .map(|(param, weight, m)| Ok(Slice { param, weight, kernel: LatticeKernel::scatter(&m, &spacings)? }))
            .collect::<Result<Vec<_>, RadonError>>()?;
        Ok(AveragedOperator { template: grid.zeros_like(), slices })
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn kernels(&self) -> impl Iterator<Item = &LatticeKernel> {
        self.slices.iter().map(|s| &s.kernel)
    }

    fn check_grid(&self, f: &GridField) -> Result<(), RadonError> {
        if !f.same_grid(&self.template) {
            return Err(RadonError::Dimension("field is not on the operator's grid".into()));
        }
        Ok(())
    }

    fn max_kernel_dims(&self) -> Vec<usize> {
        (0..self.template.ndim()).map(|a| self.slices.iter().map(|s| s.kernel.dims()[a]).max().unwrap_or(1)).collect()
    }

    pub fn apply(&self, f: &GridField, method: ConvolveMethod) -> Result<ParamStack, RadonError> {
        self.check_grid(f)?;
        for s in &self.slices {
            check_padding(f, &s.kernel)?;
        }
        let fft = matches!(method, ConvolveMethod::Fft).then(|| FftCorrelator::new(f, &self.max_kernel_dims()));
        let slices: Vec<GridField> = self
            .slices
            .par_iter()
            .map(|s| match &fft {
                Some(c) => c.correlate(&s.kernel),
                None => correlate(f, &s.kernel, ConvolveMethod::Direct),
            })
            .collect();
        Ok(ParamStack {
            params: self.slices.iter().map(|s| s.param.clone()).collect(),
            weights: self.slices.iter().map(|s| s.weight).collect(),
            slices,
        })
    }

    /// `R*g` with respect to `⟨f, h⟩ = ∫ f h dx` and `⟨F, G⟩ = Σ_j w_j ∫ F_j G_j dx`.
    pub fn adjoint(&self, g: &ParamStack, method: ConvolveMethod) -> Result<GridField, RadonError> {
        if g.len() != self.len() {
            return Err(RadonError::Dimension("stack length differs from the sample count".into()));
        }
        let mut out = self.template.zeros_like();
        for (s, gs) in self.slices.iter().zip(&g.slices) {
            self.check_grid(gs)?;
            let part = correlate(gs, &s.kernel.reflected(), method);
            for (o, v) in out.values_mut().iter_mut().zip(part.values()) {
                *o += s.weight * v;
            }
        }
        Ok(out)
    }
}

/// Stacked `Rf(·, s_j)` for every parameter sample.
pub fn apply_averaged(
    f: &GridField,
    chart: &SurfaceChart,
    averaging: &Averaging,
    density: f64,
    method: ConvolveMethod,
) -> Result<ParamStack, RadonError> {
    AveragedOperator::new(chart, averaging, f, density)?.apply(f, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, planar_rotations, so3_rotations, BuiltinSurface, RotationScheme};
    use std::f64::consts::TAU;

    fn grid(n: usize, cells: usize, half: f64, f: impl Fn(&[f64]) -> f64) -> GridField {
        GridField::from_fn(&vec![cells; n], &vec![(-half, half); n], f).unwrap()
    }

    fn bump(r: f64) -> impl Fn(&[f64]) -> f64 {
        move |x: &[f64]| {
            let q: f64 = x.iter().map(|v| v * v).sum::<f64>() / (r * r);
            if q < 1.0 { (-1.0 / (1.0 - q)).exp() } else { 0.0 }
        }
    }

    fn rotations2(count: usize) -> Averaging {
        Averaging::Rotations(RotationSampler::new(2, RotationScheme::UniformAngles, count, 0).unwrap())
    }

    #[test]
    fn radial_input_gives_identical_slices_under_rotation() {
        // rotating a circle measure about its center only relabels points
        let f = grid(2, 64, 2.0, bump(0.6));
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.7 }).unwrap();
        let out = apply_averaged(&f, &c, &rotations2(16), 4.0, ConvolveMethod::Fft).unwrap();
        let first = &out.slices[0];
        let scale = first.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for s in &out.slices[1..] {
            let d = s.values().iter().zip(first.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(d < 2e-3 * scale, "{d}");
        }
    }

    #[test]
    fn identity_slice_matches_plain_convolution() {
        let f = grid(2, 48, 2.0, bump(0.5));
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        let out = apply_averaged(&f, &c, &rotations2(16), 2.0, ConvolveMethod::Fft).unwrap();
        let h = f.spacing(0);
        let direct = convolve(&f, &discretize_measure(&c, h, 2.0).unwrap(), ConvolveMethod::Direct).unwrap();
        let d = out.slices[0].values().iter().zip(direct.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn mixed_integral_matches_triple_riemann_sum() {
        let f = grid(2, 20, 1.5, |x| bump(0.4)(&[x[0] - 0.1, x[1]]) + 0.5 * bump(0.3)(&[x[0], x[1] + 0.2]));
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.5 }).unwrap();
        let op = AveragedOperator::new(&c, &rotations2(16), &f, 2.0).unwrap();
        let out = op.apply(&f, ConvolveMethod::Fft).unwrap();
        let q = 3.0;
        let fast: f64 = out
            .slices
            .iter()
            .zip(&out.weights)
            .map(|(s, w)| w * s.values().iter().map(|v| v.abs().powf(q)).sum::<f64>() * s.cell_volume())
            .sum();
        let m = discretize_measure(&c, f.spacing(0), 2.0).unwrap();
        let mut brute = 0.0;
        for j in 0..16 {
            let a = TAU * j as f64 / 16.0;
            let (sn, cs) = a.sin_cos();
            for flat in 0..f.len() {
                let x = f.center(flat);
                let mut v = 0.0;
                for (y, w) in m.points().iter().zip(m.weights()) {
                    // θᵀy
                    let p = [cs * y[0] + sn * y[1], -sn * y[0] + cs * y[1]];
                    v += w * f.interpolate(&[x[0] + p[0], x[1] + p[1]]);
                }
                brute += v.abs().powf(q) * f.cell_volume() / 16.0;
            }
        }
        assert!((fast - brute).abs() < 1e-8 * brute.max(1.0), "{fast} vs {brute}");
    }

    #[test]
    fn operator_is_linear() {
        let f = grid(2, 40, 2.0, bump(0.5));
        let g = grid(2, 40, 2.0, |x| bump(0.4)(&[x[0] + 0.2, x[1] - 0.1]));
        let c = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 }).unwrap();
        let op = AveragedOperator::new(&c, &Averaging::Family {
            family: planar_rotations(-0.5, 0.5),
            rule: ParamQuadrature::tensor(&[(-0.5, 0.5)], 16, &[false], None),
        }, &f, 2.0)
        .unwrap();
        let (a, b) = (1.7, -0.6);
        let lhs = op.apply(&f.combine(a, &g, b).unwrap(), ConvolveMethod::Fft).unwrap();
        let rf = op.apply(&f, ConvolveMethod::Fft).unwrap();
        let rg = op.apply(&g, ConvolveMethod::Fft).unwrap();
        for ((l, x), y) in lhs.slices.iter().zip(&rf.slices).zip(&rg.slices) {
            let rhs = x.combine(a, y, b).unwrap();
            let d = l.values().iter().zip(rhs.values()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(d < 1e-13, "{d}");
        }
    }

    #[test]
    fn translation_covariance() {
        let f = grid(2, 48, 2.0, bump(0.4));
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.5 }).unwrap();
        let op = AveragedOperator::new(&c, &rotations2(16), &f, 2.0).unwrap();
        let shift = [3i64, -2];
        let moved = op.apply(&f.shifted(&shift), ConvolveMethod::Direct).unwrap();
        let base = op.apply(&f, ConvolveMethod::Direct).unwrap();
        for (m, b) in moved.slices.iter().zip(&base.slices) {
            let d = m.values().iter().zip(b.shifted(&shift).values()).fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()));
            assert!(d < 1e-13);
        }
    }

    #[test]
    fn adjoint_is_the_transpose() {
        let f = grid(3, 12, 1.5, bump(0.5));
        let c = make_builtin_surface(&BuiltinSurface::Sphere { n: 3, radius: 0.4 }).unwrap();
        let avg = Averaging::Family { family: so3_rotations(0.3), rule: ParamQuadrature::tensor(&vec![(-0.3, 0.3); 3], 3, &[false; 3], None) };
        let op = AveragedOperator::new(&c, &avg, &f, 2.0).unwrap();
        let rf = op.apply(&f, ConvolveMethod::Fft).unwrap();
        let g = rf.map_slices(|s| {
            let mut t = s.zeros_like();
            for (i, v) in t.values_mut().iter_mut().enumerate() {
                *v = ((i * 7919) % 13) as f64 / 13.0 - 0.4;
            }
            t
        });
        for method in [ConvolveMethod::Direct, ConvolveMethod::Fft] {
            let lhs = rf.dot(&g).unwrap();
            let rhs = f.dot(&op.adjoint(&g, method).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{method:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let f = grid(2, 16, 2.0, bump(0.4));
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.5 }).unwrap();
        assert!(matches!(
            apply_averaged(&f, &c, &rotations2(8), 2.0, ConvolveMethod::Fft),
            Err(RadonError::TooFewSamples { got: 8, .. })
        ));
    }
}
