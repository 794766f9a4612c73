use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{DiscreteMeasure, GridField, RadonError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolveMethod {
    Direct,
    Fft,
}

/// Cloud-in-cell image of a measure on the lattice of grid displacements:
/// `Σ_o K[o] f[i+o]` equals `Σ_j w_j f(x_i + y_j)` with `f` interpolated
/// multilinearly between cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeKernel {
    lo: Vec<i64>,
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl LatticeKernel {
    pub fn scatter(m: &DiscreteMeasure, spacings: &[f64]) -> Result<Self, RadonError> {
        let d = m.dim();
        if spacings.len() != d {
            return Err(RadonError::Dimension(format!("measure in R^{d} but grid has {} axes", spacings.len())));
        }
        if m.is_empty() {
            return Ok(LatticeKernel { lo: vec![0; d], dims: vec![1; d], values: vec![0.0] });
        }
        let cells: Vec<(Vec<i64>, Vec<f64>)> = m
            .points()
            .iter()
            .map(|p| {
                let g: Vec<f64> = p.iter().zip(spacings).map(|(x, h)| x / h).collect();
                let base: Vec<i64> = g.iter().map(|v| v.floor() as i64).collect();
                let frac = g.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
                (base, frac)
            })
            .collect();
        let lo: Vec<i64> = (0..d).map(|a| cells.iter().map(|c| c.0[a]).min().unwrap()).collect();
        let hi: Vec<i64> = (0..d).map(|a| cells.iter().map(|c| c.0[a]).max().unwrap() + 1).collect();
        let dims: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let mut values = vec![0.0; dims.iter().product()];
        for ((base, frac), w) in cells.iter().zip(m.weights()) {
            for c in 0..(1usize << d) {
                let mut wt = *w;
                let mut flat = 0usize;
                for a in 0..d {
                    let up = (c >> (d - 1 - a)) & 1;
                    wt *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
                    flat = flat * dims[a] + (base[a] + up as i64 - lo[a]) as usize;
                }
                values[flat] += wt;
            }
        }
        Ok(LatticeKernel { lo, dims, values }.trimmed())
    }

    /// Kernel with a single entry `value` at offset `at`.
    pub fn point(at: &[i64], value: f64) -> Self {
        LatticeKernel { lo: at.to_vec(), dims: vec![1; at.len()], values: vec![value] }
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Smallest offset per axis.
    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    /// Largest offset per axis.
    pub fn hi(&self) -> Vec<i64> {
        self.lo.iter().zip(&self.dims).map(|(l, d)| l + *d as i64 - 1).collect()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        crate::numerics::pairwise_sum(&self.values)
    }

    /// `K'[o] = K[−o]`.
    pub fn reflected(&self) -> LatticeKernel {
        let lo = self.hi().iter().map(|h| -h).collect();
        let mut values = self.values.clone();
        values.reverse();
        LatticeKernel { lo, dims: self.dims.clone(), values }
    }

    /// Nonzero entries as `(offset, value)`.
    pub fn entries(&self) -> Vec<(Vec<i64>, f64)> {
        let d = self.ndim();
        let mut out = Vec::new();
        for (flat, &v) in self.values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut rem = flat;
            let mut o = vec![0i64; d];
            for a in (0..d).rev() {
                o[a] = self.lo[a] + (rem % self.dims[a]) as i64;
                rem /= self.dims[a];
            }
            out.push((o, v));
        }
        out
    }

    fn trimmed(self) -> Self {
        let d = self.ndim();
        let entries = self.entries();
        if entries.is_empty() {
            return LatticeKernel::point(&vec![0; d], 0.0);
        }
        let lo: Vec<i64> = (0..d).map(|a| entries.iter().map(|e| e.0[a]).min().unwrap()).collect();
        let hi: Vec<i64> = (0..d).map(|a| entries.iter().map(|e| e.0[a]).max().unwrap()).collect();
        let dims: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let mut values = vec![0.0; dims.iter().product()];
        for (o, v) in entries {
            let mut flat = 0usize;
            for a in 0..d {
                flat = flat * dims[a] + (o[a] - lo[a]) as usize;
            }
            values[flat] = v;
        }
        LatticeKernel { lo, dims, values }
    }
}

/// Errors unless the whole output `Rf` fits on the grid, i.e. the support of
/// `f` keeps a margin of at least the kernel reach from every face.
pub fn check_padding(f: &GridField, k: &LatticeKernel) -> Result<(), RadonError> {
    let Some(bounds) = f.support_bounds() else { return Ok(()) };
    let hi = k.hi();
    for (a, &(first, last)) in bounds.iter().enumerate() {
        let n = f.dims()[a] as i64;
        // Rf[i] ≠ 0 needs first ≤ i + o ≤ last for some offset o
        let short_lo = hi[a] - first as i64;
        let short_hi = last as i64 - k.lo()[a] - (n - 1);
        let missing = short_lo.max(short_hi);
        if missing > 0 {
            return Err(RadonError::InsufficientPadding {
                axis: a,
                cells: missing as usize,
                length: missing as f64 * f.spacing(a),
            });
        }
    }
    Ok(())
}

/// `Rf(x) = ∫ f(x + y) dμ(y)` on the grid of `f`, via the cloud-in-cell
/// kernel of `μ`.
pub fn convolve(f: &GridField, m: &DiscreteMeasure, method: ConvolveMethod) -> Result<GridField, RadonError> {
    if m.dim() != f.ndim() {
        return Err(RadonError::Dimension(format!("measure in R^{} but field in R^{}", m.dim(), f.ndim())));
    }
    let k = LatticeKernel::scatter(m, &f.spacings())?;
    check_padding(f, &k)?;
    Ok(correlate(f, &k, method))
}

/// `out[i] = Σ_o K[o] f[i+o]` with `f` zero off the grid.
pub fn correlate(f: &GridField, k: &LatticeKernel, method: ConvolveMethod) -> GridField {
    match method {
        ConvolveMethod::Direct => correlate_direct(f, k),
        ConvolveMethod::Fft => FftCorrelator::new(f, k.dims()).correlate(k),
    }
}

fn correlate_direct(f: &GridField, k: &LatticeKernel) -> GridField {
    let entries = k.entries();
    let d = f.ndim();
    let values: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|flat| {
            let idx = f.unravel(flat);
            let mut at = vec![0i64; d];
            let mut acc = 0.0;
            for (o, v) in &entries {
                for a in 0..d {
                    at[a] = idx[a] as i64 + o[a];
                }
                acc += v * f.at_signed(&at);
            }
            acc
        })
        .collect();
    let mut out = f.zeros_like();
    out.values_mut().copy_from_slice(&values);
    out
}

/// Spectrum of a zero-padded field, reusable against many kernels no larger
/// than the size it was prepared for.
pub struct FftCorrelator {
    dims: Vec<usize>,
    shape: Vec<usize>,
    template: GridField,
    spectrum: Vec<Complex64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftCorrelator {
    pub fn new(f: &GridField, max_kernel_dims: &[usize]) -> Self {
        let dims = f.dims().to_vec();
        let shape: Vec<usize> = dims.iter().zip(max_kernel_dims).map(|(n, k)| smooth_size(n + k - 1)).collect();
        let mut planner = FftPlanner::new();
        let forward: Vec<_> = shape.iter().map(|&l| planner.plan_fft_forward(l)).collect();
        let inverse: Vec<_> = shape.iter().map(|&l| planner.plan_fft_inverse(l)).collect();
        let total: usize = shape.iter().product();
        let mut spectrum = vec![Complex64::new(0.0, 0.0); total];
        let pad_strides = super::grid::strides(&shape);
        for (flat, v) in f.values().iter().enumerate() {
            let idx = f.unravel(flat);
            let p: usize = idx.iter().zip(&pad_strides).map(|(i, s)| i * s).sum();
            spectrum[p] = Complex64::new(*v, 0.0);
        }
        transform(&mut spectrum, &shape, &forward);
        FftCorrelator { dims, shape, template: f.zeros_like(), spectrum, forward, inverse }
    }

    pub fn padded_shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn correlate(&self, k: &LatticeKernel) -> GridField {
        let d = self.dims.len();
        assert!(
            k.dims().iter().zip(&self.dims).zip(&self.shape).all(|((kd, n), l)| n + kd - 1 <= *l),
            "kernel larger than the prepared padding"
        );
        let hi = k.hi();
        let pad_strides = super::grid::strides(&self.shape);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.spectrum.len()];
        // reflected kernel stored at p = hi − o
        for (o, v) in k.entries() {
            let p: usize = (0..d).map(|a| (hi[a] - o[a]) as usize * pad_strides[a]).sum();
            buf[p] = Complex64::new(v, 0.0);
        }
        transform(&mut buf, &self.shape, &self.forward);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        transform(&mut buf, &self.shape, &self.inverse);
        let scale = 1.0 / buf.len() as f64;
        let mut out = self.template.clone();
        let linear_len: Vec<i64> = self.dims.iter().zip(k.dims()).map(|(n, kd)| (n + kd - 1) as i64).collect();
        for flat in 0..out.len() {
            let idx = out.unravel(flat);
            let mut p = 0usize;
            let mut inside = true;
            for a in 0..d {
                let m = idx[a] as i64 + hi[a];
                if m < 0 || m >= linear_len[a] {
                    inside = false;
                    break;
                }
                p += m as usize * pad_strides[a];
            }
            out.values_mut()[flat] = if inside { buf[p].re * scale } else { 0.0 };
        }
        out
    }
}

/// In-place n-dimensional transform, one axis at a time.
fn transform(buf: &mut [Complex64], shape: &[usize], plans: &[Arc<dyn Fft<f64>>]) {
    let d = shape.len();
    plans[d - 1].process(buf);
    let mut lines = Vec::new();
    for a in 0..d - 1 {
        let len = shape[a];
        let inner: usize = shape[a + 1..].iter().product();
        let outer: usize = shape[..a].iter().product();
        lines.resize(len * inner, Complex64::new(0.0, 0.0));
        for o in 0..outer {
            let block = &mut buf[o * len * inner..(o + 1) * len * inner];
            for j in 0..len {
                for i in 0..inner {
                    lines[i * len + j] = block[j * inner + i];
                }
            }
            plans[a].process(&mut lines);
            for j in 0..len {
                for i in 0..inner {
                    block[j * inner + i] = lines[i * len + j];
                }
            }
        }
    }
}

/// Smallest 5-smooth integer `≥ n`.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, BuiltinSurface};
    use crate::radon::discretize_measure;

    fn bump_field(dims: &[usize], r: f64) -> GridField {
        let ext = vec![(-2.0, 2.0); dims.len()];
        GridField::from_fn(dims, &ext, |x| {
            let q: f64 = x.iter().map(|v| v * v).sum::<f64>() / (r * r);
            if q < 1.0 { (1.0 - q).powi(2) * (1.0 + x[0]) } else { 0.0 }
        })
        .unwrap()
    }

    fn rel_l2(a: &GridField, b: &GridField) -> f64 {
        let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.values().iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(61), 64);
        assert_eq!(smooth_size(1751), 1800);
    }

    #[test]
    fn dirac_leaves_field_unchanged() {
        let f = bump_field(&[32, 32], 1.0);
        for method in [ConvolveMethod::Direct, ConvolveMethod::Fft] {
            let g = convolve(&f, &DiscreteMeasure::dirac(2), method).unwrap();
            let err = f.values().iter().zip(g.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-14, "{method:?}: {err}");
        }
    }

    #[test]
    fn fft_matches_direct_on_32_squared() {
        let f = bump_field(&[32, 32], 0.8);
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.5 }).unwrap();
        let m = discretize_measure(&c, f.spacing(0), 2.0).unwrap();
        let a = convolve(&f, &m, ConvolveMethod::Direct).unwrap();
        let b = convolve(&f, &m, ConvolveMethod::Fft).unwrap();
        assert!(rel_l2(&b, &a) < 1e-10, "{}", rel_l2(&b, &a));
    }

    #[test]
    fn fft_matches_direct_in_three_dimensions() {
        let f = bump_field(&[16, 12, 10], 0.9);
        let c = make_builtin_surface(&BuiltinSurface::Sphere { n: 3, radius: 0.5 }).unwrap();
        let m = discretize_measure(&c, 0.25, 2.0).unwrap();
        let a = convolve(&f, &m, ConvolveMethod::Direct).unwrap();
        let b = convolve(&f, &m, ConvolveMethod::Fft).unwrap();
        assert!(rel_l2(&b, &a) < 1e-10);
    }

    #[test]
    fn kernel_matches_pointwise_interpolation() {
        let f = bump_field(&[24, 20], 1.0);
        let m = DiscreteMeasure::new(2, vec![vec![0.13, -0.31], vec![-0.4, 0.05]], vec![0.7, 1.9]).unwrap();
        let g = convolve(&f, &m, ConvolveMethod::Direct).unwrap();
        for flat in [17, 200, 311] {
            let x = f.center(flat);
            let want: f64 = m
                .points()
                .iter()
                .zip(m.weights())
                .map(|(y, w)| w * f.interpolate(&[x[0] + y[0], x[1] + y[1]]))
                .sum();
            assert!((g.values()[flat] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn ball_against_circle_gives_annulus() {
        let (r_ball, r_circ) = (0.3, 0.8);
        let f = GridField::from_fn(&[128, 128], &[(-2.0, 2.0), (-2.0, 2.0)], |x| {
            if x[0].hypot(x[1]) <= r_ball { 1.0 } else { 0.0 }
        })
        .unwrap();
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: r_circ }).unwrap();
        let m = discretize_measure(&c, f.spacing(0), 4.0).unwrap();
        let g = convolve(&f, &m, ConvolveMethod::Fft).unwrap();
        let h = f.spacing(0);
        let slack = 2.0 * h * std::f64::consts::SQRT_2;
        for flat in 0..g.len() {
            let x = g.center(flat);
            let r = x[0].hypot(x[1]);
            if g.values()[flat].abs() > 1e-12 {
                assert!(r >= r_circ - r_ball - slack && r <= r_circ + r_ball + slack, "r = {r}");
            }
            if (r - r_circ).abs() < r_ball - slack {
                assert!(g.values()[flat] > 0.0);
            }
        }
    }

    #[test]
    fn insufficient_padding_names_the_shortfall() {
        let f = GridField::from_fn(&[32, 32], &[(-1.0, 1.0), (-1.0, 1.0)], |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let c = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.8 }).unwrap();
        let m = discretize_measure(&c, f.spacing(0), 2.0).unwrap();
        match convolve(&f, &m, ConvolveMethod::Fft) {
            Err(RadonError::InsufficientPadding { cells, length, .. }) => {
                assert!(cells > 0 && length > 0.0);
            }
            other => panic!("expected padding error, got {other:?}"),
        }
    }

    #[test]
    fn reflection_is_an_involution() {
        let m = DiscreteMeasure::new(2, vec![vec![0.3, -0.7], vec![-0.1, 0.25]], vec![1.0, 2.0]).unwrap();
        let k = LatticeKernel::scatter(&m, &[0.1, 0.1]).unwrap();
        assert_eq!(k.reflected().reflected(), k);
        assert!((k.mass() - 3.0).abs() < 1e-14);
    }
}
