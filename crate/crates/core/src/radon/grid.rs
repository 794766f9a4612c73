use super::RadonError;

/// A scalar field sampled at cell centers of a uniform box grid, stored
/// row-major (last axis fastest). Outside the sampled lattice the field is
/// taken to be zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dims: Vec<usize>,
    extents: Vec<(f64, f64)>,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(dims: &[usize], extents: &[(f64, f64)]) -> Result<Self, RadonError> {
        check_geometry(dims, extents)?;
        Ok(GridField { dims: dims.to_vec(), extents: extents.to_vec(), values: vec![0.0; dims.iter().product()] })
    }

    pub fn from_values(dims: &[usize], extents: &[(f64, f64)], values: Vec<f64>) -> Result<Self, RadonError> {
        check_geometry(dims, extents)?;
        let len: usize = dims.iter().product();
        if values.len() != len {
            return Err(RadonError::Dimension(format!("{} values for a grid of {len} cells", values.len())));
        }
        let g = GridField { dims: dims.to_vec(), extents: extents.to_vec(), values };
        g.check_finite()?;
        Ok(g)
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(dims: &[usize], extents: &[(f64, f64)], f: impl Fn(&[f64]) -> f64) -> Result<Self, RadonError> {
        let mut g = Self::zeros(dims, extents)?;
        let mut x = vec![0.0; dims.len()];
        for i in 0..g.values.len() {
            g.center_into(i, &mut x);
            g.values[i] = f(&x);
        }
        g.check_finite()?;
        Ok(g)
    }

    /// A zero field on the same grid.
    pub fn zeros_like(&self) -> Self {
        GridField { dims: self.dims.clone(), extents: self.extents.clone(), values: vec![0.0; self.values.len()] }
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.extents[axis];
        (hi - lo) / self.dims[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.ndim()).map(|a| self.spacing(a)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacings().iter().product()
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.dims == other.dims && self.extents == other.extents
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.ndim()];
        for a in (0..self.ndim()).rev() {
            idx[a] = flat % self.dims[a];
            flat /= self.dims[a];
        }
        idx
    }

    pub fn center_into(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for a in (0..self.ndim()).rev() {
            let i = rem % self.dims[a];
            rem /= self.dims[a];
            out[a] = self.extents[a].0 + (i as f64 + 0.5) * self.spacing(a);
        }
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.ndim()];
        self.center_into(flat, &mut x);
        x
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.extents).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Value at lattice index `idx` (signed), zero off the grid.
    pub fn at_signed(&self, idx: &[i64]) -> f64 {
        let mut flat = 0usize;
        for (a, &i) in idx.iter().enumerate() {
            if i < 0 || i as usize >= self.dims[a] {
                return 0.0;
            }
            flat = flat * self.dims[a] + i as usize;
        }
        self.values[flat]
    }

    /// Multilinear interpolation between cell centers.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        corners(&self.dims, &self.extents, x, |flat, w| acc += w * self.values[flat]);
        acc
    }

    /// Transpose of `interpolate`: spreads `value` onto the corners.
    pub fn scatter_add(&mut self, x: &[f64], value: f64) {
        let values = &mut self.values;
        corners(&self.dims, &self.extents, x, |flat, w| values[flat] += w * value);
    }

    /// `∫ f g` by the cell-volume Riemann sum.
    pub fn dot(&self, other: &GridField) -> Result<f64, RadonError> {
        if !self.same_grid(other) {
            return Err(RadonError::Dimension("fields live on different grids".into()));
        }
        let prods: Vec<f64> = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(crate::numerics::pairwise_sum(&prods) * self.cell_volume())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &GridField, b: f64) -> Result<GridField, RadonError> {
        if !self.same_grid(other) {
            return Err(RadonError::Dimension("fields live on different grids".into()));
        }
        let mut out = self.zeros_like();
        for ((o, x), y) in out.values.iter_mut().zip(&self.values).zip(&other.values) {
            *o = a * x + b * y;
        }
        Ok(out)
    }

    /// Shift by whole cells: `out[i] = self[i − shift]`, zero-filled.
    pub fn shifted(&self, shift: &[i64]) -> GridField {
        let mut out = self.zeros_like();
        let mut src = vec![0i64; self.ndim()];
        for flat in 0..self.values.len() {
            let idx = self.unravel(flat);
            for a in 0..self.ndim() {
                src[a] = idx[a] as i64 - shift[a];
            }
            out.values[flat] = self.at_signed(&src);
        }
        out
    }

    /// Per-axis index range `[first, last]` of cells with nonzero value, or
    /// `None` for the zero field.
    pub fn support_bounds(&self) -> Option<Vec<(usize, usize)>> {
        let mut bounds: Option<Vec<(usize, usize)>> = None;
        for (flat, v) in self.values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let idx = self.unravel(flat);
            let b = bounds.get_or_insert_with(|| idx.iter().map(|&i| (i, i)).collect());
            for (r, &i) in b.iter_mut().zip(&idx) {
                r.0 = r.0.min(i);
                r.1 = r.1.max(i);
            }
        }
        bounds
    }

    pub fn check_finite(&self) -> Result<(), RadonError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(RadonError::NonFinite { index: i }),
            None => Ok(()),
        }
    }
}

/// Calls `visit(flat, weight)` for every in-grid corner of the lattice cell
/// containing `x`.
fn corners(dims: &[usize], extents: &[(f64, f64)], x: &[f64], mut visit: impl FnMut(usize, f64)) {
    let d = dims.len();
    assert!(d <= 8, "interpolation supports up to 8 axes");
    let mut base = [0i64; 8];
    let mut frac = [0.0f64; 8];
    for a in 0..d {
        let (lo, hi) = extents[a];
        let g = (x[a] - lo) / ((hi - lo) / dims[a] as f64) - 0.5;
        let f = g.floor();
        base[a] = f as i64;
        frac[a] = g - f;
    }
    'corner: for c in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0usize;
        for a in 0..d {
            let up = (c >> (d - 1 - a)) & 1;
            let i = base[a] + up as i64;
            if i < 0 || i as usize >= dims[a] {
                continue 'corner;
            }
            w *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
            flat = flat * dims[a] + i as usize;
        }
        if w != 0.0 {
            visit(flat, w);
        }
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for a in (0..dims.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * dims[a + 1];
    }
    s
}

fn check_geometry(dims: &[usize], extents: &[(f64, f64)]) -> Result<(), RadonError> {
    if dims.is_empty() || dims.len() != extents.len() {
        return Err(RadonError::Dimension(format!("{} axes but {} extents", dims.len(), extents.len())));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(RadonError::Dimension("every axis needs at least one cell".into()));
    }
    if extents.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
        return Err(RadonError::Dimension(format!("invalid extents {extents:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_volume_is_product_of_spacings() {
        let g = GridField::zeros(&[4, 8, 5], &[(0.0, 1.0), (-1.0, 1.0), (0.0, 2.5)]).unwrap();
        assert_eq!(g.spacings(), vec![0.25, 0.25, 0.5]);
        assert!((g.cell_volume() - 0.25 * 0.25 * 0.5).abs() < 1e-16);
    }

    #[test]
    fn centers_and_indexing_roundtrip() {
        let g = GridField::zeros(&[3, 4], &[(0.0, 3.0), (0.0, 2.0)]).unwrap();
        assert_eq!(g.center(0), vec![0.5, 0.25]);
        assert_eq!(g.center(5), vec![1.5, 0.75]);
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.unravel(flat)), flat);
        }
    }

    #[test]
    fn interpolation_reproduces_affine_functions_inside() {
        let g = GridField::from_fn(&[9, 7], &[(-1.0, 1.0), (0.0, 1.0)], |x| 2.0 * x[0] - 3.0 * x[1] + 0.5).unwrap();
        for x in [[0.1, 0.4], [-0.7, 0.2], [0.33, 0.77]] {
            assert!((g.interpolate(&x) - (2.0 * x[0] - 3.0 * x[1] + 0.5)).abs() < 1e-13);
        }
        assert_eq!(g.interpolate(&[5.0, 0.5]), 0.0);
    }

    #[test]
    fn scatter_is_transpose_of_interpolate() {
        let f = GridField::from_fn(&[6, 5], &[(0.0, 1.0), (0.0, 1.0)], |x| (3.0 * x[0]).sin() + x[1] * x[1]).unwrap();
        let pts = [[0.13, 0.52], [0.95, 0.05], [0.5, 0.5], [-0.02, 0.4]];
        let vals = [0.7, -1.3, 2.0, 0.4];
        let lhs: f64 = pts.iter().zip(&vals).map(|(p, v)| f.interpolate(p) * v).sum();
        let mut g = f.zeros_like();
        for (p, v) in pts.iter().zip(&vals) {
            g.scatter_add(p, *v);
        }
        let rhs: f64 = f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn shift_and_support() {
        let mut f = GridField::zeros(&[5, 5], &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let i = f.flat_index(&[1, 2]);
        f.values_mut()[i] = 1.0;
        let s = f.shifted(&[2, -1]);
        assert_eq!(s.support_bounds(), Some(vec![(3, 3), (1, 1)]));
        assert_eq!(f.zeros_like().support_bounds(), None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GridField::zeros(&[0, 3], &[(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(GridField::from_values(&[2], &[(0.0, 1.0)], vec![1.0, f64::NAN]).is_err());
        assert!(GridField::zeros(&[2], &[(1.0, 1.0)]).is_err());
    }
}
