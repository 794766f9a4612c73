use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::GeometryError;
use crate::numerics::{fd_jacobian, fd_step_at, newton_solve, FD_REL_STEP};

/// `(s, x, out) ↦ out = T_s(x)`.
pub type FamilyMap = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `s ↦ (A(s), b(s))` for families of the form `T_s(x) = A(s)x + b(s)`.
pub type AffinePart = Arc<dyn Fn(&[f64]) -> (DMatrix<f64>, DVector<f64>) + Send + Sync>;
/// Analytic `J_{T_s}(x)`.
pub type JacobianFn = Arc<dyn Fn(&[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;

/// Step for the mixed `∂_s∂_x` stencil when neither an affine form nor an
/// analytic Jacobian is available.
pub const FD_MIXED_STEP: f64 = 1e-4;
/// Round-trip tolerance for the invertibility check.
pub const INVERSE_TOL: f64 = 1e-8;

/// A smooth family `s ↦ T_s` of maps of R^n indexed by a box K ⊂ R^m.
#[derive(Clone)]
pub struct TransformFamily {
    ambient_dim: usize,
    param_box: Vec<(f64, f64)>,
    map: FamilyMap,
    affine: Option<AffinePart>,
    jacobian: Option<JacobianFn>,
    fd_step: f64,
    label: String,
}

impl fmt::Debug for TransformFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformFamily")
            .field("label", &self.label)
            .field("ambient_dim", &self.ambient_dim)
            .field("param_box", &self.param_box)
            .field("affine", &self.affine.is_some())
            .finish()
    }
}

impl TransformFamily {
    pub fn new(ambient_dim: usize, param_box: Vec<(f64, f64)>, map: FamilyMap) -> Self {
        TransformFamily {
            ambient_dim,
            param_box,
            map,
            affine: None,
            jacobian: None,
            fd_step: FD_REL_STEP,
            label: "custom".into(),
        }
    }

    /// Family `T_s(x) = A(s)x + b(s)`.
    pub fn affine(ambient_dim: usize, param_box: Vec<(f64, f64)>, part: AffinePart) -> Self {
        let p = part.clone();
        let map: FamilyMap = Arc::new(move |s, x, out| {
            let (a, b) = p(s);
            for i in 0..out.len() {
                let mut acc = b[i];
                for (j, xj) in x.iter().enumerate() {
                    acc += a[(i, j)] * xj;
                }
                out[i] = acc;
            }
        });
        let pj = part.clone();
        let jac: JacobianFn = Arc::new(move |s, _x| pj(s).0);
        TransformFamily { affine: Some(part), jacobian: Some(jac), ..Self::new(ambient_dim, param_box, map) }
    }

    pub fn with_jacobian(mut self, jac: JacobianFn) -> Self {
        self.jacobian = Some(jac);
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
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
        self.param_box.len()
    }

    pub fn param_box(&self) -> &[(f64, f64)] {
        &self.param_box
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn affine_part(&self, s: &[f64]) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.affine.as_ref().map(|p| p(s))
    }

    pub fn is_affine(&self) -> bool {
        self.affine.is_some()
    }

    pub fn map_fn(&self) -> &FamilyMap {
        &self.map
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.len() == self.param_dim() && s.iter().zip(&self.param_box).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn check_param(&self, s: &[f64]) -> Result<(), GeometryError> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(GeometryError::ParamOutOfBox { s: s.to_vec(), param_box: self.param_box.clone() })
        }
    }

    #[inline]
    pub fn eval_into(&self, s: &[f64], x: &[f64], out: &mut [f64]) {
        (self.map)(s, x, out)
    }

    pub fn eval(&self, s: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim];
        (self.map)(s, x, &mut out);
        out
    }

    /// `J_{T_s}(x)`, analytic when available.
    pub fn jacobian_x(&self, s: &[f64], x: &[f64]) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(s, x),
            None => self.fd_jacobian_x(s, x),
        }
    }

    /// `J_{T_s}(x)` by central differences regardless of analytic data.
    pub fn fd_jacobian_x(&self, s: &[f64], x: &[f64]) -> DMatrix<f64> {
        fd_jacobian(|y, out| (self.map)(s, y, out), x, self.ambient_dim, self.fd_step)
    }

    /// `∂T_s/∂s_k (x)`.
    pub fn ds_map(&self, s: &[f64], x: &[f64], k: usize) -> DVector<f64> {
        let n = self.ambient_dim;
        let h = fd_step_at(s[k], self.fd_step);
        let mut sp = s.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        sp[k] = s[k] + h;
        (self.map)(&sp, x, &mut fp);
        sp[k] = s[k] - h;
        (self.map)(&sp, x, &mut fm);
        DVector::from_iterator(n, fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)))
    }

    /// `J_{∂T_s/∂s_k}(x)`, the x-Jacobian of the s_k-derivative.
    pub fn ds_jacobian(&self, s: &[f64], x: &[f64], k: usize) -> DMatrix<f64> {
        let n = self.ambient_dim;
        if let Some(j) = &self.jacobian {
            let h = fd_step_at(s[k], self.fd_step);
            let mut sp = s.to_vec();
            sp[k] = s[k] + h;
            let jp = j(&sp, x);
            sp[k] = s[k] - h;
            let jm = j(&sp, x);
            return (jp - jm) / (2.0 * h);
        }
        let hs = fd_step_at(s[k], FD_MIXED_STEP);
        let mut out = DMatrix::zeros(n, n);
        let mut sp = s.to_vec();
        let mut xp = x.to_vec();
        let mut buf = vec![0.0; n];
        for c in 0..n {
            let hx = fd_step_at(x[c], FD_MIXED_STEP);
            let mut acc = vec![0.0; n];
            for (ds, dx, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                sp[k] = s[k] + ds * hs;
                xp[c] = x[c] + dx * hx;
                (self.map)(&sp, &xp, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += sign * b;
                }
            }
            sp[k] = s[k];
            xp[c] = x[c];
            for r in 0..n {
                out[(r, c)] = acc[r] / (4.0 * hs * hx);
            }
        }
        out
    }

    /// Solves `T_s(x) = y` for x.
    pub fn invert(&self, s: &[f64], y: &[f64]) -> Result<Vec<f64>, GeometryError> {
        if let Some((a, b)) = self.affine_part(s) {
            let rhs = DVector::from_column_slice(y) - b;
            let x = a.lu().solve(&rhs).ok_or(GeometryError::NotInvertible)?;
            return Ok(x.iter().copied().collect());
        }
        newton_solve(|x, out| (self.map)(s, x, out), y, y, 1e-13, 60).map_err(GeometryError::Newton)
    }

    /// Max round-trip error `|T_s^{-1}(T_s(x)) − x|` over the given samples;
    /// errors if any exceeds `INVERSE_TOL`.
    pub fn check_invertible(&self, s_samples: &[Vec<f64>], x_samples: &[Vec<f64>]) -> Result<f64, GeometryError> {
        let mut worst = 0.0f64;
        for s in s_samples {
            for x in x_samples {
                let y = self.eval(s, x);
                let back = self.invert(s, &y)?;
                let err = back.iter().zip(x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                worst = worst.max(err);
            }
        }
        if worst > INVERSE_TOL {
            return Err(GeometryError::RoundTrip(worst));
        }
        Ok(worst)
    }

    /// Max relative deviation between the finite-difference and analytic
    /// Jacobians over the samples (zero when no analytic Jacobian is set).
    pub fn jacobian_consistency(&self, s_samples: &[Vec<f64>], x_samples: &[Vec<f64>]) -> f64 {
        let Some(j) = &self.jacobian else { return 0.0 };
        let mut worst = 0.0f64;
        for s in s_samples {
            for x in x_samples {
                let exact = j(s, x);
                let fd = self.fd_jacobian_x(s, x);
                let scale = exact.amax().max(1e-300);
                worst = worst.max((fd - exact).amax() / scale);
            }
        }
        worst
    }

    /// The family `s ↦ T_s^{-1}`.
    pub fn inverse(&self) -> TransformFamily {
        let label = format!("{}^-1", self.label);
        if let Some(part) = &self.affine {
            let p = part.clone();
            let inv: AffinePart = Arc::new(move |s| {
                let (a, b) = p(s);
                let ai = a.try_inverse().unwrap_or_else(|| DMatrix::from_element(b.len(), b.len(), f64::NAN));
                let bi = -(&ai * b);
                (ai, bi)
            });
            return TransformFamily::affine(self.ambient_dim, self.param_box.clone(), inv)
                .with_fd_step(self.fd_step)
                .with_label(label);
        }
        let fwd = self.map.clone();
        let map: FamilyMap = Arc::new(move |s, y, out| {
            let x = newton_solve(|x, o| fwd(s, x, o), y, y, 1e-13, 60).unwrap_or_else(|_| vec![f64::NAN; y.len()]);
            out.copy_from_slice(&x);
        });
        TransformFamily::new(self.ambient_dim, self.param_box.clone(), map)
            .with_fd_step(self.fd_step)
            .with_label(label)
    }

    /// `T'_σ = T_{φ(σ)}` on a new parameter box, for invariance checks under
    /// smooth reparametrization of s.
    pub fn reparametrized(
        &self,
        phi: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
        new_box: Vec<(f64, f64)>,
    ) -> TransformFamily {
        let label = format!("{}∘reparam", self.label);
        if let Some(part) = &self.affine {
            let p = part.clone();
            let ph = phi.clone();
            return TransformFamily::affine(self.ambient_dim, new_box, Arc::new(move |s| p(&ph(s))))
                .with_fd_step(self.fd_step)
                .with_label(label);
        }
        let m = self.map.clone();
        let ph = phi.clone();
        let mut fam = TransformFamily::new(self.ambient_dim, new_box, Arc::new(move |s, x, out| m(&ph(s), x, out)))
            .with_fd_step(self.fd_step)
            .with_label(label);
        if let Some(j) = &self.jacobian {
            let j = j.clone();
            fam = fam.with_jacobian(Arc::new(move |s, x| j(&phi(s), x)));
        }
        fam
    }
}

pub fn rotation2(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `exp([v]×)` by Rodrigues' formula.
pub fn so3_exp(v: &[f64]) -> DMatrix<f64> {
    let r = nalgebra::Rotation3::new(Vector3::new(v[0], v[1], v[2]));
    let m: Matrix3<f64> = *r.matrix();
    DMatrix::from_iterator(3, 3, m.iter().copied())
}

/// Planar rotations `T_s = R(s)`.
pub fn planar_rotations(lo: f64, hi: f64) -> TransformFamily {
    TransformFamily::affine(2, vec![(lo, hi)], Arc::new(|s| (rotation2(s[0]), DVector::zeros(2)))).with_label("rotation2")
}

/// Rotations of R³ in exponential coordinates, `T_s = exp([s]×)`.
pub fn so3_rotations(half_width: f64) -> TransformFamily {
    let h = half_width;
    TransformFamily::affine(3, vec![(-h, h); 3], Arc::new(|s| (so3_exp(s), DVector::zeros(3)))).with_label("so3")
}

/// Rotations of R³ about a fixed unit axis.
pub fn axis_rotations(axis: [f64; 3], lo: f64, hi: f64) -> TransformFamily {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let a = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
    TransformFamily::affine(
        3,
        vec![(lo, hi)],
        Arc::new(move |s| (so3_exp(&[a[0] * s[0], a[1] * s[0], a[2] * s[0]]), DVector::zeros(3))),
    )
    .with_label("axis_rotation")
}

pub fn identity_family(n: usize, param_box: Vec<(f64, f64)>) -> TransformFamily {
    TransformFamily::affine(n, param_box, Arc::new(move |_| (DMatrix::identity(n, n), DVector::zeros(n)))).with_label("identity")
}

/// `T_s(x) = x + s v`.
pub fn translations(v: Vec<f64>, lo: f64, hi: f64) -> TransformFamily {
    let n = v.len();
    TransformFamily::affine(
        n,
        vec![(lo, hi)],
        Arc::new(move |s| (DMatrix::identity(n, n), DVector::from_iterator(n, v.iter().map(|c| c * s[0])))),
    )
    .with_label("translation")
}

/// `T_s(x) = (x₁ + s x₂, x₂)`.
pub fn shears(lo: f64, hi: f64) -> TransformFamily {
    TransformFamily::affine(2, vec![(lo, hi)], Arc::new(|s| (DMatrix::from_row_slice(2, 2, &[1.0, s[0], 0.0, 1.0]), DVector::zeros(2))))
        .with_label("shear")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so3_exp_is_rotation() {
        let r = so3_exp(&[0.3, -0.2, 0.5]);
        assert!((r.transpose() * &r - DMatrix::identity(3, 3)).amax() < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
        let z = so3_exp(&[0.0, 0.0, 0.7]);
        assert!((z.view((0, 0), (2, 2)) - rotation2(0.7)).amax() < 1e-15);
    }

    #[test]
    fn fd_jacobian_agrees_with_analytic() {
        let fam = planar_rotations(-1.0, 1.0);
        let s = vec![vec![0.2], vec![-0.7]];
        let x = vec![vec![0.5, 1.5], vec![-2.0, 0.1]];
        assert!(fam.jacobian_consistency(&s, &x) < 1e-6);
    }

    #[test]
    fn ds_jacobian_of_rotation_is_derivative_matrix() {
        let fam = planar_rotations(-1.0, 1.0);
        let j = fam.ds_jacobian(&[0.4], &[1.0, 0.0], 0);
        let exact = DMatrix::from_row_slice(2, 2, &[-(0.4f64.sin()), -(0.4f64.cos()), 0.4f64.cos(), -(0.4f64.sin())]);
        assert!((j - exact).amax() < 1e-9);
    }

    #[test]
    fn mixed_stencil_matches_affine_derivative() {
        let aff = shears(-1.0, 1.0);
        let raw = TransformFamily::new(2, vec![(-1.0, 1.0)], aff.map_fn().clone());
        let a = aff.ds_jacobian(&[0.3], &[0.2, 0.9], 0);
        let b = raw.ds_jacobian(&[0.3], &[0.2, 0.9], 0);
        assert!((a - b).amax() < 1e-7);
    }

    #[test]
    fn nonlinear_family_inverts() {
        let fam = TransformFamily::new(
            2,
            vec![(-0.5, 0.5)],
            Arc::new(|s, x, out| {
                out[0] = x[0] + s[0] * x[1] * x[1];
                out[1] = x[1] + 0.1 * (s[0] * x[0]).sin();
            }),
        );
        let err = fam.check_invertible(&[vec![-0.4], vec![0.3]], &[vec![0.2, -0.5], vec![1.0, 0.7]]).unwrap();
        assert!(err < 1e-10);
        let inv = fam.inverse();
        let y = fam.eval(&[0.3], &[0.2, -0.5]);
        let x = inv.eval(&[0.3], &y);
        assert!((x[0] - 0.2).abs() < 1e-10 && (x[1] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn parameter_box_enforced() {
        let fam = planar_rotations(0.0, 1.0);
        assert!(fam.check_param(&[0.5]).is_ok());
        assert!(matches!(fam.check_param(&[1.5]), Err(GeometryError::ParamOutOfBox { .. })));
    }
}
