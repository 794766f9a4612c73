use std::f64::consts::TAU;

use nalgebra::DMatrix;

use super::family::{rotation2, so3_exp};
use super::GeometryError;
use crate::numerics::sequences::box_muller;
use crate::numerics::{gauss_legendre, halton};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationScheme {
    UniformAngles,
    ProductQuadrature,
    LowDiscrepancy,
}

#[derive(Clone, Debug)]
pub struct RotationSample {
    pub matrix: DMatrix<f64>,
    pub weight: f64,
}

/// Quadrature on SO(n) with respect to normalized Haar measure.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RotationSampler {
    n: usize,
    scheme: RotationScheme,
    count: usize,
    seed: u64,
}

impl RotationSampler {
    pub fn new(n: usize, scheme: RotationScheme, count: usize, seed: u64) -> Result<Self, GeometryError> {
        let ok = match scheme {
            RotationScheme::UniformAngles => n == 2,
            RotationScheme::ProductQuadrature => n == 3,
            RotationScheme::LowDiscrepancy => (3..=4).contains(&n),
        };
        if !ok {
            return Err(GeometryError::InvalidParameter(format!("rotation scheme {scheme:?} does not support n = {n}")));
        }
        if count == 0 {
            return Err(GeometryError::InvalidParameter("rotation sample count must be positive".into()));
        }
        Ok(RotationSampler { n, scheme, count, seed })
    }

    /// Default scheme for the dimension.
    pub fn for_dim(n: usize, count: usize, seed: u64) -> Result<Self, GeometryError> {
        let scheme = match n {
            2 => RotationScheme::UniformAngles,
            3 => RotationScheme::ProductQuadrature,
            _ => RotationScheme::LowDiscrepancy,
        };
        Self::new(n, scheme, count, seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scheme(&self) -> RotationScheme {
        self.scheme
    }

    /// For product quadrature `count` is rounded to a cube `c³`.
    pub fn samples(&self) -> Vec<RotationSample> {
        match self.scheme {
            RotationScheme::UniformAngles => {
                let w = 1.0 / self.count as f64;
                (0..self.count)
                    .map(|i| RotationSample { matrix: rotation2(TAU * i as f64 / self.count as f64), weight: w })
                    .collect()
            }
            RotationScheme::ProductQuadrature => self.euler_product(),
            RotationScheme::LowDiscrepancy => self.low_discrepancy(),
        }
    }

    /// ZYZ Euler angles: uniform in α and γ, Gauss–Legendre in cos β (which
    /// absorbs the sin β Haar density).
    fn euler_product(&self) -> Vec<RotationSample> {
        let c = ((self.count as f64).cbrt().round() as usize).max(1);
        let (gx, gw) = gauss_legendre(c);
        let mut out = Vec::with_capacity(c * c * c);
        for a in 0..c {
            let alpha = TAU * a as f64 / c as f64;
            let ra = so3_exp(&[0.0, 0.0, alpha]);
            for (x, w) in gx.iter().zip(&gw) {
                let beta = x.clamp(-1.0, 1.0).acos();
                let rab = &ra * so3_exp(&[0.0, beta, 0.0]);
                for g in 0..c {
                    let gamma = TAU * g as f64 / c as f64;
                    out.push(RotationSample {
                        matrix: &rab * so3_exp(&[0.0, 0.0, gamma]),
                        weight: w / 2.0 / (c * c) as f64,
                    });
                }
            }
        }
        out
    }

    /// Low-discrepancy Gaussian matrices orthonormalized by QR with the sign
    /// convention that makes the map Haar-distributed, then forced to det +1.
    fn low_discrepancy(&self) -> Vec<RotationSample> {
        let n = self.n;
        let dim = n * n + (n * n) % 2;
        let w = 1.0 / self.count as f64;
        halton(dim, self.count, self.seed)
            .into_iter()
            .map(|u| {
                let mut g = Vec::with_capacity(dim);
                for pair in u.chunks(2) {
                    let (a, b) = box_muller(pair[0], pair[1]);
                    g.push(a);
                    g.push(b);
                }
                let m = DMatrix::from_column_slice(n, n, &g[..n * n]);
                let qr = m.qr();
                let mut q = qr.q();
                let r = qr.r();
                for j in 0..n {
                    if r[(j, j)] < 0.0 {
                        q.column_mut(j).neg_mut();
                    }
                }
                if q.determinant() < 0.0 {
                    q.column_mut(0).neg_mut();
                }
                RotationSample { matrix: q, weight: w }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_samples(s: &[RotationSample]) {
        let n = s[0].matrix.nrows();
        let total: f64 = s.iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for r in s {
            let m = &r.matrix;
            assert!((m.transpose() * m - DMatrix::identity(n, n)).amax() < 1e-12);
            assert!((m.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn samplers_produce_rotations() {
        check_samples(&RotationSampler::new(2, RotationScheme::UniformAngles, 37, 0).unwrap().samples());
        check_samples(&RotationSampler::new(3, RotationScheme::ProductQuadrature, 512, 0).unwrap().samples());
        check_samples(&RotationSampler::new(3, RotationScheme::LowDiscrepancy, 300, 5).unwrap().samples());
        check_samples(&RotationSampler::new(4, RotationScheme::LowDiscrepancy, 300, 5).unwrap().samples());
    }

    #[test]
    fn scheme_dimension_mismatch_rejected() {
        assert!(RotationSampler::new(3, RotationScheme::UniformAngles, 10, 0).is_err());
        assert!(RotationSampler::new(2, RotationScheme::ProductQuadrature, 10, 0).is_err());
    }

    #[test]
    fn euler_product_integrates_matrix_entries_to_zero() {
        // Haar mean of every entry of θ vanishes; mean of θ_ij² is 1/n
        let s = RotationSampler::new(3, RotationScheme::ProductQuadrature, 8 * 8 * 8, 0).unwrap().samples();
        for i in 0..3 {
            for j in 0..3 {
                let m1: f64 = s.iter().map(|r| r.weight * r.matrix[(i, j)]).sum();
                let m2: f64 = s.iter().map(|r| r.weight * r.matrix[(i, j)].powi(2)).sum();
                assert!(m1.abs() < 1e-12, "mean ({i},{j}) = {m1}");
                assert!((m2 - 1.0 / 3.0).abs() < 1e-12, "second moment ({i},{j}) = {m2}");
            }
        }
    }
}
