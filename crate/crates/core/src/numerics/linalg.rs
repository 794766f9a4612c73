use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{fd_step_at, FD_REL_STEP};

/// Singular values sorted in descending order.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Central-difference Jacobian of `f: R^k -> R^n` at `x`, as an n×k matrix.
pub fn fd_jacobian<F>(f: F, x: &[f64], out_dim: usize, rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let k = x.len();
    let mut jac = DMatrix::zeros(out_dim, k);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; out_dim];
    let mut fm = vec![0.0; out_dim];
    for j in 0..k {
        let h = fd_step_at(x[j], rel_step);
        xp[j] = x[j] + h;
        f(&xp, &mut fp);
        xp[j] = x[j] - h;
        f(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..out_dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error("Newton inversion did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("singular Jacobian during Newton inversion")]
    Singular,
}

/// Solves `f(x) = target` by Newton's method with finite-difference
/// Jacobians, starting from `x0`.
pub fn newton_solve<F>(f: F, target: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, NewtonError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = target.len();
    let mut x = x0.to_vec();
    let mut fx = vec![0.0; n];
    let scale = 1.0 + target.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        f(&x, &mut fx);
        let r = DVector::from_iterator(n, fx.iter().zip(target).map(|(a, b)| a - b));
        residual = r.amax();
        if residual <= tol * scale {
            return Ok(x);
        }
        let jac = fd_jacobian(&f, &x, n, FD_REL_STEP);
        let step = jac.lu().solve(&r).ok_or(NewtonError::Singular)?;
        for (xi, d) in x.iter_mut().zip(step.iter()) {
            *xi -= d;
        }
        if it + 1 == max_iter {
            f(&x, &mut fx);
            residual = fx.iter().zip(target).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
            if residual <= tol * scale {
                return Ok(x);
            }
        }
    }
    Err(NewtonError::NoConvergence { residual, iterations: max_iter })
}
