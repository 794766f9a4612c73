use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::{ChartTransform, FourierTransform, OscillatoryError, QuadConfig};
use crate::geometry::{plateau_cutoff, ChartKind, GeometryError, ParamAxis, SurfaceChart};

/// Dyadic pieces of the transform of `x_n = |x'|^β` carrying the weight
/// `ψ(2x')`, written as `Σ_j 2^{−(n−1)j} I(2^{−j}ξ', 2^{−βj}ξ_n)` with
/// `I(η) = ∫ e^{−2πi(η'·x' + η_n|x'|^β)} φ(x') dx'` and `φ(x) = ψ(x) − ψ(2x)`.
pub struct BetaDyadic {
    n: usize,
    beta: f64,
    annulus: ChartTransform,
    surface_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BetaDyadicResult {
    pub value: Complex64,
    pub terms: usize,
    /// Bound on the omitted tail `|Σ_{j>J}|`.
    pub truncation_bound: f64,
    /// `J > log₂|ξ|`.
    pub sufficient: bool,
}

impl BetaDyadic {
    pub fn new(n: usize, beta: f64, cfg: QuadConfig) -> Result<Self, OscillatoryError> {
        if n < 2 || !(beta > 2.0) {
            return Err(GeometryError::InvalidParameter(format!("need n >= 2 and beta > 2, got n={n}, beta={beta}")).into());
        }
        let k = n - 1;
        let chart = SurfaceChart::new(
            n,
            vec![ParamAxis::interval(-1.0, 1.0); k],
            Arc::new(move |u, out| {
                out[..k].copy_from_slice(u);
                out[k] = u.iter().map(|x| x * x).sum::<f64>().sqrt().powf(beta);
            }),
            Arc::new(|u| {
                let v: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
                plateau_cutoff(u) - plateau_cutoff(&v)
            }),
            ChartKind::Custom,
            false,
        )?
        .with_label("beta-annulus");
        let annulus = ChartTransform::new(chart, cfg)?;
        // ∫ψ(2u) du = Σ_{j≥1} 2^{−(n−1)j} ∫φ
        let surface_mass = annulus.mass() / (2f64.powi(k as i32) - 1.0);
        Ok(BetaDyadic { n, beta, annulus, surface_mass })
    }

    pub fn for_chart(chart: &SurfaceChart, cfg: QuadConfig) -> Result<Self, OscillatoryError> {
        match chart.kind() {
            ChartKind::BetaSurface { beta } => Self::new(chart.ambient_dim(), *beta, cfg),
            k => Err(OscillatoryError::WrongKind(format!("dyadic splitting needs a beta surface, got {k:?}"))),
        }
    }

    /// `I(η)`.
    pub fn piece(&self, eta: &[f64]) -> Result<Complex64, OscillatoryError> {
        self.annulus.eval(eta)
    }

    /// Term `j ≥ 1` of the series at `ξ`.
    pub fn term(&self, j: usize, xi: &[f64]) -> Result<Complex64, OscillatoryError> {
        let k = self.n - 1;
        let mut eta: Vec<f64> = xi[..k].iter().map(|v| v * 2f64.powi(-(j as i32))).collect();
        eta.push(xi[k] * 2f64.powf(-self.beta * j as f64));
        Ok(self.piece(&eta)? * 2f64.powi(-((k * j) as i32)))
    }

    pub fn sum(&self, xi: &[f64], terms: usize) -> Result<BetaDyadicResult, OscillatoryError> {
        if terms == 0 {
            return Err(OscillatoryError::Config("at least one dyadic term is required".into()));
        }
        if xi.len() != self.n {
            return Err(OscillatoryError::Dimension { got: xi.len(), expected: self.n });
        }
        let mut value = Complex64::new(0.0, 0.0);
        for j in 1..=terms {
            value += self.term(j, xi)?;
        }
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(BetaDyadicResult {
            value,
            terms,
            truncation_bound: 2f64.powi(-(((self.n - 1) * terms) as i32)) * self.surface_mass,
            sufficient: norm == 0.0 || terms as f64 > norm.log2(),
        })
    }

    /// Mass of the full beta-surface measure.
    pub fn surface_mass(&self) -> f64 {
        self.surface_mass
    }

    /// `∫φ`.
    pub fn piece_mass(&self) -> f64 {
        self.annulus.mass()
    }
}

/// Truncated dyadic series for a beta-surface chart.
pub fn mu_hat_beta_dyadic(chart: &SurfaceChart, xi: &[f64], terms: usize, cfg: &QuadConfig) -> Result<BetaDyadicResult, OscillatoryError> {
    BetaDyadic::for_chart(chart, cfg.clone())?.sum(xi, terms)
}

/// The two decay envelopes for `x_n = |x'|^β` without constants:
/// `|ξ'|^{−(n−1)(β−2)/(2(β−1))} |ξ_n|^{−(n−1)/(2(β−1))}` and `|ξ|^{−(n−1)/β}`.
/// The first is `+∞` when `ξ' = 0` or `ξ_n = 0`.
pub fn lemma1_envelope(n: usize, beta: f64, xi: &[f64]) -> Result<(f64, f64), OscillatoryError> {
    if !(beta > 2.0) {
        return Err(GeometryError::InvalidParameter(format!("beta must exceed 2, got {beta}")).into());
    }
    if xi.len() != n || n < 2 {
        return Err(OscillatoryError::Dimension { got: xi.len(), expected: n });
    }
    let m = (n - 1) as f64;
    let prime = xi[..n - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
    let last = xi[n - 1].abs();
    let full = prime.hypot(last);
    if full == 0.0 {
        return Err(OscillatoryError::Config("envelope undefined at xi = 0".into()));
    }
    let b31 = if prime == 0.0 || last == 0.0 {
        f64::INFINITY
    } else {
        prime.powf(-m * (beta - 2.0) / (2.0 * (beta - 1.0))) * last.powf(-m / (2.0 * (beta - 1.0)))
    };
    Ok((b31, full.powf(-m / beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin_surface, BuiltinSurface};

    #[test]
    fn envelope_exponents() {
        let rho: f64 = 1024.0;
        let (_, b32) = lemma1_envelope(2, 4.0, &[0.0, rho]).unwrap();
        assert!((b32 - rho.powf(-0.25)).abs() < 1e-15);
        let (b31, _) = lemma1_envelope(2, 4.0, &[rho, rho]).unwrap();
        assert!((b31.log2() / rho.log2() + 0.5).abs() < 1e-12);
        let (b31, b32) = lemma1_envelope(3, 3.0, &[0.0, 0.0, rho]).unwrap();
        assert!(b31.is_infinite());
        assert!((b32 - rho.powf(-2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn dyadic_series_matches_direct_quadrature() {
        let chart = make_builtin_surface(&BuiltinSurface::BetaSurface { n: 2, beta: 4.0 }).unwrap();
        let cfg = QuadConfig::default().with_tol(1e-10);
        let direct = ChartTransform::new(chart.clone(), cfg.clone()).unwrap();
        for xi in [[0.0, 256.0], [181.0, 181.0], [256.0, 0.0]] {
            let r = mu_hat_beta_dyadic(&chart, &xi, 20, &cfg).unwrap();
            let d = direct.eval(&xi).unwrap();
            assert!(r.sufficient);
            assert!((r.value - d).norm() < 1e-5, "xi={xi:?}: {} vs {d}", r.value);
        }
    }

    #[test]
    fn scale_shift_identity() {
        let b = BetaDyadic::new(2, 4.0, QuadConfig::default().with_tol(1e-11)).unwrap();
        let xi = [13.0, 70.0];
        let scaled = [2.0 * xi[0], 16.0 * xi[1]];
        for j in 1..5 {
            let lhs = b.term(j, &xi).unwrap();
            let rhs = b.term(j + 1, &scaled).unwrap() * 2.0;
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()), "j={j}");
        }
    }

    #[test]
    fn zero_frequency_terms_are_scaled_piece_mass() {
        let b = BetaDyadic::new(3, 3.0, QuadConfig::default()).unwrap();
        for j in 1..6 {
            let t = b.term(j, &[0.0, 0.0, 0.0]).unwrap();
            assert!((t.re - b.piece_mass() * 4f64.powi(-(j as i32))).abs() < 1e-14);
        }
        let chart = make_builtin_surface(&BuiltinSurface::BetaSurface { n: 3, beta: 3.0 }).unwrap();
        let mass = ChartTransform::new(chart, QuadConfig::default()).unwrap().mass();
        let r = b.sum(&[0.0, 0.0, 0.0], 30).unwrap();
        assert!((r.value.re - mass).abs() < 1e-9 + r.truncation_bound);
    }

    #[test]
    fn short_series_flagged() {
        let b = BetaDyadic::new(2, 4.0, QuadConfig::default()).unwrap();
        let r = b.sum(&[0.0, 256.0], 4).unwrap();
        assert!(!r.sufficient);
        assert!(r.truncation_bound > 0.0);
    }
}
