use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use super::{FourierTransform, OscillatoryError, QuadConfig};
use crate::geometry::SurfaceChart;
use crate::numerics::{cis_turns, AxisRule};

/// Points are dropped from the cache wholesale once it holds this many.
const CACHE_POINT_CAP: usize = 8_000_000;

/// Quadrature pushforward of the chart measure: points `Φ(u_j)` and weights
/// `w_j χ(u_j)` (zero-weight nodes dropped), stored per coordinate.
#[derive(Debug)]
pub struct QuadCloud {
    pub dim: usize,
    pub coords: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadCloud {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ w_j e^{−2πi ξ·x_j}`.
    pub fn transform(&self, xi: &[f64]) -> Complex64 {
        let mut re = [0.0f64; 4];
        let mut im = [0.0f64; 4];
        let w = &self.weights;
        let m = w.len();
        let head = m - m % 4;
        macro_rules! sweep {
            ($phase:expr) => {{
                let mut j = 0;
                while j < head {
                    for l in 0..4 {
                        let (c, s) = cis_turns($phase(j + l));
                        re[l] += w[j + l] * c;
                        im[l] -= w[j + l] * s;
                    }
                    j += 4;
                }
                for j in head..m {
                    let (c, s) = cis_turns($phase(j));
                    re[0] += w[j] * c;
                    im[0] -= w[j] * s;
                }
            }};
        }
        match self.dim {
            2 => {
                let (x, y) = (&self.coords[0], &self.coords[1]);
                let (a, b) = (xi[0], xi[1]);
                sweep!(|j: usize| a * x[j] + b * y[j]);
            }
            3 => {
                let (x, y, z) = (&self.coords[0], &self.coords[1], &self.coords[2]);
                let (a, b, c) = (xi[0], xi[1], xi[2]);
                sweep!(|j: usize| a * x[j] + b * y[j] + c * z[j]);
            }
            _ => {
                let coords = &self.coords;
                sweep!(|j: usize| coords.iter().zip(xi).map(|(c, x)| c[j] * x).sum::<f64>());
            }
        }
        Complex64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
    }

    pub fn mass(&self) -> f64 {
        crate::numerics::pairwise_sum(&self.weights)
    }
}

/// Oscillation-resolving quadrature for a general chart.
///
/// Per axis the panel count follows a frequency bound
/// `f_i(ξ) = max |ξ·∂_iΦ(u)|` over probe points, rounded up to a half-octave
/// bucket so that quadrature clouds can be shared between nearby frequencies.
pub struct ChartTransform {
    chart: SurfaceChart,
    cfg: QuadConfig,
    /// `probe_derivs[i]` holds ∂_iΦ at every probe point, flattened.
    probe_derivs: Vec<Vec<f64>>,
    cache: Mutex<HashMap<Vec<i32>, Arc<QuadCloud>>>,
    cached_points: Mutex<usize>,
    mass: f64,
}

impl ChartTransform {
    pub fn new(chart: SurfaceChart, cfg: QuadConfig) -> Result<Self, OscillatoryError> {
        cfg.validate()?;
        let k = chart.param_dim();
        let per_axis = match k {
            1 => 257,
            2 => 33,
            _ => 11,
        };
        let mut probe_derivs = vec![Vec::new(); k];
        // derivatives only matter where the weight is alive
        for u in chart.probe_points(per_axis).into_iter().filter(|u| chart.weight(u) != 0.0) {
            let j = chart.jacobian(&u);
            for (i, d) in probe_derivs.iter_mut().enumerate() {
                d.extend(j.column(i).iter());
            }
        }
        let mut t = ChartTransform {
            chart,
            cfg,
            probe_derivs,
            cache: Mutex::new(HashMap::new()),
            cached_points: Mutex::new(0),
            mass: 0.0,
        };
        let m = t.eval(&vec![0.0; t.chart.ambient_dim()])?;
        t.mass = m.re;
        Ok(t)
    }

    pub fn chart(&self) -> &SurfaceChart {
        &self.chart
    }

    pub fn config(&self) -> &QuadConfig {
        &self.cfg
    }

    /// Bucket per axis for frequency `ξ`.
    fn base_buckets(&self, xi: &[f64]) -> Vec<i32> {
        let n = self.chart.ambient_dim();
        self.chart
            .axes()
            .iter()
            .zip(&self.probe_derivs)
            .map(|(axis, derivs)| {
                let f = derivs
                    .chunks_exact(n)
                    .map(|d| d.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>().abs())
                    .fold(0.0f64, f64::max);
                let periods = f * axis.width() * self.cfg.safety;
                let panels = periods * self.cfg.nodes_per_period as f64 / self.cfg.order as f64;
                let ratio = panels / self.cfg.min_panels as f64;
                if ratio <= 1.0 {
                    0
                } else {
                    (2.0 * ratio.log2()).ceil() as i32
                }
            })
            .collect()
    }

    fn panels_for(&self, bucket: i32) -> usize {
        ((self.cfg.min_panels as f64 * 2f64.powf(bucket as f64 / 2.0)).ceil() as usize).max(1)
    }

    /// Quadrature cloud for a bucket vector, built on first use.
    pub fn cloud(&self, buckets: &[i32]) -> Arc<QuadCloud> {
        if let Some(c) = self.cache.lock().unwrap().get(buckets) {
            return c.clone();
        }
        let cloud = Arc::new(self.build_cloud(buckets));
        let mut cache = self.cache.lock().unwrap();
        let mut count = self.cached_points.lock().unwrap();
        if *count + cloud.len() > CACHE_POINT_CAP {
            cache.clear();
            *count = 0;
        }
        *count += cloud.len();
        cache.insert(buckets.to_vec(), cloud.clone());
        cloud
    }

    fn build_cloud(&self, buckets: &[i32]) -> QuadCloud {
        let n = self.chart.ambient_dim();
        let rules: Vec<AxisRule> = self
            .chart
            .axes()
            .iter()
            .zip(buckets)
            .map(|(axis, &b)| {
                let panels = self.panels_for(b);
                if axis.periodic && axis.breaks.is_empty() {
                    AxisRule::periodic_trapezoid(axis.lo, axis.hi, panels * self.cfg.order)
                } else {
                    AxisRule::gauss_panels(&axis.cuts(), panels, self.cfg.order)
                }
            })
            .collect();
        let k = rules.len();
        let total: usize = rules.iter().map(|r| r.len()).product();
        let mut coords = vec![Vec::with_capacity(total); n];
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; k];
        let mut u = vec![0.0; k];
        let mut x = vec![0.0; n];
        'outer: loop {
            let mut w = 1.0;
            for d in 0..k {
                u[d] = rules[d].nodes[idx[d]];
                w *= rules[d].weights[idx[d]];
            }
            let chi = self.chart.weight(&u);
            if chi != 0.0 {
                self.chart.eval_into(&u, &mut x);
                for (c, v) in coords.iter_mut().zip(&x) {
                    c.push(*v);
                }
                weights.push(w * chi);
            }
            for d in (0..k).rev() {
                idx[d] += 1;
                if idx[d] < rules[d].len() {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        QuadCloud { dim: n, coords, weights }
    }

    /// Evaluates with the rule at `base + extra` buckets on every axis.
    pub fn eval_at_level(&self, xi: &[f64], extra: i32) -> Complex64 {
        let b: Vec<i32> = self.base_buckets(xi).iter().map(|v| v + extra).collect();
        self.cloud(&b).transform(xi)
    }
}

impl FourierTransform for ChartTransform {
    fn ambient_dim(&self) -> usize {
        self.chart.ambient_dim()
    }

    fn mass(&self) -> f64 {
        self.mass
    }

    fn eval(&self, xi: &[f64]) -> Result<Complex64, OscillatoryError> {
        self.cfg.check_xi(xi, self.ambient_dim())?;
        let base = self.base_buckets(xi);
        let at = |extra: i32| {
            let b: Vec<i32> = base.iter().map(|v| v + extra).collect();
            self.cloud(&b).transform(xi)
        };
        let floor = self.cfg.abs_floor * self.mass.abs();
        // the coarser level only serves as the comparison partner; the value
        // returned always comes from a rule at or above the base resolution
        let mut prev = at(-2);
        for r in 0..=self.cfg.max_refinements {
            let cur = at(2 * r as i32);
            if (cur - prev).norm() <= (self.cfg.tol * cur.norm()).max(floor) {
                return Ok(cur);
            }
            if r == self.cfg.max_refinements {
                return Err(OscillatoryError::NonConvergence { xi: xi.to_vec(), last: cur, previous: prev });
            }
            prev = cur;
        }
        unreachable!("max_refinements validated positive")
    }
}
