use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{FourierTransform, OscillatoryError};
use crate::numerics::sphere_directions;

/// Unit directions with quadrature weights summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSet {
    pub directions: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DirectionSet {
    /// Equal-weight well-spread directions on S^{n−1}.
    pub fn sphere(n: usize, count: usize, seed: u64) -> Self {
        let directions = sphere_directions(n, count, seed);
        let w = 1.0 / directions.len() as f64;
        DirectionSet { weights: vec![w; directions.len()], directions }
    }

    /// A single fixed direction (normalized).
    pub fn ray(direction: &[f64]) -> Self {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        DirectionSet { directions: vec![direction.iter().map(|v| v / norm).collect()], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Dyadic radii `ρ_j = ρ_min 2^j` with a direction set per radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyGrid {
    pub rho_levels: Vec<f64>,
    pub directions: Vec<DirectionSet>,
}

impl FrequencyGrid {
    pub fn dyadic_levels(rho_min: f64, levels: usize) -> Vec<f64> {
        (0..levels).map(|j| rho_min * 2f64.powi(j as i32)).collect()
    }

    /// Spherical grid whose direction count at radius ρ is `count(ρ)`.
    pub fn spherical(n: usize, rho_min: f64, levels: usize, count: impl Fn(f64) -> usize, seed: u64) -> Self {
        let rho_levels = Self::dyadic_levels(rho_min, levels);
        let directions = rho_levels.iter().map(|&r| DirectionSet::sphere(n, count(r).max(1), seed)).collect();
        FrequencyGrid { rho_levels, directions }
    }

    /// Fixed-direction ray.
    pub fn ray(direction: &[f64], rho_min: f64, levels: usize) -> Self {
        let rho_levels = Self::dyadic_levels(rho_min, levels);
        let directions = vec![DirectionSet::ray(direction); levels];
        FrequencyGrid { rho_levels, directions }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSample {
    pub rho: f64,
    pub omega_index: usize,
    pub value: Complex64,
}

/// Evaluates `μ̂(ρω)` at every grid point; output order is level-major and
/// independent of the thread count.
pub fn evaluate_grid(t: &dyn FourierTransform, grid: &FrequencyGrid) -> Result<Vec<GridSample>, OscillatoryError> {
    let cells: Vec<(f64, usize, &Vec<f64>)> = grid
        .rho_levels
        .iter()
        .zip(&grid.directions)
        .flat_map(|(&rho, set)| set.directions.iter().enumerate().map(move |(i, w)| (rho, i, w)))
        .collect();
    cells
        .par_iter()
        .map(|&(rho, i, w)| {
            let xi: Vec<f64> = w.iter().map(|c| c * rho).collect();
            t.eval(&xi).map(|value| GridSample { rho, omega_index: i, value })
        })
        .collect()
}

/// CSV with columns `rho,omega_index,re,im,abs` at 17 significant digits.
pub fn write_grid_csv<W: Write>(mut out: W, samples: &[GridSample]) -> std::io::Result<()> {
    writeln!(out, "rho,omega_index,re,im,abs")?;
    for s in samples {
        writeln!(out, "{:.16e},{},{:.16e},{:.16e},{:.16e}", s.rho, s.omega_index, s.value.re, s.value.im, s.value.norm())?;
    }
    Ok(())
}
