use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` points of the `dim`-dimensional Halton sequence in [0,1)^dim,
/// shifted modulo 1 by a seeded random offset (Cranley–Patterson rotation).
/// Seed 0 gives the unshifted sequence.
pub fn halton(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
    let shift: Vec<f64> = if seed == 0 {
        vec![0.0; dim]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..dim).map(|_| rng.random::<f64>()).collect()
    };
    (1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let v = radical_inverse(i, PRIMES[d]) + shift[d];
                    v - v.floor()
                })
                .collect()
        })
        .collect()
}

/// Box–Muller map from two uniforms in (0,1) to a standard normal pair.
pub(crate) fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let u1 = u1.clamp(1e-300, 1.0 - 1e-16);
    let r = (-2.0 * u1.ln()).sqrt();
    (r * (TAU * u2).cos(), r * (TAU * u2).sin())
}

/// Deterministic, well-spread unit vectors on S^{n-1} with equal weights.
///
/// n = 2: equally spaced angles; n = 3: spherical Fibonacci lattice;
/// n ≥ 4: Halton points pushed through Box–Muller and normalized.
pub fn sphere_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(n >= 2 && count > 0);
    match n {
        2 => (0..count)
            .map(|i| {
                let a = TAU * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * i as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let pts = halton(2 * n.div_ceil(2), count, seed);
            pts.into_iter()
                .map(|u| {
                    let mut v = Vec::with_capacity(n);
                    for pair in u.chunks(2) {
                        let (a, b) = box_muller(pair[0], pair[1]);
                        v.push(a);
                        v.push(b);
                    }
                    v.truncate(n);
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter().map(|x| x / norm).collect()
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_first_points() {
        let p = halton(2, 3, 0);
        assert_eq!(p[0], vec![0.5, 1.0 / 3.0]);
        assert_eq!(p[1], vec![0.25, 2.0 / 3.0]);
        assert!((p[2][1] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_directions_are_unit_and_balanced() {
        for n in 2..=5 {
            let d = sphere_directions(n, 512, 7);
            let mut mean = vec![0.0; n];
            for v in &d {
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x / d.len() as f64;
                }
            }
            assert!(mean.iter().all(|m| m.abs() < 0.05), "n={n} mean={mean:?}");
        }
    }
}
