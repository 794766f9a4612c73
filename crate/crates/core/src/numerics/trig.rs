//! Branch-free `e^{2πit}` for phases measured in turns.
//!
//! The oscillatory sums spend nearly all their time here. Reducing the phase
//! in turns (not radians) keeps the reduction exact for the integer part, and
//! the polynomial kernel vectorizes on baseline SSE2 where `f64::sin_cos`
//! is a scalar library call.

const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52

/// Returns `(cos 2πt, sin 2πt)`. Absolute error below 1e-13 for |t| < 2^40.
#[inline(always)]
pub fn cis_turns(t: f64) -> (f64, f64) {
    let r = t - ((t + ROUND_MAGIC) - ROUND_MAGIC);
    let q = (r * 4.0 + ROUND_MAGIC) - ROUND_MAGIC;
    let y = (r - 0.25 * q) * std::f64::consts::TAU;
    let y2 = y * y;
    let s = y
        * (1.0
            + y2 * (-1.0 / 6.0
                + y2 * (1.0 / 120.0
                    + y2 * (-1.0 / 5040.0
                        + y2 * (1.0 / 362_880.0
                            + y2 * (-1.0 / 39_916_800.0
                                + y2 * (1.0 / 6_227_020_800.0
                                    + y2 * (-1.0 / 1_307_674_368_000.0))))))));
    let c = 1.0
        + y2 * (-0.5
            + y2 * (1.0 / 24.0
                + y2 * (-1.0 / 720.0
                    + y2 * (1.0 / 40_320.0
                        + y2 * (-1.0 / 3_628_800.0
                            + y2 * (1.0 / 479_001_600.0 + y2 * (-1.0 / 87_178_291_200.0)))))));
    // quadrant in 0..4
    let a = q + if q < 0.0 { 4.0 } else { 0.0 };
    let a = a - if a >= 4.0 { 4.0 } else { 0.0 };
    let odd = a == 1.0 || a == 3.0;
    let cb = if odd { s } else { c };
    let sb = if odd { c } else { s };
    let sc = if a == 1.0 || a == 2.0 { -1.0 } else { 1.0 };
    let ss = if a >= 2.0 { -1.0 } else { 1.0 };
    (sc * cb, ss * sb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_libm_over_wide_range() {
        let mut worst: f64 = 0.0;
        for i in 0..200_000 {
            let t = -3000.0 + i as f64 * 0.030_000_7;
            let (c, s) = cis_turns(t);
            let (s0, c0) = (std::f64::consts::TAU * t).sin_cos();
            worst = worst.max((c - c0).abs()).max((s - s0).abs());
        }
        // libm's own argument reduction of 2πt loses ~|2πt|·ulp here
        assert!(worst < 5e-12, "worst {worst:e}");
    }

    #[test]
    fn quadrant_points_are_exact() {
        for (t, c, s) in [(0.0, 1.0, 0.0), (0.25, 0.0, 1.0), (0.5, -1.0, 0.0), (-0.25, 0.0, -1.0), (3.0, 1.0, 0.0)] {
            let (cc, ss) = cis_turns(t);
            assert!((cc - c).abs() < 1e-15 && (ss - s).abs() < 1e-15, "t={t}");
        }
    }
}
