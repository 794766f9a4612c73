//! Shared numerical kernels: quadrature rules, phase evaluation, finite
//! differences, small dense linear algebra and point sequences.

pub mod linalg;
pub mod quadrature;
pub mod sequences;
pub mod trig;

pub use linalg::{fd_jacobian, newton_solve, singular_values_desc, NewtonError};
pub use quadrature::{gauss_legendre, pairwise_sum, AxisRule};
pub use sequences::{halton, sphere_directions};
pub use trig::cis_turns;

/// Relative central-difference step used throughout.
pub const FD_REL_STEP: f64 = 1e-5;

/// Step for second-order stencils and for differentiating quantities that are
/// themselves finite differences.
pub const FD_OUTER_STEP: f64 = 1e-3;

#[inline]
pub fn fd_step_at(x: f64, rel: f64) -> f64 {
    rel * (1.0 + x.abs())
}

/// A Lebesgue exponent in `[1, ∞]`. Serialized as a number or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(&self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinite => 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Exponent::Finite(p) => *p,
            Exponent::Infinite => f64::INFINITY,
        }
    }

    pub fn conjugate(&self) -> Exponent {
        match self {
            Exponent::Finite(p) if *p == 1.0 => Exponent::Infinite,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
            Exponent::Infinite => Exponent::Finite(1.0),
        }
    }

    pub fn check_range(&self, lo: f64, hi: f64) -> Result<(), String> {
        match self {
            Exponent::Finite(p) if !(*p >= lo && *p <= hi) => Err(format!("exponent {p} outside [{lo}, {hi}]")),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinite),
            t => {
                if let Some((a, b)) = t.split_once('/') {
                    let (a, b): (f64, f64) = (
                        a.trim().parse().map_err(|_| format!("bad exponent '{s}'"))?,
                        b.trim().parse().map_err(|_| format!("bad exponent '{s}'"))?,
                    );
                    return Ok(Exponent::Finite(a / b));
                }
                t.parse::<f64>().map(Exponent::Finite).map_err(|_| format!("bad exponent '{s}'"))
            }
        }
    }
}

impl serde::Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> serde::Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(Exponent::Finite(p)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
