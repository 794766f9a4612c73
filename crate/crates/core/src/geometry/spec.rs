use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::builtin::{make_builtin_surface, vertices_from_flat, BuiltinSurface};
use super::family::{axis_rotations, identity_family, planar_rotations, shears, so3_rotations, translations, TransformFamily};
use super::{GeometryError, SurfaceChart};

/// Surface table in a config file.
///
/// ```toml
/// [surface]
/// name = "polygon"
/// vertices = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convex: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_weights: Option<Vec<f64>>,
}

impl SurfaceSpec {
    pub fn to_builtin(&self) -> Result<BuiltinSurface, GeometryError> {
        let n = |d: usize| self.n.unwrap_or(d);
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| GeometryError::Parse(format!("surface '{}' needs '{key}'", self.name)));
        let allowed: &[&str] = match self.name.as_str() {
            "circle" => &["radius"],
            "square" => &["side"],
            "polygon" => &["vertices", "convex", "edge_weights"],
            "parabola" | "parabola_graph" | "sphere" => &["n", "radius"],
            "beta" | "beta_surface" => &["n", "beta"],
            "moment" | "moment_curve_segment" => &["n"],
            "segment" => &["n", "half_length"],
            other => return Err(GeometryError::Parse(format!("unknown surface '{other}'"))),
        };
        for (key, present) in [
            ("n", self.n.is_some()),
            ("radius", self.radius.is_some()),
            ("side", self.side.is_some()),
            ("beta", self.beta.is_some()),
            ("half_length", self.half_length.is_some()),
            ("vertices", self.vertices.is_some()),
            ("convex", self.convex.is_some()),
            ("edge_weights", self.edge_weights.is_some()),
        ] {
            if present && !allowed.contains(&key) {
                return Err(GeometryError::Parse(format!("surface '{}' does not take '{key}'", self.name)));
            }
        }
        Ok(match self.name.as_str() {
            "circle" => BuiltinSurface::Circle { radius: self.radius.unwrap_or(1.0) },
            "square" => BuiltinSurface::Square { side: self.side.unwrap_or(1.0) },
            "polygon" => BuiltinSurface::Polygon {
                vertices: vertices_from_flat(self.vertices.as_deref().unwrap_or(&[]))?,
                convex: self.convex.unwrap_or(true),
                edge_weights: self.edge_weights.clone(),
            },
            "parabola" | "parabola_graph" => BuiltinSurface::ParabolaGraph { n: n(2), radius: self.radius.unwrap_or(0.5) },
            "sphere" => BuiltinSurface::Sphere { n: n(3), radius: self.radius.unwrap_or(0.5) },
            "beta" | "beta_surface" => BuiltinSurface::BetaSurface { n: n(2), beta: need(self.beta, "beta")? },
            "moment" | "moment_curve_segment" => BuiltinSurface::MomentCurveSegment { n: n(3) },
            _ => BuiltinSurface::Segment { n: n(2), half_length: self.half_length.unwrap_or(0.5) },
        })
    }
}

/// A surface given either as a short string (`"beta:n=2,beta=4"`) or as a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceConfig {
    Short(String),
    Table(SurfaceSpec),
}

impl SurfaceConfig {
    pub fn to_builtin(&self) -> Result<BuiltinSurface, GeometryError> {
        match self {
            SurfaceConfig::Short(s) => s.parse(),
            SurfaceConfig::Table(t) => t.to_builtin(),
        }
    }

    pub fn build(&self) -> Result<SurfaceChart, GeometryError> {
        make_builtin_surface(&self.to_builtin()?)
    }
}

/// Transformation family in a config file.
///
/// ```toml
/// [family]
/// name = "so3"
/// half_width = 0.5
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

impl FamilySpec {
    pub fn build(&self) -> Result<TransformFamily, GeometryError> {
        let lo = self.lo.unwrap_or(-std::f64::consts::PI);
        let hi = self.hi.unwrap_or(std::f64::consts::PI);
        if !(hi > lo) {
            return Err(GeometryError::InvalidParameter(format!("family box [{lo}, {hi}] is empty")));
        }
        match self.name.as_str() {
            "rotation2" => Ok(planar_rotations(lo, hi)),
            "so3" | "rotation3" => Ok(so3_rotations(self.half_width.unwrap_or(0.5))),
            "axis_rotation" => Ok(axis_rotations(self.axis.unwrap_or([0.0, 1.0, 0.0]), lo, hi)),
            "identity" => Ok(identity_family(self.n.unwrap_or(2), vec![(lo, hi)])),
            "translation" => {
                let v = self.vector.clone().unwrap_or_else(|| vec![1.0, 0.0]);
                Ok(translations(v, lo, hi))
            }
            "shear" => Ok(shears(lo, hi)),
            other => Err(GeometryError::Parse(format!("unknown family '{other}'"))),
        }
    }
}

/// `name` or `name:key=value,…`; vectors are semicolon separated.
impl FromStr for FamilySpec {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = FamilySpec { name: name.trim().to_string(), ..Default::default() };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| GeometryError::Parse(format!("'{v}' is not a number")));
        let list = |v: &str| -> Result<Vec<f64>, GeometryError> { v.split(';').map(num).collect() };
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| GeometryError::Parse(format!("expected key=value in '{part}'")))?;
            match k.trim() {
                "n" => spec.n = Some(v.trim().parse().map_err(|_| GeometryError::Parse(format!("'{v}' is not an integer")))?),
                "lo" => spec.lo = Some(num(v)?),
                "hi" => spec.hi = Some(num(v)?),
                "half_width" => spec.half_width = Some(num(v)?),
                "axis" => {
                    let a = list(v)?;
                    if a.len() != 3 {
                        return Err(GeometryError::Parse("axis needs three components".into()));
                    }
                    spec.axis = Some([a[0], a[1], a[2]]);
                }
                "vector" => spec.vector = Some(list(v)?),
                other => return Err(GeometryError::Parse(format!("unknown family parameter '{other}'"))),
            }
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Doc {
        surface: SurfaceConfig,
        family: Option<FamilySpec>,
    }

    #[test]
    fn table_and_short_forms_agree() {
        let doc: Doc = toml::from_str(
            r#"
            surface = { name = "polygon", vertices = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0] }
            family = { name = "rotation2", lo = 0.0, hi = 1.0 }
            "#,
        )
        .unwrap();
        let short: BuiltinSurface = "polygon:vertices=0;0;1;0;1;1;0;1".parse().unwrap();
        assert_eq!(doc.surface.to_builtin().unwrap(), short);
        let fam = doc.family.unwrap().build().unwrap();
        assert_eq!(fam.param_box(), &[(0.0, 1.0)]);

        let doc: Doc = toml::from_str(r#"surface = "beta:n=2,beta=4""#).unwrap();
        assert_eq!(doc.surface.to_builtin().unwrap(), BuiltinSurface::BetaSurface { n: 2, beta: 4.0 });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Doc>(r#"surface = { name = "circle", colour = 3 }"#).is_err());
        let t = SurfaceSpec { name: "circle".into(), beta: Some(3.0), ..Default::default() };
        assert!(t.to_builtin().is_err());
        assert!("so3:spin=2".parse::<FamilySpec>().is_err());
    }

    #[test]
    fn family_strings() {
        let f: FamilySpec = "axis_rotation:axis=0;1;0,lo=-1,hi=1".parse().unwrap();
        let fam = f.build().unwrap();
        assert_eq!(fam.ambient_dim(), 3);
        assert!("warp".parse::<FamilySpec>().unwrap().build().is_err());
    }
}
