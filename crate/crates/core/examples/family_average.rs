//! Averaging a parabola arc over a window of planar rotations. Along
//! directions normal to some rotated copy the averaged transform decays
//! like ρ^{-1/2}; along the x₁ axis no copy has that normal and the decay
//! is rapid.

use radonlab::decay::{box_bump, family_decay_sweep, FamilyAverage, ParamQuadrature, Prediction, Regime};
use radonlab::geometry::{make_builtin_surface, planar_rotations, BuiltinSurface};
use radonlab::oscillatory::QuadConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arc = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 })?;
    let family = planar_rotations(-0.6, 0.6);
    let psi = box_bump(family.param_box());
    let rule = ParamQuadrature::tensor(family.param_box(), 32, &[false], Some(&psi));
    let avg = FamilyAverage::new(arc, family, rule, QuadConfig::default())?;
    let pred = Prediction { slope: -0.5, regime: Regime::Smooth, log_power: None };
    for a in [0.0f64, 0.7, 1.5] {
        let r = family_decay_sweep(&avg, &[a.cos(), a.sin()], 32.0, 7, pred)?;
        println!("direction angle {a}: slope {:.4}", r.fitted_slope);
    }
    Ok(())
}
