//! The curve `x₂ = |x₁|^β` with β = 4: pointwise decay along the flat
//! normal and the change of regime in the spherical L^p average.

use radonlab::decay::{decay_sweep, ray_sweep, DirectionBudget, Prediction, Regime, SurfaceClass, SweepConfig};
use radonlab::geometry::{make_builtin_surface, BuiltinSurface};
use radonlab::numerics::Exponent;
use radonlab::oscillatory::{ChartTransform, QuadConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chart = make_builtin_surface(&BuiltinSurface::BetaSurface { n: 2, beta: 4.0 })?;
    let class = SurfaceClass::of_chart(&chart);
    let t = ChartTransform::new(chart, QuadConfig::default())?;
    let pred = Prediction { slope: -0.25, regime: Regime::Supercritical, log_power: None };
    let r = ray_sweep(&t, &[0.0, 1.0], 64.0, 7, pred)?;
    println!("along the flat normal: slope {:.4} (predicted -0.25)", r.fitted_slope);
    for p in [2.0, 6.0] {
        let cfg = SweepConfig { p: Exponent::Finite(p), directions: DirectionBudget::for_class(class), ..Default::default() };
        let r = decay_sweep(&t, class, &cfg)?;
        println!("p = {p}: slope {:.4} (predicted {:.4}, {:?})", r.fitted_slope, r.predicted_slope, r.regime);
    }
    Ok(())
}
