//! Boundary of the unit square: the exact per-edge transform along an
//! edge normal, where it does not decay, and the spherical L² average.

use radonlab::decay::{decay_sweep, ray_sweep, DirectionBudget, Prediction, Regime, SurfaceClass, SweepConfig};
use radonlab::geometry::{make_builtin_surface, BuiltinSurface};
use radonlab::oscillatory::{PolygonTransform, QuadConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let square = make_builtin_surface(&BuiltinSurface::Square { side: 1.0 })?;
    let t = PolygonTransform::new(&square, QuadConfig::default())?;
    let flat = Prediction { slope: 0.0, regime: Regime::Smooth, log_power: None };
    let r = ray_sweep(&t, &[0.0, 1.0], 32.0, 7, flat)?;
    println!("edge normal: slope {:.4}", r.fitted_slope);
    let cfg = SweepConfig { directions: DirectionBudget::for_chart(&square), ..Default::default() };
    let r = decay_sweep(&t, SurfaceClass::of_chart(&square), &cfg)?;
    println!("L² average: slope {:.4} over {:?} directions", r.fitted_slope, r.direction_counts);
    Ok(())
}
