//! Spherical L^p averages of the circle's Fourier transform over dyadic
//! shells, with the fitted log-log slope.

use radonlab::decay::{decay_sweep, DirectionBudget, SurfaceClass, SweepConfig};
use radonlab::geometry::{make_builtin_surface, BuiltinSurface};
use radonlab::numerics::Exponent;
use radonlab::oscillatory::{ChartTransform, QuadConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circle = make_builtin_surface(&BuiltinSurface::Circle { radius: 1.0 })?;
    let t = ChartTransform::new(circle.clone(), QuadConfig::default())?;
    for p in [2.0, 4.0] {
        let cfg = SweepConfig { p: Exponent::Finite(p), rho_min: 32.0, levels: 7, directions: DirectionBudget::default(), seed: 1 };
        let r = decay_sweep(&t, SurfaceClass::of_chart(&circle), &cfg)?;
        println!("p = {p}: slope {:.4} (predicted {:.4})", r.fitted_slope, r.predicted_slope);
        for (rho, a) in r.rho_levels.iter().zip(&r.averages) {
            println!("  rho {rho:>6}  average {a:.6e}");
        }
    }
    Ok(())
}
