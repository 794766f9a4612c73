//! Applying the rotation-averaged circle operator to a small ball on a
//! grid, by direct and FFT convolution.

use radonlab::geometry::{make_builtin_surface, BuiltinSurface, RotationSampler};
use radonlab::radon::{apply_averaged, Averaging, ConvolveMethod, GridField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circle = make_builtin_surface(&BuiltinSurface::Circle { radius: 0.5 })?;
    let f = GridField::from_fn(&[64, 64], &[(-1.0, 1.0), (-1.0, 1.0)], |x| if x[0] * x[0] + x[1] * x[1] < 0.04 { 1.0 } else { 0.0 })?;
    let avg = Averaging::Rotations(RotationSampler::for_dim(2, 16, 7)?);
    let fft = apply_averaged(&f, &circle, &avg, 2.0, ConvolveMethod::Fft)?;
    let direct = apply_averaged(&f, &circle, &avg, 2.0, ConvolveMethod::Direct)?;
    let mass = |g: &GridField| g.values().iter().sum::<f64>() * g.cell_volume();
    for (theta, slice) in fft.params.iter().zip(&fft.slices).take(4) {
        println!("rotation {:?}: output mass / input mass {:.6}", theta, mass(slice) / mass(&f));
    }
    let (a, b) = (fft.to_field()?, direct.to_field()?);
    let diff = a.combine(1.0, &b, -1.0)?;
    println!("fft vs direct relative L²: {:.3e}", (diff.dot(&diff)? / b.dot(&b)?).sqrt());
    Ok(())
}
