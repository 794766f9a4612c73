//! Knapp-type scaling probes at (p, q) = (3/2, 3): a flat segment at a
//! fixed angle against a thin plate, and all rotations of the unit square
//! against small balls.

use radonlab::geometry::{make_builtin_surface, BuiltinSurface};
use radonlab::probes::{knapp_probe, KnappConfig, ProbeAveraging, ProbeFamily};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let segment = make_builtin_surface(&BuiltinSurface::Segment { n: 2, half_length: 0.25 })?;
    let plate = KnappConfig { family: ProbeFamily::Plate, ..Default::default() };
    let r = knapp_probe(&segment, &ProbeAveraging::FixedTheta, &plate)?;
    println!("segment, fixed angle, plate: slope {:.4} {:?}", r.slope, r.verdict);

    let square = make_builtin_surface(&BuiltinSurface::Square { side: 1.0 })?;
    let balls = KnappConfig { family: ProbeFamily::Ball, ..Default::default() };
    let r = knapp_probe(&square, &ProbeAveraging::Rotations { count: 64, seed: 0 }, &balls)?;
    println!("square, rotations, ball: slope {:.4} {:?}", r.slope, r.verdict);
    for (d, ratio) in r.deltas.iter().zip(&r.ratios) {
        println!("  delta {d:.5}  ratio {ratio:.6e}");
    }
    Ok(())
}
