//! Rank conditions for a few families: rotations against the identity,
//! and the curve and graph pullback checks.

use radonlab::geometry::{identity_family, make_builtin_surface, planar_rotations, BuiltinSurface};
use radonlab::nondegeneracy::{check_christ_condition, check_curve_pullback, check_family_rank, check_graph_rank, named_graph, named_point_family, CheckConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = CheckConfig::default();
    let x_box = [(-1.0, 1.0), (-1.0, 1.0)];
    let arc = make_builtin_surface(&BuiltinSurface::ParabolaGraph { n: 2, radius: 0.5 })?;
    let segment = make_builtin_surface(&BuiltinSurface::Segment { n: 2, half_length: 0.5 })?;
    for (name, fam, surface) in [("rotations", planar_rotations(-1.0, 1.0), &arc), ("identity", identity_family(2, vec![(-1.0, 1.0)]), &segment)] {
        let r = check_family_rank(&fam, &x_box, &cfg)?;
        println!("{name}: family rank {} (margin {:.3e})", r.pass, r.min_margin);
        let r = check_christ_condition(&fam, surface, &cfg)?;
        println!("{name}: christ {} (margin {:.3e})", r.pass, r.min_margin);
    }
    for name in ["parabola", "line"] {
        let (fam, st) = named_point_family(name).expect("builtin");
        let r = check_curve_pullback(&fam, &[vec![0.0; fam.n]], &st, &cfg)?;
        println!("{name}: curve pullback {} (margin {:.3e})", r.pass, r.min_margin);
    }
    let (n, g, st) = named_graph("rotated_parabola").expect("builtin");
    let r = check_graph_rank(g.as_ref(), n, &st, &cfg)?;
    println!("rotated parabola: graph rank {} (margin {:.3e})", r.pass, r.min_margin);
    Ok(())
}
