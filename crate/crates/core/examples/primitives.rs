//! Samples each primitive kind and prints the shipped taxonomy's primitive
//! mixtures plus the overlap of each held-out class with its seen analog.
//!
//! `cargo run --release --example primitives`

use primseg::numerics::seeded_rng;
use primseg::scenegen::{default_taxonomy, mixture_overlap, sample_primitive, PrimitiveKind, PrimitiveSpec, Shape};

fn main() -> primseg::Result<()> {
    let shapes = [
        Shape::Cuboid { size: [1.0, 0.5, 0.2] },
        Shape::Cylinder { radius: 0.3, height: 1.0 },
        Shape::Sphere { radius: 0.4 },
        Shape::Cone { radius: 0.3, height: 0.8 },
        Shape::Torus { major_radius: 0.4, minor_radius: 0.1 },
        Shape::Pyramid { base: [1.0, 1.0], height: 0.7 },
    ];
    let mut rng = seeded_rng(0);
    println!("{:<9} {:>6}  bounding box", "kind", "points");
    for shape in shapes {
        let spec = PrimitiveSpec::new(shape, [0.0, 0.0, 0.0], 0.0, 500);
        let pts = sample_primitive(&spec, &mut rng)?;
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in &pts {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        println!(
            "{:<9} {:>6}  [{:+.2} {:+.2} {:+.2}] .. [{:+.2} {:+.2} {:+.2}]",
            format!("{:?}", spec.kind()),
            pts.len(),
            lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]
        );
    }

    let d = default_taxonomy();
    println!("\nprimitive mixtures (fraction of points per kind)");
    print!("{:<8}", "class");
    for k in PrimitiveKind::ALL {
        print!(" {:>8}", format!("{k:?}"));
    }
    println!();
    for (i, c) in d.taxonomy.categories.iter().enumerate() {
        print!("{:<8}", c.name);
        for v in c.mixture() {
            print!(" {v:>8.3}");
        }
        println!("{}", if d.split.is_unseen(i) { "  (held out)" } else { "" });
    }
    println!();
    for &(unseen, seen) in &d.analogs {
        let (u, s) = (&d.taxonomy.categories[unseen], &d.taxonomy.categories[seen]);
        println!("overlap({}, {}) = {:.3}", u.name, s.name, mixture_overlap(&u.mixture(), &s.mixture()));
    }
    Ok(())
}
