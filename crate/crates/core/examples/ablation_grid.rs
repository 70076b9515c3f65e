//! Runs an ablation grid (every cell, every seed) and prints mean and
//! standard deviation per cell.
//!
//! `cargo run --release --example ablation_grid -- [epochs] [seeds] [cells]`
//!
//! `cells` is comma separated; the default is `Base,Base+L_u,Base+L_u+GP128+MK16`.
//! `full` expands to loss variants, kernel counts and prototype counts.

use primseg::pipeline::{run_ablation_grid, synthetic_dataset, DataConfig, GridSpec, TrainConfig};
use primseg::scenegen::default_taxonomy;

fn main() -> primseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(60);
    let seeds: u64 = args.next().map(|s| s.parse().expect("seeds")).unwrap_or(2);
    let seeds: Vec<u64> = (0..seeds).collect();
    let grid = match args.next().as_deref() {
        None => GridSpec {
            seeds,
            ..GridSpec::default()
        },
        Some("full") => GridSpec::full_table(128, 16, &[1, 4, 8, 16], &[32, 64, 128], seeds),
        Some(list) => GridSpec {
            cells: list.split(',').map(str::parse).collect::<primseg::Result<_>>()?,
            seeds,
        },
    };

    let d = default_taxonomy();
    let base = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let table = run_ablation_grid(&base, &grid, |seed| {
        synthetic_dataset(&d.taxonomy, &d.split, &DataConfig::default(), base.model.embedding_dim, seed)
    })?;
    println!("{}", table.to_table());
    Ok(())
}
