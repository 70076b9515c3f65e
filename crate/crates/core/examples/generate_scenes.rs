//! Generates a small train/test data set from the shipped taxonomy, masks
//! the held-out classes in the training scenes and writes everything to a
//! directory readable by `primseg train --set data.scenes=<dir>`.
//!
//! `cargo run --release --example generate_scenes -- [out_dir] [seed]`

use std::path::PathBuf;

use primseg::pipeline::{read_dataset, synthetic_dataset, write_dataset, DataConfig};
use primseg::scenegen::{default_taxonomy, UNLABELED};

fn main() -> primseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("primseg-scenes"));
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);

    let d = default_taxonomy();
    let cfg = DataConfig {
        train_scenes: 8,
        test_scenes: 4,
        ..DataConfig::default()
    };
    let data = synthetic_dataset(&d.taxonomy, &d.split, &cfg, 600, seed)?;
    write_dataset(&data, &out)?;

    let names = &data.class_names;
    println!("{:<8} {:>11} {:>10}", "class", "train pts", "test pts");
    for (c, name) in names.iter().enumerate() {
        let count = |scenes: &[primseg::scenegen::Scene]| -> usize { scenes.iter().map(|s| s.class_histogram()[c]).sum() };
        println!("{:<8} {:>11} {:>10}", name, count(&data.train), count(&data.test));
    }
    let masked: usize = data
        .train
        .iter()
        .map(|s| s.labels.iter().filter(|&&l| l == UNLABELED).count())
        .sum();
    println!("masked training points: {masked}");

    assert_eq!(read_dataset(&out)?.train, data.train);
    println!("wrote {}", out.display());
    Ok(())
}
