//! Trains briefly, saves a checkpoint, reloads it and segments a scene with
//! the reloaded model.
//!
//! `cargo run --release --example checkpoint_inference`

use primseg::pipeline::{infer_scene, load_checkpoint, save_checkpoint, synthetic_dataset, train, DataConfig, TrainConfig};
use primseg::scenegen::default_taxonomy;

fn main() -> primseg::Result<()> {
    let d = default_taxonomy();
    let config = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let data_cfg = DataConfig {
        train_scenes: 12,
        test_scenes: 1,
        ..DataConfig::default()
    };
    let data = synthetic_dataset(&d.taxonomy, &d.split, &data_cfg, config.model.embedding_dim, 0)?;
    let model = train(&config, data.training_set())?.model;

    let path = std::env::temp_dir().join("primseg-example-checkpoint.bin");
    save_checkpoint(&model, &path)?;
    let reloaded = load_checkpoint(&path, &config.model)?;

    let scene = &data.test[0];
    let before = infer_scene(scene, &model, config.k_neighbors)?;
    let after = infer_scene(scene, &reloaded, config.k_neighbors)?;
    assert_eq!(before, after, "reloaded model must reproduce every score");

    println!("checkpoint: {} ({} bytes)", path.display(), std::fs::metadata(&path).map_err(|e| primseg::Error::Io { path: path.clone(), source: e })?.len());
    println!("{:<8} {:>8} {:>10}", "class", "truth", "predicted");
    for (c, name) in data.class_names.iter().enumerate() {
        let truth = scene.labels.iter().filter(|&&l| l == c as i32).count();
        let pred = after.classes.iter().filter(|&&p| p == c).count();
        if truth + pred > 0 {
            println!("{name:<8} {truth:>8} {pred:>10}");
        }
    }
    let correct = after.classes.iter().zip(&scene.labels).filter(|(p, l)| **p as i32 == **l).count();
    println!("point accuracy {:.3}", correct as f64 / scene.len() as f64);
    Ok(())
}
