//! Trains one configuration on the shipped taxonomy and evaluates it on
//! held-out scenes.
//!
//! `cargo run --release --example train_eval -- [cell] [epochs] [seed]`
//!
//! `cell` names an ablation configuration, e.g. `Base`, `Base+L_u`,
//! `Base+L_u+GP128+MK16` (default) or `Base+L_self+GP128+MK16`.

use std::time::Instant;

use primseg::pipeline::{synthetic_dataset, train_and_evaluate, AblationCell, DataConfig, TrainConfig};
use primseg::scenegen::default_taxonomy;

fn main() -> primseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let cell: AblationCell = args.next().as_deref().unwrap_or("Base+L_u+GP128+MK16").parse()?;
    let epochs: usize = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(200);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);

    let d = default_taxonomy();
    let config = cell.apply(&TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    });
    let data = synthetic_dataset(&d.taxonomy, &d.split, &DataConfig::default(), config.model.embedding_dim, seed)?;

    let start = Instant::now();
    let (outcome, metrics) = train_and_evaluate(&config, &data)?;
    println!("{cell}: {} epochs in {:.1?}", epochs, start.elapsed());
    println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>9}", "epoch", "loss", "L_s", "aux", "seen acc", "seen mass");
    let every = (epochs / 10).max(1);
    for e in outcome.log.epochs.iter().filter(|e| (e.epoch + 1) % every == 0) {
        println!(
            "{:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.3} {:>9.3}",
            e.epoch + 1,
            e.loss,
            e.seen,
            e.auxiliary,
            e.seen_accuracy,
            e.unlabeled_seen_mass
        );
    }
    println!("\n{}", metrics.to_table(&data.class_names, &data.split));
    Ok(())
}
