//! The unknown-aware loss on a random batch: its value, its bounds and the
//! effect of one gradient step on the seen-class mass of unlabeled points.
//!
//! `cargo run --release --example unknown_aware_loss`

use primseg::numerics::{seeded_rng, uniform_matrix};
use primseg::objective::{seen_mass, unknown_aware_loss, Batch, LossConfig};
use primseg::scenegen::SplitSpec;

fn main() -> primseg::Result<()> {
    let split = SplitSpec::holding_out(6, &[2, 5])?;
    let cfg = LossConfig::default();
    let seen_rows = vec![0, 1, 2];
    let labels = vec![0, 3, 4];
    let unseen_rows = vec![3, 4, 5, 6, 7];

    let uniform = ndarray::Array2::<f64>::zeros((8, 6));
    let b = Batch::new(uniform.view(), seen_rows.clone(), labels.clone(), unseen_rows.clone(), &split)?;
    println!("uniform logits: L_u = {} (= 4/6)", unknown_aware_loss(&b, &cfg)?.value);

    let mut d = uniform_matrix(&mut seeded_rng(3), 8, 6, 2.0);
    println!("{:>4} {:>10}", "step", "seen mass");
    for step in 0..=5 {
        let b = Batch::new(d.view(), seen_rows.clone(), labels.clone(), unseen_rows.clone(), &split)?;
        let term = unknown_aware_loss(&b, &cfg)?;
        assert!((0.0..=1.0).contains(&term.value));
        println!("{step:>4} {:>10.5}", seen_mass(&b, cfg.tau_u)?);
        d.scaled_add(-2.0, &term.grad);
    }
    Ok(())
}
