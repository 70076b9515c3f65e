//! Checks every hand-written backward pass against central finite
//! differences on a random micro-batch.
//!
//! `cargo run --release --example gradient_check -- [seed]`

use primseg::pipeline::{run_gradcheck_suite, GradcheckConfig};

fn main() -> primseg::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().expect("seed")).unwrap_or(0);
    let cfg = GradcheckConfig::default();
    let checks = run_gradcheck_suite(&cfg, seed)?;
    println!("{:<34} {:>7} {:>12}", "block", "tensors", "max rel err");
    for c in &checks {
        println!(
            "{:<34} {:>7} {:>12.2e} {}",
            c.block,
            c.report.params.len(),
            c.report.max_rel_error(),
            if c.passed() { "" } else { "FAIL" }
        );
    }
    let ok = checks.iter().all(|c| c.passed());
    println!("h = {:e}, tolerance = {:e}: {}", cfg.step, cfg.tolerance, if ok { "all passed" } else { "FAILED" });
    if !ok {
        std::process::exit(1);
    }
    Ok(())
}
