//! Trains on whole frames and on crops of the same images and compares test accuracy.
//!
//! `cargo run --release --example full_vs_cropped -- [seed]`

use insect_vision::cli::{experiment_full_vs_cropped, RunConfig};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = RunConfig { seed, ..RunConfig::default() };
    cfg.experiment.images_per_class = 40;
    let r = experiment_full_vs_cropped(&cfg, None).expect("experiment runs");
    println!("full    {:.4}", r.full.test.top1);
    println!("cropped {:.4}", r.cropped.test.top1);
    for c in &r.delta.per_class {
        println!("{:<28} recall {:.2} -> {:.2}", c.name, c.recall_a, c.recall_b);
    }
}
