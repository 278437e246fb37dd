//! Runs the whole capture to decision chain into a temporary directory, then replays it.

use insect_vision::cli::{replay, run_pipeline, RunConfig, METRICS, RUN_RECORD};

fn main() {
    let dir = std::env::temp_dir().join("insect-vision-pipeline-example");
    let mut cfg = RunConfig { seed: 3, out: Some(dir.join("run")), ..RunConfig::default() };
    cfg.pipeline.transits = 8;
    cfg.train.epochs = 10;
    let record = run_pipeline(&cfg).expect("pipeline runs");
    let m = &record.metrics;
    println!("{} transits, {} captures, {} crops, top-1 {:.3}", m.transits, m.captures, m.crops, m.species.top1);
    println!("decisions by rank {:?}", m.decisions_by_rank);

    replay(&dir.join("run").join(RUN_RECORD), Some(dir.join("replay"))).expect("replay runs");
    let same = std::fs::read(dir.join("run").join(METRICS)).unwrap() == std::fs::read(dir.join("replay").join(METRICS)).unwrap();
    println!("replay identical: {same} ({})", dir.display());
}
