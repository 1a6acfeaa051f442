//! Success table over categories and simultaneous-instance counts.

use clfreach::config::Config;
use clfreach::simulator::{run_batch, BatchSpec};

fn main() {
    let cfg = Config::default();
    let spec = BatchSpec {
        categories: cfg.batch.categories.clone(),
        instance_counts: cfg.batch.instance_counts.clone(),
        episodes: 5,
        seed: 2024,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let table = run_batch(&cfg.episode(), &cfg, &spec).unwrap();
    print!("{}", table.to_text());
}
