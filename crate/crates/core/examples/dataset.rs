//! Generates a few supervised samples and summarises their labels.

use clfreach::config::Config;
use clfreach::dataset::generate_sample;

fn main() {
    let cfg = Config::default();
    for index in 0..5 {
        let s = generate_sample(&cfg, 99, index).unwrap();
        let v_min = s.cells.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
        println!(
            "sample {index}: {} objects, {} foreground cells, min V {:.4}",
            s.scene.instances.len(),
            s.cells.len(),
            v_min
        );
    }
}
