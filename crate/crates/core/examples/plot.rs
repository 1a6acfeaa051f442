//! Runs three episodes and writes their trajectories to an SVG.

use clfreach::config::Config;
use clfreach::plot::render_svg;
use clfreach::simulator::run_episode;

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "trajectories.svg".into());
    let cfg = Config::default();
    let logs: Vec<_> = (0..3)
        .map(|seed| {
            let setup = cfg.sample_setup(&cfg.scene, seed).unwrap();
            run_episode(&cfg.episode(), &setup).unwrap().0
        })
        .collect();
    std::fs::write(&out, render_svg(&logs, &cfg.chain).unwrap()).unwrap();
    println!("wrote {out}");
}
