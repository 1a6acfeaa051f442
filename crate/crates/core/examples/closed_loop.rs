//! One closed-loop reaching episode with oracle proposals.

use clfreach::config::Config;
use clfreach::simulator::run_episode;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let cfg = Config::default();
    let setup = cfg.sample_setup(&cfg.scene, seed).unwrap();
    let (log, outcome) = run_episode(&cfg.episode(), &setup).unwrap();

    for r in log.iter().step_by(15) {
        println!(
            "t {:6.3}  instance {:?}  V_hat {:>9}  V {:>9}",
            r.t,
            r.instance,
            r.v_hat_min.map_or("-".into(), |v| format!("{v:.5}")),
            r.v_true.map_or("-".into(), |v| format!("{v:.5}")),
        );
    }
    println!("{outcome:?}");
}
