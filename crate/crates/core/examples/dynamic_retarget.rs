//! Removes the instance being reached at t = 3 s; the loop switches to the
//! remaining one on the next step.

use clfreach::config::Config;
use clfreach::scene::{EventAction, PerturbationEvent, SceneConfig};
use clfreach::simulator::{run_episode, EndReason, EpisodeConfig};

fn main() {
    let cfg = Config::default();
    let scene = SceneConfig { category: "mug".into(), min_targets: 2, max_targets: 2, max_distractors: 0 };
    let probe = EpisodeConfig { max_time: 3.0, ..cfg.episode() };
    let (setup, selected) = (0..)
        .find_map(|seed| {
            let setup = cfg.sample_setup(&scene, seed).ok()?;
            let (log, outcome) = run_episode(&probe, &setup).ok()?;
            let id = log.last()?.instance?;
            (outcome.reason == EndReason::Timeout).then_some((setup, id))
        })
        .unwrap();

    let ep = EpisodeConfig {
        schedule: vec![PerturbationEvent { time: 3.0, action: EventAction::Remove(selected) }],
        ..cfg.episode()
    };
    let (log, outcome) = run_episode(&ep, &setup).unwrap();
    let mut last = None;
    for r in &log {
        if r.instance != last {
            println!("t {:.3}: reaching instance {:?}", r.t, r.instance);
            last = r.instance;
        }
    }
    println!("{:?} after {} steps", outcome.reason, log.len());
}
