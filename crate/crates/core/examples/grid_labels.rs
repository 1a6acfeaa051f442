//! Renders the supervised grid for a sampled scene and prints an ASCII map
//! of which instance owns each cell.

use clfreach::config::Config;
use clfreach::perception::render_labels;

fn main() {
    let cfg = Config::default();
    let setup = cfg.sample_setup(&cfg.scene, 7).unwrap();
    let grid = cfg.camera.grid();
    let labels =
        render_labels(&setup.scene, &cfg.chain, &setup.initial_joints, &cfg.camera, &grid, &cfg.clf, &cfg.solver)
            .unwrap();

    for row in 0..grid.rows {
        let line: String = (0..grid.cols)
            .map(|col| match labels.owner_of(row, col) {
                Some(id) => char::from_digit(id % 36, 36).unwrap(),
                None => '.',
            })
            .collect();
        println!("{line}");
    }
    for inst in setup.scene.targets() {
        if let Some(c) = labels.cells.iter().find(|c| c.instance_id == inst.id) {
            let n = labels.cells.iter().filter(|c| c.instance_id == inst.id).count();
            println!("instance {}: {n} cells, V = {:.4}", inst.id, c.value);
        }
    }
}
