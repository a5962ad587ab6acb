//! Train the graph model end to end on 25% of the labels and show the
//! learning curve and a few masked-region predictions.
//!
//! cargo run --release --example train_end_to_end -- [seed]

use geohg::eval::make_split;
use geohg::hetgraph::build_graph;
use geohg::model::{predict, train_end_to_end, HgnnConfig, ModelState};
use geohg::synth::{generate, SynthConfig};

fn main() -> geohg::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let world = generate(&SynthConfig { seed, ..SynthConfig::sized(32, 32) })?;
    let data = &world.dataset;
    let table = data.featurize()?;
    let graph = build_graph(&data.grid, &table, 0.6, 0.9)?;
    let split = make_split(&data.labels, 0.75, seed)?;

    let cfg = HgnnConfig { seed, ..HgnnConfig::default() };
    let state = ModelState::init(&cfg, table.input_dim(), table.n_env, table.n_soc)?;
    let (state, log) = train_end_to_end(&graph, &table, &data.labels, &split, state)?;

    for e in log.epochs.iter().step_by(25) {
        println!("epoch {:>4}  train {:.4}  val {:.4}", e.epoch, e.train_loss, e.val_loss);
    }
    println!("best epoch {} with validation MSE {:.4}", log.best_epoch, log.best_val_loss);

    let truth: std::collections::HashMap<_, _> = data.labels.entries.iter().copied().collect();
    for (r, y) in predict(&state, &graph, &table, &split.masked[..5])? {
        println!("masked ({:>2}, {:>2}): predicted {y:>7.3}, true {:>7.3}", r.x, r.y, truth[&r]);
    }
    Ok(())
}
