//! Compare analytic gradients of the regression and contrastive losses with
//! central finite differences on a tiny grid.
//!
//! cargo run --release --example gradient_check

use geohg::hetgraph::build_graph;
use geohg::model::{
    contrastive_loss_and_grads, end_to_end_loss_and_grads, positive_sets, HgnnConfig, ModelState, RelationalAdjacency,
    SslConfig,
};
use geohg::synth::random_features;
use geohg::tensor::Parameters;

const STEP: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn main() -> geohg::Result<()> {
    let table = random_features(4, 4, 3, 2, 11)?;
    let graph = build_graph(&table.grid, &table, 0.3, 0.4)?;
    let adj = RelationalAdjacency::new(&graph);
    let cfg = HgnnConfig { n_layers: 2, hidden_dim: 4, ..HgnnConfig::default() };
    let state = ModelState::init(&cfg, table.input_dim(), table.n_env, table.n_soc)?;
    let x = table.input_matrix(true);

    let idx: Vec<usize> = (0..table.len()).step_by(2).collect();
    let y: Vec<f64> = idx.iter().map(|&i| (i as f64 * 0.37).sin()).collect();
    let (_, g_bb, _) = end_to_end_loss_and_grads(&state.backbone, &state.head, &x, &adj, &idx, &y)?;
    let mse = |b: &geohg::model::Backbone| end_to_end_loss_and_grads(b, &state.head, &x, &adj, &idx, &y).map(|r| r.0);

    let ssl = SslConfig::default();
    let sets = positive_sets(&graph, &table, ssl.top_k);
    let anchors: Vec<usize> = (0..table.len()).filter(|&i| !sets[i].is_empty()).collect();
    let (_, g_nce) = contrastive_loss_and_grads(&state.backbone, &x, &adj, &anchors, &sets, &ssl)?;
    let nce = |b: &geohg::model::Backbone| contrastive_loss_and_grads(b, &x, &adj, &anchors, &sets, &ssl).map(|r| r.0);

    for (name, grads, loss) in [
        ("MSE", &g_bb, &mse as &dyn Fn(&_) -> geohg::Result<f64>),
        ("InfoNCE", &g_nce, &nce),
    ] {
        let (mut worst, mut count) = (0.0f64, 0);
        for p in 0..state.backbone.params().len() {
            let (rows, cols) = state.backbone.params()[p].shape();
            for i in 0..rows {
                for j in 0..cols {
                    let mut b = state.backbone.clone();
                    let orig = b.params()[p].get(i, j);
                    b.params_mut()[p].set(i, j, orig + STEP);
                    let up = loss(&b)?;
                    b.params_mut()[p].set(i, j, orig - STEP);
                    let down = loss(&b)?;
                    worst = worst.max(rel_err(grads.params()[p].get(i, j), (up - down) / (2.0 * STEP)));
                    count += 1;
                }
            }
        }
        println!("{name:<8} {count} parameters checked, worst relative error {worst:.2e}");
    }
    Ok(())
}
