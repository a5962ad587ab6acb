//! Featurize a study area and build the heterogeneous graph for each task
//! preset, showing how the hypergate thresholds change the entity links.
//!
//! cargo run --example features_and_graph -- [data_dir]

use geohg::cli::Preset;
use geohg::eval::Dataset;
use geohg::hetgraph::{build_graph, rnr_edge_count};
use geohg::synth::{generate, SynthConfig};

fn main() -> geohg::Result<()> {
    let data = match std::env::args().nth(1) {
        Some(dir) => Dataset::load(dir)?,
        None => generate(&SynthConfig::sized(32, 32))?.dataset,
    };
    let table = data.featurize()?;
    println!(
        "{} regions, {} land-cover classes, {} POI categories, {} POIs outside the grid",
        table.len(),
        table.n_env,
        table.n_soc,
        table.pois_outside
    );
    let r = &table.regions[table.len() / 2];
    println!("region ({}, {}): pos {:?}", r.region.x, r.region.y, r.e_pos);
    println!("  env {:?}", r.e_env.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
    println!("  soc {:?}", r.e_soc.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());

    println!("\n{:<11} {:>6} {:>6} {:>6} {:>6}", "preset", "θ_env", "θ_soc", "ELR", "SLR");
    for p in [Preset::Carbon, Preset::Population, Preset::Gdp, Preset::Light, Preset::Pm25] {
        let (te, ts) = p.thresholds();
        let g = build_graph(&data.grid, &table, te, ts)?;
        assert_eq!(g.edges_rnr.len(), rnr_edge_count(data.grid.n_rows, data.grid.n_cols));
        println!("{:<11} {:>6} {:>6} {:>6} {:>6}", format!("{p:?}"), te, ts, g.edges_elr.len(), g.edges_slr.len());
    }
    Ok(())
}
