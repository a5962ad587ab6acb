//! Cosine similarity of every region embedding to one anchor region, drawn
//! as a character map, using the contrastively pretrained embeddings.
//!
//! cargo run --release --example similarity_map -- [anchor_x] [anchor_y]

use geohg::eval::{run_experiment, similarity_map, ExperimentConfig, Method};
use geohg::geodata::RegionId;
use geohg::synth::{generate, SynthConfig};

fn main() -> geohg::Result<()> {
    let mut args = std::env::args().skip(1).filter_map(|s| s.parse::<usize>().ok());
    let world = generate(&SynthConfig::sized(32, 32))?;
    let grid = world.dataset.grid;
    let anchor = RegionId::new(args.next().unwrap_or(8), args.next().unwrap_or(16));
    grid.check(anchor)?;

    let out = run_experiment(&world.dataset, Method::GeohgSsl, &ExperimentConfig::default())?;
    let emb = out.embeddings.expect("learned methods return embeddings");
    let map = similarity_map(&emb, grid.index(anchor))?;

    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for y in (0..grid.n_rows).rev() {
        let line: String = (0..grid.n_cols)
            .map(|x| {
                let r = RegionId::new(x, y);
                if r == anchor {
                    return 'A';
                }
                let s = map.values[grid.index(r)];
                let t = ((s + 1.0) / 2.0).clamp(0.0, 1.0);
                shades[(t * (shades.len() - 1) as f64).round() as usize]
            })
            .collect();
        println!("{line}");
    }
    let arch = &world.ledger.dominant_archetype;
    let a = arch[grid.index(anchor)];
    let (mut same, mut other) = (Vec::new(), Vec::new());
    for i in (0..grid.n_regions()).filter(|&i| i != map.anchor) {
        if arch[i] == a { same.push(map.values[i]) } else { other.push(map.values[i]) }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!(
        "anchor archetype {}: mean similarity {:.3} to the same archetype (n={}), {:.3} to others (n={})",
        world.config.archetypes[a].name,
        mean(&same),
        same.len(),
        mean(&other),
        other.len()
    );
    Ok(())
}
