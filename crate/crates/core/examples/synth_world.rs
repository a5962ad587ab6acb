//! Generate a synthetic study area, write it to disk and summarise what the
//! generator put there.
//!
//! cargo run --example synth_world -- [out_dir] [seed]

use geohg::synth::{generate, SynthConfig};

fn main() -> geohg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synth-world".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let world = generate(&SynthConfig { seed, ..SynthConfig::default() })?;
    world.save(&out)?;

    let d = &world.dataset;
    let ledger = &world.ledger;
    println!("{}x{} regions, {} POIs, {} labels -> {out}", d.grid.n_cols, d.grid.n_rows, d.pois.len(), d.labels.len());
    let (mut north, mut south) = (Vec::new(), Vec::new());
    for row in &ledger.rows {
        if row.side == 1 { north.push(row.y) } else { south.push(row.y) }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!("mean indicator by river side: {:.3} / {:.3} (jump {})", mean(&south), mean(&north), ledger.jump);
    println!("regions dominated by each archetype:");
    for (k, a) in world.config.archetypes.iter().enumerate() {
        let n = ledger.dominant_archetype.iter().filter(|&&d| d == k).count();
        println!("  {:<12} {n}", a.name);
    }
    Ok(())
}
