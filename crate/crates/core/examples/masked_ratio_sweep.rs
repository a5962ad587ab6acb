//! Data-efficiency curve: R² of GeoHG as the masked ratio grows.

use geohg::eval::{masked_ratio_sweep, sweep_table, ExperimentConfig, Method};
use geohg::synth::{generate, SynthConfig};

fn main() -> geohg::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let world = generate(&SynthConfig { seed, ..SynthConfig::default() })?;
    let cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
    let reports = masked_ratio_sweep(&world.dataset, Method::Geohg, &cfg, &[0.80, 0.90, 0.95, 0.99])?;
    print!("{}", sweep_table(&reports));
    Ok(())
}
