//! GeoHG against IDW and universal kriging on a synthetic world with a
//! river discontinuity, at 75% masking.

use geohg::eval::{run_experiment, ExperimentConfig, Method};
use geohg::synth::{generate, SynthConfig};

fn main() -> geohg::Result<()> {
    let seeds: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let seeds = if seeds.is_empty() { vec![0] } else { seeds };
    for seed in seeds {
        let world = generate(&SynthConfig { seed, ..SynthConfig::default() })?;
        let cfg = ExperimentConfig { seed, ..ExperimentConfig::default() };
        for method in [Method::Geohg, Method::GeohgSsl, Method::Idw, Method::Uk] {
            let out = run_experiment(&world.dataset, method, &cfg)?;
            let r = &out.report;
            println!(
                "seed {seed} {:<6} R2 {:.3}  MAE {:.3}  RMSE {:.3}  epochs {:?}  {:.1}s",
                method.as_str(),
                r.r2,
                r.mae,
                r.rmse,
                out.log.as_ref().map(|l| l.epochs.len()),
                r.runtime_s
            );
        }
    }
    Ok(())
}
