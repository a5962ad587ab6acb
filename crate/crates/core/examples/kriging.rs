//! Interpolation baselines on scattered samples: the empirical variogram,
//! the fitted exponential model, and IDW vs universal kriging on a trend
//! plus a step.
//!
//! cargo run --release --example kriging

use geohg::baselines::{empirical_variogram, fit_variogram, idw_predict, uk_predict, Sample, VARIOGRAM_BINS};
use rand::{Rng, SeedableRng};

fn field(x: f64, y: f64) -> f64 {
    0.05 * x - 0.03 * y + if x > 20.0 { 1.5 } else { 0.0 } + (x / 4.0).sin() * 0.3
}

fn main() -> geohg::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let samples: Vec<Sample> = (0..300)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..40.0), rng.random_range(0.0..40.0));
            Sample::new(x, y, field(x, y))
        })
        .collect();

    let ev = empirical_variogram(&samples, VARIOGRAM_BINS, 20.0);
    let model = fit_variogram(&samples)?;
    println!("fitted {model:?}");
    println!("{:>7} {:>9} {:>9} {:>6}", "lag", "empirical", "model", "pairs");
    for i in 0..ev.lags.len() {
        println!("{:>7.2} {:>9.4} {:>9.4} {:>6}", ev.lags[i], ev.gamma[i], model.gamma(ev.lags[i]), ev.counts[i]);
    }

    let (mut e_idw, mut e_uk, mut fallbacks, n) = (0.0, 0.0, 0, 400);
    for _ in 0..n {
        let (x, y) = (rng.random_range(2.0..38.0), rng.random_range(2.0..38.0));
        let truth = field(x, y);
        e_idw += (idw_predict(&samples, (x, y), 2.0, 16)? - truth).powi(2);
        let uk = uk_predict(&samples, (x, y), &model, 64)?;
        fallbacks += uk.fell_back as usize;
        e_uk += (uk.value - truth).powi(2);
    }
    println!("RMSE over {n} targets: IDW {:.4}, UK {:.4} ({fallbacks} fallbacks)", (e_idw / n as f64).sqrt(), (e_uk / n as f64).sqrt());
    Ok(())
}
