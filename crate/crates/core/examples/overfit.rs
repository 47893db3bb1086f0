//! Gradient-flow sanity: drive each default architecture to near-zero
//! error on one fixed batch of eight normalized heartbeats. Dropout is off
//! unless given, since it fights memorizing a single batch.
//!
//! cargo run --release --example overfit -- [dropout]

use kanae::data::{synthetic_heartbeats, NormStats};
use kanae::models::{build, Family, ModelSpec};
use kanae::optim::{per_sample_losses, train, Objective, TrainConfig};

fn main() -> kanae::Result<()> {
    let dropout = std::env::args().nth(1).and_then(|d| d.parse().ok()).unwrap_or(0.0);
    let raw = synthetic_heartbeats(4, 4, 187, 11);
    let stats = NormStats::fit(&raw)?;
    let batch: Vec<Vec<f64>> = stats.apply(&raw).into_iter().map(|s| s.values).collect();
    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 8,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    for family in Family::ALL {
        let started = std::time::Instant::now();
        let spec = ModelSpec {
            dropout,
            ..ModelSpec::new(family)
        };
        let mut model = build(&spec, 0)?;
        let trace = train(&mut model, &batch, &cfg, Objective::Mse, &|_, _, _| None)?;
        let eval = per_sample_losses(&mut model, &batch, &batch, 8)?;
        let first_below = trace.epoch_loss.iter().position(|l| *l < 1e-2);
        println!(
            "{family:<5} train loss {:.2e} -> {:.2e}, first < 1e-2 at epoch {:?}, eval MSE {:.2e}, {:.1}s",
            trace.epoch_loss[0],
            trace.epoch_loss.last().unwrap(),
            first_below,
            eval.iter().sum::<f64>() / 8.0,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
