//! Train one family on the reconstruction task and print the report summary.
//!
//! Uses the UCR files under `$KANAE_UCR_DIR` when present, otherwise a
//! synthetic heartbeat set of the same shape (100 train, 1089 test, 187).
//!
//! cargo run --release --example reconstruction -- kcae 20

use kanae::data::{synthetic_heartbeats, ucr_paths_from_env, Dataset};
use kanae::models::{Family, ModelSpec};
use kanae::optim::TrainConfig;
use kanae::tasks::{run, Task, TaskSettings};

fn main() -> kanae::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("kcae").parse()?;
    let epochs = args.next().and_then(|e| e.parse().ok()).unwrap_or(20);

    let data = match ucr_paths_from_env() {
        Some((train, test)) => Dataset::load(&train, &test)?,
        None => {
            eprintln!("KANAE_UCR_DIR not set; using synthetic heartbeats");
            Dataset::from_raw(synthetic_heartbeats(50, 50, 187, 1), synthetic_heartbeats(545, 544, 187, 2))?
        }
    };
    let spec = ModelSpec::new(family);
    let train = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let out = run(Task::Reconstruction, &spec, &train, &TaskSettings::default(), &data)?;
    let r = &out.report;
    println!("family      {}", r.family);
    println!("params      {}", r.param_count);
    println!("epochs      {}", r.epoch_loss.len());
    println!("s/epoch     {:.3}", r.mean_epoch_seconds);
    println!("final loss  {:.5}", r.epoch_loss.last().unwrap());
    println!("train MSE   {:.5}", r.train_mse);
    println!("test MSE    {:.5}", r.test_mse);
    println!("test q50/q99/max  {:.5} / {:.5} / {:.5}", r.summary_test.q50, r.summary_test.q99, r.summary_test.max);
    if let Some(s) = r.latent_silhouette {
        println!("latent silhouette {s:.3}");
    }
    Ok(())
}
