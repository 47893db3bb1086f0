//! Denoising on synthetic heartbeats: the trained model against the
//! do-nothing baseline of returning the noisy input.
//!
//! cargo run --release --example denoising -- [family] [sigma]

use kanae::data::{synthetic_heartbeats, Dataset};
use kanae::models::{Family, ModelSpec};
use kanae::optim::TrainConfig;
use kanae::tasks::{run, Task, TaskSettings};

fn main() -> kanae::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("kcae").parse()?;
    let sigma = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let data = Dataset::from_raw(synthetic_heartbeats(50, 50, 187, 1), synthetic_heartbeats(100, 100, 187, 2))?;
    let settings = TaskSettings {
        noise_sigma: sigma,
        ..TaskSettings::default()
    };
    let train = TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    };
    let r = run(Task::Denoising, &ModelSpec::new(family), &train, &settings, &data)?.report;
    let d = r.denoising.expect("denoising metrics");
    println!("{family}, sigma {}", d.noise_sigma);
    println!("model    MSE(model(x + noise), x) = {:.5}", r.test_mse);
    println!("baseline MSE(x + noise, x)        = {:.5}", d.identity_baseline_mse);
    Ok(())
}
