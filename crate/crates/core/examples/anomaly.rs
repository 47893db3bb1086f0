//! Anomaly detection: train on normal beats only, score test beats by
//! reconstruction error. Uses the UCR files under `$KANAE_UCR_DIR` when
//! present, otherwise beats with injected spikes.
//!
//! cargo run --release --example anomaly -- [family] [epochs]

use kanae::data::{spike_fixture, ucr_paths_from_env, Dataset};
use kanae::models::{Family, ModelSpec};
use kanae::optim::TrainConfig;
use kanae::tasks::{run, Task, TaskSettings};

fn main() -> kanae::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("kcae").parse()?;
    let epochs = args.next().and_then(|e| e.parse().ok()).unwrap_or(50);
    let data = match ucr_paths_from_env() {
        Some((train, test)) => Dataset::load(&train, &test)?,
        None => {
            let (train, test) = spike_fixture(60, 100, 100, 187, 1.0, 7);
            Dataset::from_raw(train, test)?
        }
    };
    let train = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let r = run(Task::Anomaly, &ModelSpec::new(family), &train, &TaskSettings::default(), &data)?.report;
    let a = r.anomaly.expect("anomaly metrics");
    println!("{family}: trained on {} normal series (label {})", a.train_samples, a.normal_label);
    println!("AUC {:.4}", a.auc);
    println!("threshold {:.5} (train q{:.0})", a.threshold, 100.0 * a.threshold_quantile);
    let c = a.confusion;
    println!(
        "TP {} FP {} TN {} FN {}",
        c.true_positive, c.false_positive, c.true_negative, c.false_negative
    );
    Ok(())
}
