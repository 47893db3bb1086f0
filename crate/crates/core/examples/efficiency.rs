//! Short runs of all four families and the resulting efficiency table:
//! parameters, error and time per epoch.
//!
//! cargo run --release --example efficiency -- [epochs]

use kanae::data::{synthetic_heartbeats, Dataset};
use kanae::models::{Family, ModelSpec};
use kanae::optim::TrainConfig;
use kanae::tasks::efficiency::{efficiency_table, markdown_summary, summarize};
use kanae::tasks::{run, Task, TaskSettings};

fn main() -> kanae::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|e| e.parse().ok()).unwrap_or(5);
    let data = Dataset::from_raw(synthetic_heartbeats(50, 50, 187, 1), synthetic_heartbeats(100, 100, 187, 2))?;
    let mut reports = Vec::new();
    for family in Family::ALL {
        for seed in 0..2 {
            let train = TrainConfig {
                epochs,
                seed,
                ..TrainConfig::default()
            };
            reports.push(run(Task::Reconstruction, &ModelSpec::new(family), &train, &TaskSettings::default(), &data)?.report);
        }
    }
    for row in efficiency_table(&reports) {
        println!(
            "{:<5} seed {} params {:>9} test MSE {:.4} {:.3} s/epoch",
            row.family, row.seed, row.params, row.test_mse, row.epoch_seconds
        );
    }
    println!();
    print!("{}", markdown_summary(&summarize(&efficiency_table(&reports))));
    Ok(())
}
