//! Train a variational model and write sampled series to a CSV.
//!
//! cargo run --release --example generation -- [family] [out.csv]

use kanae::data::{synthetic_heartbeats, Dataset};
use kanae::models::{Family, ModelSpec};
use kanae::optim::TrainConfig;
use kanae::tasks::export::write_samples;
use kanae::tasks::{run, Task, TaskSettings};

fn main() -> kanae::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("kcae").parse()?;
    let out = args.next().unwrap_or_else(|| "generated.csv".into());
    let data = Dataset::from_raw(synthetic_heartbeats(100, 0, 187, 1), synthetic_heartbeats(50, 0, 187, 2))?;
    let spec = ModelSpec {
        variational: true,
        ..ModelSpec::new(family)
    };
    let train = TrainConfig {
        epochs: 80,
        ..TrainConfig::default()
    };
    let outcome = run(Task::Generation, &spec, &train, &TaskSettings::default(), &data)?;
    let g = outcome.report.generation.as_ref().expect("generation metrics");
    println!("{} samples in [{:.3}, {:.3}]", g.samples, g.min, g.max);
    println!("mean |mean gap| {:.4}, mean |std gap| {:.4}", g.mean_abs_mean_gap, g.mean_abs_std_gap);
    let rows = outcome.generated.as_ref().expect("generated samples");
    write_samples(std::path::Path::new(&out), rows)?;
    println!("wrote {out}");
    Ok(())
}
