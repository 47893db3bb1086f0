//! Inpainting on synthetic heartbeats: error inside the masked blocks
//! against filling them with zeros.
//!
//! cargo run --release --example inpainting -- [family] [mask_ratio] [block]

use kanae::data::{synthetic_heartbeats, Dataset};
use kanae::models::{Family, ModelSpec};
use kanae::optim::TrainConfig;
use kanae::tasks::{run, Task, TaskSettings};

fn main() -> kanae::Result<()> {
    let mut args = std::env::args().skip(1);
    let family: Family = args.next().as_deref().unwrap_or("cae").parse()?;
    let mask_ratio = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let mask_block = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let data = Dataset::from_raw(synthetic_heartbeats(50, 50, 187, 1), synthetic_heartbeats(100, 100, 187, 2))?;
    let settings = TaskSettings {
        mask_ratio,
        mask_block,
        ..TaskSettings::default()
    };
    let train = TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    };
    let r = run(Task::Inpainting, &ModelSpec::new(family), &train, &settings, &data)?.report;
    let m = r.inpainting.expect("inpainting metrics");
    println!("{family}, {:.0}% masked in blocks of {}", 100.0 * m.mask_ratio, m.mask_block);
    println!("masked MSE    {:.5} over {} positions", m.masked_mse, m.masked_positions);
    println!("unmasked MSE  {:.5} over {} positions", m.unmasked_mse, m.unmasked_positions);
    println!("zero-fill masked MSE {:.5}", m.zero_fill_masked_mse);
    Ok(())
}
