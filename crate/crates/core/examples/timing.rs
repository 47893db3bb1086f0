//! Median forward time of KAN layers against their standard counterparts.
//!
//! cargo run --release --example timing

use kanae::tasks::export::markdown_table;
use kanae::tasks::timing::{timing_benchmark, TimingOptions};

fn main() -> kanae::Result<()> {
    let rows = timing_benchmark(&[64, 128, 256, 512], &[4, 8, 16], &TimingOptions::default())?;
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.pair.clone(),
                r.width.to_string(),
                format!("{:.1}", r.kan_seconds * 1e6),
                format!("{:.1}", r.standard_seconds * 1e6),
                format!("{:.1}", r.ratio),
            ]
        })
        .collect();
    print!("{}", markdown_table(&["pair", "width", "KAN us", "standard us", "ratio"], &body));
    Ok(())
}
