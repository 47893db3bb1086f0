//! Write a synthetic two-class heartbeat set in UCR layout (label first,
//! tab separated), for trying the CLI without the real archive.
//!
//! cargo run --example synthetic_dataset -- <dir>

use kanae::data::{synthetic_heartbeats, write_ucr};

fn main() -> kanae::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic".into()));
    std::fs::create_dir_all(&dir)?;
    write_ucr(&dir.join("AbnormalHeartbeat_TRAIN.tsv"), &synthetic_heartbeats(50, 50, 187, 1))?;
    write_ucr(&dir.join("AbnormalHeartbeat_TEST.tsv"), &synthetic_heartbeats(545, 544, 187, 2))?;
    println!("wrote {}; set KANAE_UCR_DIR={} to use it", dir.display(), dir.display());
    Ok(())
}
