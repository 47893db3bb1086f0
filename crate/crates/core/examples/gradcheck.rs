//! Run the gradient-check suite and print one line per layer type.
//!
//! cargo run --release --example gradcheck -- [--small]

use kanae::suite::{gradcheck_suite, SuiteOptions};

fn main() -> kanae::Result<()> {
    let small = std::env::args().any(|a| a == "--small");
    let entries = gradcheck_suite(SuiteOptions {
        small_models: small,
        ..SuiteOptions::default()
    })?;
    for e in entries {
        let r = &e.report;
        println!(
            "{:<18} {:>6} entries  worst rel {:.2e}  {}  {:.2} s",
            e.layer_type,
            r.checked,
            r.max_rel_error,
            if r.passed { "ok" } else { "FAILED" },
            e.seconds
        );
    }
    Ok(())
}
