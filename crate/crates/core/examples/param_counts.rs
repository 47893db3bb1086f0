//! Parameter counts of the four default architectures, from the built
//! models and from the closed-form formulas.

use kanae::models::{build, expected_param_count, Family, ModelSpec};

fn main() -> kanae::Result<()> {
    println!("{:<6} {:>12} {:>12}", "family", "built", "formula");
    for family in Family::ALL {
        let spec = ModelSpec::new(family);
        let model = build(&spec, 0)?;
        println!(
            "{:<6} {:>12} {:>12}",
            family.to_string(),
            model.param_count(),
            expected_param_count(&spec)?
        );
    }
    Ok(())
}
