//! Save a model, read the header back, and reload the weights into a
//! fresh model.
//!
//! cargo run --example checkpoint

use kanae::models::{build, Family, ModelSpec};
use kanae::nn::checkpoint;
use kanae::nn::{Ctx, Layer, Tensor};
use rand::SeedableRng;

fn main() -> kanae::Result<()> {
    let spec = ModelSpec::new(Family::Kcae);
    let mut trained = build(&spec, 1)?;
    let path = std::env::temp_dir().join("kanae_example.ckpt");
    checkpoint::save(&path, serde_json::to_value(&spec)?, &trained)?;
    println!("{}", serde_json::to_string_pretty(&checkpoint::read_metadata(&path)?)?);

    let mut restored = build(&spec, 2)?;
    checkpoint::load_into(&path, &mut restored)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::normal(&[2, spec.input_length], 1.0, &mut rng);
    let a = trained.forward(&x, &mut Ctx::eval())?;
    let b = restored.forward(&x, &mut Ctx::eval())?;
    println!("outputs identical after reload: {}", a.data() == b.data());
    std::fs::remove_file(&path)?;
    Ok(())
}
