//! Fit f(x, y) = exp(sin(pi x) + y^2) with a two-layer KAN [2, 5, 1] and
//! print the training curve.
//!
//! cargo run --release --example kan_fit

use kanae::kan::KanLinear;
use kanae::nn::{mse_grad, mse_loss, zero_grad, Ctx, Layer, Sequential, Tensor};
use kanae::optim::{Adam, Optimizer};
use kanae::splines::SplineGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> kanae::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let grid = SplineGrid::new(4, 8, -2.0, 2.0)?;
    let mut net = Sequential::new();
    net.push("inner", KanLinear::new(2, 5, grid.clone(), &mut rng)?);
    net.push("outer", KanLinear::new(5, 1, grid, &mut rng)?);

    let f = |x: f64, y: f64| (std::f64::consts::PI * x).sin() + y * y;
    let points: Vec<[f64; 2]> = (0..256).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let x = Tensor::from_rows(&points)?;
    let y = Tensor::from_rows(&points.iter().map(|p| [f(p[0], p[1]).exp() / 3.0]).collect::<Vec<_>>())?;

    let mut opt = Adam::new(1e-2);
    let mut ctx = Ctx::eval();
    for epoch in 0..=3000 {
        zero_grad(&mut net);
        let out = net.forward(&x, &mut ctx)?;
        let loss = mse_loss(&out, &y)?.value;
        net.backward(&mse_grad(&out, &y)?)?;
        opt.step(&mut net)?;
        if epoch % 500 == 0 {
            println!("epoch {epoch:>4}  mse {loss:.3e}");
        }
    }
    Ok(())
}
