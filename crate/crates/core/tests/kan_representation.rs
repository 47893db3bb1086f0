//! Two stacked KAN layers with hidden width 2n+1 fit a sum of inputs.

use kanae::kan::KanLinear;
use kanae::nn::{mse_grad, mse_loss, zero_grad, Ctx, Layer, Sequential, Tensor};
use kanae::optim::{Adam, Optimizer};
use kanae::splines::SplineGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fit_sum(n: usize, epochs: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let grid = SplineGrid::new(4, 5, -2.0, 2.0).unwrap();
    let mut net = Sequential::new();
    net.push("inner", KanLinear::new(n, 2 * n + 1, grid.clone(), &mut rng).unwrap());
    net.push("outer", KanLinear::new(2 * n + 1, 1, grid, &mut rng).unwrap());
    let xs: Vec<f64> = (0..200 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = xs.chunks(n).map(|r| r.iter().sum::<f64>()).collect();
    let x = Tensor::new(&[200, n], xs).unwrap();
    let y = Tensor::new(&[200, 1], ys).unwrap();
    let mut adam = Adam::new(1e-2);
    let mut ctx = Ctx::eval();
    let mut last = f64::INFINITY;
    for _ in 0..epochs {
        zero_grad(&mut net);
        let out = net.forward(&x, &mut ctx).unwrap();
        last = mse_loss(&out, &y).unwrap().value;
        net.backward(&mse_grad(&out, &y).unwrap()).unwrap();
        adam.step(&mut net).unwrap();
    }
    last
}

#[test]
fn two_layers_of_width_2n_plus_1_fit_a_sum() {
    for n in [2, 3] {
        let mse = fit_sum(n, 8000);
        assert!(mse < 1e-6, "n={n}: {mse}");
    }
}
