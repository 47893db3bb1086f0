//! Forward-pass timing of KAN layers against their standard counterparts.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::median;
use crate::error::Result;
use crate::kan::{KanConv1d, KanLinear};
use crate::nn::{Conv1d, Ctx, Layer, Linear, Tensor};
use crate::splines::{GridParams, SplineGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingOptions {
    pub warmup: usize,
    pub iterations: usize,
    pub batch: usize,
    /// Sequence length for the convolution pairs.
    pub length: usize,
    pub seed: u64,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self {
            warmup: 10,
            iterations: 100,
            batch: 16,
            length: 187,
            seed: 0,
        }
    }
}

/// Median evaluation-mode forward time in seconds.
pub fn median_forward_seconds(layer: &mut dyn Layer, x: &Tensor, opts: &TimingOptions) -> Result<f64> {
    let mut ctx = Ctx::eval();
    for _ in 0..opts.warmup {
        std::hint::black_box(layer.forward(x, &mut ctx)?);
    }
    let mut times = Vec::with_capacity(opts.iterations);
    for _ in 0..opts.iterations.max(1) {
        let t = Instant::now();
        std::hint::black_box(layer.forward(x, &mut ctx)?);
        times.push(t.elapsed().as_secs_f64());
    }
    Ok(median(&times))
}

/// One matched pair: a KAN layer and a standard layer of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    /// `linear` or `conv1d`.
    pub pair: String,
    /// Features (dense) or channels (convolution), in and out.
    pub width: usize,
    pub kan_seconds: f64,
    pub standard_seconds: f64,
    pub ratio: f64,
}

fn input(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::normal(shape, 1.0, rng)
}

/// Time KAN-linear vs linear at `width -> width`.
pub fn time_linear_pair(width: usize, opts: &TimingOptions) -> Result<TimingRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let grid = SplineGrid::try_from(GridParams::default())?;
    let mut kan = KanLinear::new(width, width, grid, &mut rng)?;
    let mut lin = Linear::new(width, width, &mut rng)?;
    let x = input(&[opts.batch, width], &mut rng);
    let kan_seconds = median_forward_seconds(&mut kan, &x, opts)?;
    let standard_seconds = median_forward_seconds(&mut lin, &x, opts)?;
    Ok(TimingRow {
        pair: "linear".into(),
        width,
        kan_seconds,
        standard_seconds,
        ratio: kan_seconds / standard_seconds,
    })
}

/// Time KAN-conv1d vs conv1d with `width` channels in and out, kernel 5.
pub fn time_conv_pair(width: usize, opts: &TimingOptions) -> Result<TimingRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let grid = SplineGrid::try_from(GridParams::default())?;
    let mut kan = KanConv1d::new(width, width, 5, 1, 2, grid, &mut rng)?;
    let mut conv = Conv1d::new(width, width, 5, 1, 2, &mut rng)?;
    let x = input(&[opts.batch, width, opts.length], &mut rng);
    let kan_seconds = median_forward_seconds(&mut kan, &x, opts)?;
    let standard_seconds = median_forward_seconds(&mut conv, &x, opts)?;
    Ok(TimingRow {
        pair: "conv1d".into(),
        width,
        kan_seconds,
        standard_seconds,
        ratio: kan_seconds / standard_seconds,
    })
}

/// Linear pairs at each of `linear_widths`, conv pairs at each of
/// `conv_widths`.
pub fn timing_benchmark(linear_widths: &[usize], conv_widths: &[usize], opts: &TimingOptions) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &w in linear_widths {
        rows.push(time_linear_pair(w, opts)?);
    }
    for &w in conv_widths {
        rows.push(time_conv_pair(w, opts)?);
    }
    Ok(rows)
}
