//! Central-difference verification of hand-written backward passes.
//!
//! The probe loss is `L = sum(r * forward(x))` for a fixed Gaussian `r`, so
//! `backward(r)` yields the analytic gradient of `L` with respect to every
//! parameter and input entry. Each checked entry is compared against
//! `(L(theta + h) - L(theta - h)) / 2h` in evaluation mode.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::layer::{zero_grad, Ctx, Layer};
use super::tensor::Tensor;
use crate::error::Result;

/// Gradients smaller than this are compared in absolute rather than
/// relative terms, which keeps round-off in `L` from dominating.
pub const MAGNITUDE_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone)]
pub struct GradcheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// `None` checks every entry; `Some(n)` spreads at least `n` checks
    /// evenly over all tensors (small tensors are checked in full).
    pub sample_budget: Option<usize>,
    pub seed: u64,
    /// Test hook: perturb one analytic gradient so the check must fail.
    pub corrupt_analytic: bool,
}

impl GradcheckOptions {
    pub fn exhaustive(tolerance: f64) -> Self {
        Self {
            step: 1e-5,
            tolerance,
            sample_budget: None,
            seed: 0,
            corrupt_analytic: false,
        }
    }

    pub fn sampled(tolerance: f64, budget: usize) -> Self {
        Self {
            sample_budget: Some(budget),
            ..Self::exhaustive(tolerance)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Offender {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub label: String,
    pub checked: usize,
    pub tolerance: f64,
    pub max_rel_error: f64,
    /// Up to five entries with the largest relative error, worst first.
    pub worst: Vec<Offender>,
    pub passed: bool,
}

fn probe_loss(layer: &mut dyn Layer, input: &Tensor, probe: &Tensor) -> Result<f64> {
    let y = layer.forward(input, &mut Ctx::eval())?;
    Ok(y.dot(probe))
}

fn nudge_param(layer: &mut dyn Layer, tensor: usize, index: usize, delta: f64) {
    let mut t = 0;
    layer.visit_params_mut("", &mut |_, p| {
        if t == tensor {
            p.value.data_mut()[index] += delta;
        }
        t += 1;
    });
}

fn pick(len: usize, quota: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match quota {
        Some(q) if q < len => {
            let mut idx = sample(rng, len, q).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

pub fn gradcheck(
    label: &str,
    layer: &mut dyn Layer,
    input: &Tensor,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let out_shape = layer.forward(input, &mut Ctx::eval())?.shape().to_vec();
    let probe = Tensor::normal(&out_shape, 1.0, &mut rng);

    zero_grad(layer);
    layer.forward(input, &mut Ctx::eval())?;
    let input_grad = layer.backward(&probe)?;

    let mut names = Vec::new();
    let mut grads = Vec::new();
    layer.visit_params("", &mut |n, p| {
        names.push(n.to_string());
        grads.push(p.grad.clone());
    });

    let n_tensors = names.len() + 1;
    let quota = opts.sample_budget.map(|b| b.div_ceil(n_tensors).max(1));
    let h = opts.step;
    let mut offenders = Vec::new();
    let mut corrupted = !opts.corrupt_analytic;

    let mut record = |tensor: &str, index: usize, mut analytic: f64, numeric: f64| {
        if !corrupted {
            analytic += 1e-2 * (1.0 + analytic.abs());
            corrupted = true;
        }
        offenders.push(Offender {
            tensor: tensor.to_string(),
            index,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    };

    for (t, (name, grad)) in names.iter().zip(&grads).enumerate() {
        for i in pick(grad.len(), quota, &mut rng) {
            nudge_param(layer, t, i, h);
            let up = probe_loss(layer, input, &probe)?;
            nudge_param(layer, t, i, -2.0 * h);
            let down = probe_loss(layer, input, &probe)?;
            nudge_param(layer, t, i, h);
            record(name, i, grad.data()[i], (up - down) / (2.0 * h));
        }
    }

    let mut x = input.clone();
    for i in pick(x.len(), quota, &mut rng) {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let up = probe_loss(layer, &x, &probe)?;
        x.data_mut()[i] = orig - h;
        let down = probe_loss(layer, &x, &probe)?;
        x.data_mut()[i] = orig;
        record("input", i, input_grad.data()[i], (up - down) / (2.0 * h));
    }

    let checked = offenders.len();
    offenders.sort_by(|a, b| b.rel_error.total_cmp(&a.rel_error));
    let max_rel_error = offenders.first().map_or(0.0, |o| o.rel_error);
    offenders.truncate(5);
    Ok(GradcheckReport {
        label: label.to_string(),
        checked,
        tolerance: opts.tolerance,
        max_rel_error,
        passed: max_rel_error < opts.tolerance,
        worst: offenders,
    })
}
