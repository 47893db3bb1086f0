//! Optimizers and the shared training loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec, Noise};
use crate::nn::layer::{zero_grad, Ctx, Layer};
use crate::nn::loss::{kl_divergence, kl_grad, mse_grad, mse_loss};
use crate::nn::tensor::Tensor;

pub trait Optimizer {
    /// Apply one update from the accumulated gradients. A non-finite
    /// gradient aborts before any parameter changes.
    fn step(&mut self, layer: &mut dyn Layer) -> Result<()>;
}

fn check_grads(layer: &dyn Layer) -> Result<()> {
    let mut bad = None;
    layer.visit_params("", &mut |name, p| {
        if bad.is_none() && p.grad.data().iter().any(|g| !g.is_finite()) {
            bad = Some(name.to_string());
        }
    });
    match bad {
        Some(layer) => Err(Error::Numeric {
            layer,
            detail: "non-finite gradient".into(),
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, layer: &mut dyn Layer) -> Result<()> {
        check_grads(layer)?;
        let lr = self.lr;
        layer.visit_params_mut("", &mut |_, p| {
            for (w, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                *w -= lr * g;
            }
        });
        Ok(())
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Whether every moment entry is finite.
    pub fn moments_finite(&self) -> bool {
        self.m.iter().chain(&self.v).flatten().all(|x| x.is_finite())
    }
}

impl Optimizer for Adam {
    fn step(&mut self, layer: &mut dyn Layer) -> Result<()> {
        check_grads(layer)?;
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let step = lr / c1;
        let inv_c2 = 1.0 / c2;
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut i = 0;
        let mut overflow: Option<String> = None;
        layer.visit_params_mut("", &mut |name, p| {
            if ms.len() == i {
                ms.push(vec![0.0; p.value.len()]);
                vs.push(vec![0.0; p.value.len()]);
            }
            let (m, v) = (&mut ms[i], &mut vs[i]);
            let mut finite = true;
            for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                finite &= v.is_finite();
                *w -= step * *m / ((*v * inv_c2).sqrt() + eps);
            }
            if !finite && overflow.is_none() {
                overflow = Some(name.to_string());
            }
            i += 1;
        });
        match overflow {
            None => Ok(()),
            Some(layer) => Err(Error::Numeric {
                layer,
                detail: "Adam second moment overflowed".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::config(format!("unknown optimizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.epochs == 0 {
            out.push("train.epochs must be at least 1".to_string());
        }
        if self.batch_size == 0 {
            out.push("train.batch_size must be at least 1".to_string());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            out.push(format!("train.learning_rate must be positive, got {}", self.learning_rate));
        }
        out
    }

    /// Problems that depend on the model as well: batch norm needs at
    /// least two samples per batch.
    pub fn problems_for(&self, spec: &ModelSpec) -> Vec<String> {
        let mut out = self.problems();
        if spec.batchnorm && self.batch_size == 1 {
            out.push("train.batch_size must be at least 2 when model.batchnorm is on".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::config(p.join("; ")))
        }
    }

    pub fn optimizer(&self) -> Box<dyn Optimizer> {
        match self.optimizer {
            OptimizerKind::Adam => Box::new(Adam::new(self.learning_rate)),
            OptimizerKind::Sgd => Box::new(Sgd {
                lr: self.learning_rate,
            }),
        }
    }
}

/// What the training loop minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// MSE between the reconstruction and the clean target.
    Mse,
    /// MSE plus `beta` times the KL term, through the sampled latent.
    Vae { beta: f64, noise: Noise },
}

/// Per-epoch sample-weighted mean training loss, plus wall-clock seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub epoch_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
}

/// Optional per-sample input corruption: `(epoch, sample index, clean)` to
/// the model input, or `None` to feed the clean series.
pub type InputTransform<'a> = dyn Fn(usize, usize, &[f64]) -> Option<Vec<f64>> + 'a;

/// Seeded random stream `tag` of a run.
pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

pub const SHUFFLE_STREAM: u64 = 1;
pub const DROPOUT_STREAM: u64 = 2;

fn stack(rows: &[&[f64]]) -> Result<Tensor> {
    Tensor::from_rows(rows)
}

/// Train `model` on `data` (clean series, one per row).
///
/// Every epoch draws a fresh permutation; with batch norm, a trailing batch
/// of one sample is skipped. Input corruption is applied per
/// sample through `transform`, targets are always the clean series.
pub fn train(
    model: &mut Model,
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    objective: Objective,
    transform: &InputTransform,
) -> Result<LossTrace> {
    let p = cfg.problems_for(model.spec());
    if !p.is_empty() {
        return Err(Error::config(p.join("; ")));
    }
    let min_batch = if model.spec().batchnorm { 2 } else { 1 };
    if data.len() < min_batch {
        return Err(Error::config(format!("training needs at least {min_batch} samples")));
    }
    let mut opt = cfg.optimizer();
    let mut shuffle = stream(cfg.seed, SHUFFLE_STREAM);
    let mut ctx = Ctx::train(stream(cfg.seed, DROPOUT_STREAM));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = LossTrace::default();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        let mut seen = 0usize;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            if idx.len() < min_batch {
                continue;
            }
            let abort = |msg: String| Error::Training {
                epoch,
                batch: bi,
                msg,
            };
            let corrupted: Vec<Option<Vec<f64>>> = idx.iter().map(|&i| transform(epoch, i, &data[i])).collect();
            let inputs: Vec<&[f64]> = idx
                .iter()
                .zip(&corrupted)
                .map(|(&i, c)| c.as_deref().unwrap_or(&data[i]))
                .collect();
            let targets: Vec<&[f64]> = idx.iter().map(|&i| data[i].as_slice()).collect();
            let x = stack(&inputs)?;
            let y = stack(&targets)?;

            zero_grad(model);
            let loss = match objective {
                Objective::Mse => {
                    let out = model.forward(&x, &mut ctx).map_err(|e| abort(e.to_string()))?;
                    let loss = mse_loss(&out, &y)?.value;
                    if !loss.is_finite() {
                        return Err(abort(format!("loss is {loss}")));
                    }
                    model.backward(&mse_grad(&out, &y)?)?;
                    loss
                }
                Objective::Vae { beta, noise } => {
                    let out = model.forward_vae(&x, &mut ctx, noise).map_err(|e| abort(e.to_string()))?;
                    let rec = mse_loss(&out.reconstruction, &y)?.value;
                    let kl = kl_divergence(&out.mu, &out.logvar)?.value;
                    let loss = rec + beta * kl;
                    if !loss.is_finite() {
                        return Err(abort(format!("loss is {loss}")));
                    }
                    let (dmu, dlv) = kl_grad(&out.mu, &out.logvar)?;
                    model.backward_vae(
                        &mse_grad(&out.reconstruction, &y)?,
                        &dmu.map(|g| beta * g),
                        &dlv.map(|g| beta * g),
                    )?;
                    loss
                }
            };
            model.regularize();
            opt.step(model).map_err(|e| abort(e.to_string()))?;
            total += loss * idx.len() as f64;
            seen += idx.len();
        }
        trace.epoch_loss.push(total / seen as f64);
        trace.epoch_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok(trace)
}

/// Per-sample MSE of `model(inputs[i])` against `targets[i]` in evaluation
/// mode, computed in chunks of `batch` samples.
pub fn per_sample_losses(model: &mut Model, inputs: &[Vec<f64>], targets: &[Vec<f64>], batch: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(inputs.len());
    for (xs, ys) in inputs.chunks(batch.max(1)).zip(targets.chunks(batch.max(1))) {
        let x = Tensor::from_rows(xs)?;
        let y = Tensor::from_rows(ys)?;
        let pred = model.forward(&x, &mut Ctx::eval())?;
        out.extend(mse_loss(&pred, &y)?.per_sample);
    }
    Ok(out)
}

/// Evaluation-mode reconstructions, one row per input.
pub fn reconstruct(model: &mut Model, inputs: &[Vec<f64>], batch: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(inputs.len());
    for xs in inputs.chunks(batch.max(1)) {
        let pred = model.forward(&Tensor::from_rows(xs)?, &mut Ctx::eval())?;
        out.extend(pred.rows().map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Evaluation-mode latent codes (means for variational models).
pub fn encode_all(model: &mut Model, inputs: &[Vec<f64>], batch: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(inputs.len());
    for xs in inputs.chunks(batch.max(1)) {
        let z = model.encode(&Tensor::from_rows(xs)?, &mut Ctx::eval())?;
        out.extend(z.rows().map(<[f64]>::to_vec));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Param;
    use crate::nn::Linear;

    /// A single scalar parameter with a caller-set gradient.
    #[derive(Debug)]
    struct Scalar(Param);

    impl Layer for Scalar {
        fn kind(&self) -> &'static str {
            "scalar"
        }
        fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
            Ok(input.clone())
        }
        fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
            Ok(g.clone())
        }
        fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
            Ok(input.to_vec())
        }
        fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
            f(prefix, &self.0)
        }
        fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
            f(prefix, &mut self.0)
        }
    }

    fn scalar(v: f64) -> Scalar {
        Scalar(Param::new(Tensor::full(&[1], v)))
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut lin = Linear::new(3, 2, &mut rng).unwrap();
        let before = lin.weight.value.clone();
        let mut adam = Adam::new(0.1);
        for _ in 0..3 {
            adam.step(&mut lin).unwrap();
        }
        assert_eq!(lin.weight.value, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = scalar(0.0);
        s.0.grad.fill(1.0);
        Adam::new(0.1).step(&mut s).unwrap();
        let want = -0.1 / (1.0 + 1e-8);
        assert!((s.0.value.data()[0] - want).abs() < 1e-12);
    }

    #[test]
    fn minimizes_square() {
        let mut s = scalar(1.0);
        let mut adam = Adam::new(0.1);
        for _ in 0..100 {
            let th = s.0.value.data()[0];
            s.0.grad.fill(2.0 * th);
            adam.step(&mut s).unwrap();
        }
        assert!(s.0.value.data()[0].abs() < 0.05, "{:?}", s.0.value);
        assert!(adam.moments_finite());
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = scalar(1.0);
        s.0.grad.fill(f64::NAN);
        match Adam::new(0.1).step(&mut s) {
            Err(Error::Numeric { layer, .. }) => assert_eq!(layer, ""),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.0.value.data()[0], 1.0);
    }

    #[test]
    fn moment_overflow_is_reported() {
        let mut s = scalar(1.0);
        s.0.grad.fill(1e300);
        assert!(matches!(Adam::new(0.1).step(&mut s), Err(Error::Numeric { .. })));
    }

    #[test]
    fn sgd_step() {
        let mut s = scalar(1.0);
        s.0.grad.fill(0.5);
        Sgd { lr: 0.2 }.step(&mut s).unwrap();
        assert!((s.0.value.data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn config_problems_are_collected() {
        let cfg = TrainConfig {
            epochs: 0,
            batch_size: 0,
            learning_rate: -1.0,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.problems().len(), 3);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let one = TrainConfig {
            batch_size: 1,
            ..TrainConfig::default()
        };
        let mut spec = ModelSpec::new(crate::models::Family::Ae);
        assert_eq!(one.problems_for(&spec).len(), 1);
        spec.batchnorm = false;
        assert!(one.problems_for(&spec).is_empty());
    }
}
