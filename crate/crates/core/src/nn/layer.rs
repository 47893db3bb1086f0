use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;
use crate::error::Result;
use crate::splines::SplineGrid;

/// Forward-pass context: training/evaluation mode plus the random stream
/// consumed by dropout and variational sampling.
#[derive(Debug, Clone)]
pub struct Ctx {
    training: bool,
    rng: ChaCha8Rng,
}

impl Ctx {
    pub fn train(rng: ChaCha8Rng) -> Self {
        Self { training: true, rng }
    }

    pub fn eval() -> Self {
        Self {
            training: false,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros_like(&value);
        Self { value, grad }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Forward/backward contract shared by every layer.
///
/// `forward` caches whatever `backward` needs; `backward` accumulates into
/// the parameter gradients and returns the gradient with respect to the
/// input of the most recent `forward`. Calling `backward` first is a
/// state error.
pub trait Layer: Send + fmt::Debug {
    fn kind(&self) -> &'static str;

    fn forward(&mut self, input: &Tensor, ctx: &mut Ctx) -> Result<Tensor>;

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;

    /// Per-sample output shape for a per-sample input shape (batch axis
    /// excluded); used to validate architectures before any data flows.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn visit_params(&self, _prefix: &str, _f: &mut dyn FnMut(&str, &Param)) {}

    fn visit_params_mut(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, &mut Param)) {}

    /// Non-trainable state, such as batch-norm running statistics.
    fn visit_buffers(&self, _prefix: &str, _f: &mut dyn FnMut(&str, &Tensor)) {}

    fn visit_buffers_mut(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, &mut Tensor)) {}

    fn visit_grids(&self, _prefix: &str, _f: &mut dyn FnMut(&str, &SplineGrid)) {}

    /// Add the gradient of any parameter penalty to the accumulated
    /// gradients and return the penalty value.
    fn regularize(&mut self) -> f64 {
        0.0
    }
}

pub fn param_count(layer: &dyn Layer) -> usize {
    let mut n = 0;
    layer.visit_params("", &mut |_, p| n += p.value.len());
    n
}

pub fn zero_grad(layer: &mut dyn Layer) {
    layer.visit_params_mut("", &mut |_, p| p.grad.fill(0.0));
}

pub fn param_names(layer: &dyn Layer) -> Vec<String> {
    let mut names = Vec::new();
    layer.visit_params("", &mut |n, _| names.push(n.to_string()));
    names
}

/// Snapshot of every parameter value, in visit order.
pub fn param_values(layer: &dyn Layer) -> Vec<Tensor> {
    let mut out = Vec::new();
    layer.visit_params("", &mut |_, p| out.push(p.value.clone()));
    out
}

pub(crate) fn missing_cache(kind: &str) -> crate::error::Error {
    crate::error::Error::state(format!("{kind}: backward called before forward"))
}
