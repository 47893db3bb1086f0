use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{missing_cache, Ctx, Layer};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Identity,
    Silu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Silu => silu(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    #[inline]
    pub fn grad(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Silu => silu_grad(x),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Pointwise activation as a standalone layer.
#[derive(Debug, Clone)]
pub struct ActivationLayer {
    pub activation: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl ActivationLayer {
    pub fn new(activation: Activation) -> Self {
        Self {
            activation,
            cache: None,
        }
    }
}

impl Layer for ActivationLayer {
    fn kind(&self) -> &'static str {
        match self.activation {
            Activation::Identity => "identity",
            Activation::Silu => "silu",
            Activation::Tanh => "tanh",
        }
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        let act = self.activation;
        let out = input.map(|v| act.apply(v));
        self.cache = Some((input.clone(), out.clone()));
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (x, y) = self.cache.as_ref().ok_or_else(|| missing_cache(self.kind()))?;
        grad_output.expect_shape(x.shape(), self.kind())?;
        let act = self.activation;
        let mut g = grad_output.clone();
        for ((g, &x), &y) in g.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
            *g *= act.grad(x, y);
        }
        Ok(g)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }
}

/// Inverted dropout: in training mode each entry is zeroed with probability
/// `p` and survivors are scaled by `1 / (1 - p)`. Identity in evaluation.
#[derive(Debug, Clone)]
pub struct Dropout {
    p: f64,
    mask: Option<Option<Vec<f64>>>,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("dropout rate must lie in [0, 1), got {p}")));
        }
        Ok(Self { p, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.p
    }
}

impl Layer for Dropout {
    fn kind(&self) -> &'static str {
        "dropout"
    }

    fn forward(&mut self, input: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        if !ctx.is_training() || self.p == 0.0 {
            self.mask = Some(None);
            return Ok(input.clone());
        }
        let keep = 1.0 / (1.0 - self.p);
        let rng = ctx.rng();
        let mask: Vec<f64> = (0..input.len())
            .map(|_| if rng.random::<f64>() < self.p { 0.0 } else { keep })
            .collect();
        let mut out = input.clone();
        for (o, m) in out.data_mut().iter_mut().zip(&mask) {
            *o *= m;
        }
        self.mask = Some(Some(mask));
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        match self.mask.as_ref().ok_or_else(|| missing_cache("dropout"))? {
            None => Ok(grad_output.clone()),
            Some(mask) => {
                if mask.len() != grad_output.len() {
                    return Err(Error::dim("dropout: gradient size differs from forward"));
                }
                let mut g = grad_output.clone();
                for (g, m) in g.data_mut().iter_mut().zip(mask) {
                    *g *= m;
                }
                Ok(g)
            }
        }
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn silu_at_one() {
        let oracle = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((silu(1.0) - oracle).abs() < 1e-15);
        assert!((silu(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert_eq!(silu(0.0), 0.0);
        // far tails stay finite
        assert!(silu(-800.0).is_finite() && silu(800.0) == 800.0);
    }

    #[test]
    fn silu_grad_matches_difference_quotient() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((silu_grad(x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn dropout_zero_rate_is_identity() {
        let x = Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.25, 9.0]).unwrap();
        let mut d = Dropout::new(0.0).unwrap();
        let mut train = Ctx::train(ChaCha8Rng::seed_from_u64(1));
        assert_eq!(d.forward(&x, &mut train).unwrap(), x);
        assert_eq!(d.forward(&x, &mut Ctx::eval()).unwrap(), x);
    }

    #[test]
    fn dropout_rejects_bad_rate() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        for &p in &[0.1, 0.5] {
            let mut d = Dropout::new(p).unwrap();
            let mut ctx = Ctx::train(ChaCha8Rng::seed_from_u64(42));
            let ones = Tensor::full(&[1, 1], 1.0);
            let trials = 10_000;
            let total: f64 = (0..trials)
                .map(|_| d.forward(&ones, &mut ctx).unwrap().data()[0])
                .sum();
            let mean = total / trials as f64;
            assert!((mean - 1.0).abs() < 0.02, "p={p}: mean {mean}");
        }
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut d = Dropout::new(0.1).unwrap();
        assert!(matches!(
            d.backward(&Tensor::zeros(&[1, 1])),
            Err(Error::State(_))
        ));
    }
}
