use super::layer::{join, missing_cache, Ctx, Layer, Param};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-feature batch normalization for `[batch, features]` or
/// `[batch, channels, length]` inputs. Statistics are taken over every axis
/// except the feature/channel axis.
///
/// Running variance tracks the biased (population) batch variance, the same
/// quantity used for normalization in training mode.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    shape: Vec<usize>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    training: bool,
}

/// `(outer, features, inner)` strides of a batch-norm input.
fn layout(shape: &[usize], features: usize) -> Result<(usize, usize)> {
    match shape {
        [b, f] if *f == features => Ok((*b, 1)),
        [b, c, l] if *c == features => Ok((*b, *l)),
        _ => Err(Error::dim(format!(
            "batchnorm over {features} features cannot take shape {shape:?}"
        ))),
    }
}

impl BatchNorm1d {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::full(&[features], 1.0)),
            beta: Param::new(Tensor::zeros(&[features])),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], 1.0),
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.value.len()
    }
}

impl Layer for BatchNorm1d {
    fn kind(&self) -> &'static str {
        "batchnorm"
    }

    fn forward(&mut self, input: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        let nf = self.features();
        let (batch, inner) = layout(input.shape(), nf)?;
        let training = ctx.is_training();
        if training && batch < 2 {
            return Err(Error::config(
                "batchnorm in training mode needs a batch of at least 2 samples",
            ));
        }
        let x = input.data();
        let count = (batch * inner) as f64;
        let idx = |b: usize, f: usize, i: usize| (b * nf + f) * inner + i;
        let mut y = vec![0.0; x.len()];
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; nf];
        for f in 0..nf {
            let (mean, var) = if training {
                let mut sum = 0.0;
                for b in 0..batch {
                    for i in 0..inner {
                        sum += x[idx(b, f, i)];
                    }
                }
                let mean = sum / count;
                let mut sq = 0.0;
                for b in 0..batch {
                    for i in 0..inner {
                        let d = x[idx(b, f, i)] - mean;
                        sq += d * d;
                    }
                }
                let var = sq / count;
                let rm = &mut self.running_mean.data_mut()[f];
                *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * mean;
                let rv = &mut self.running_var.data_mut()[f];
                *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * var;
                (mean, var)
            } else {
                (self.running_mean.data()[f], self.running_var.data()[f])
            };
            let is = 1.0 / (var + BN_EPS).sqrt();
            inv_std[f] = is;
            let (g, be) = (self.gamma.value.data()[f], self.beta.value.data()[f]);
            for b in 0..batch {
                for i in 0..inner {
                    let k = idx(b, f, i);
                    let h = (x[k] - mean) * is;
                    xhat[k] = h;
                    y[k] = g * h + be;
                }
            }
        }
        self.cache = Some(Cache {
            shape: input.shape().to_vec(),
            xhat,
            inv_std,
            training,
        });
        Tensor::new(input.shape(), y)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache("batchnorm"))?;
        grad_output.expect_shape(&cache.shape, "batchnorm backward")?;
        let nf = self.features();
        let (batch, inner) = layout(&cache.shape, nf)?;
        let count = (batch * inner) as f64;
        let idx = |b: usize, f: usize, i: usize| (b * nf + f) * inner + i;
        let g = grad_output.data();
        let mut dx = vec![0.0; g.len()];
        for f in 0..nf {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for b in 0..batch {
                for i in 0..inner {
                    let k = idx(b, f, i);
                    sum_g += g[k];
                    sum_gx += g[k] * cache.xhat[k];
                }
            }
            self.gamma.grad.data_mut()[f] += sum_gx;
            self.beta.grad.data_mut()[f] += sum_g;
            let gamma = self.gamma.value.data()[f];
            let is = cache.inv_std[f];
            for b in 0..batch {
                for i in 0..inner {
                    let k = idx(b, f, i);
                    dx[k] = if cache.training {
                        gamma * is * (g[k] - sum_g / count - cache.xhat[k] * sum_gx / count)
                    } else {
                        gamma * is * g[k]
                    };
                }
            }
        }
        Tensor::new(&cache.shape, dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut with_batch = vec![1];
        with_batch.extend_from_slice(input);
        layout(&with_batch, self.features())?;
        Ok(input.to_vec())
    }

    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        f(&join(prefix, "gamma"), &self.gamma);
        f(&join(prefix, "beta"), &self.beta);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&join(prefix, "gamma"), &mut self.gamma);
        f(&join(prefix, "beta"), &mut self.beta);
    }

    fn visit_buffers(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        f(&join(prefix, "running_mean"), &self.running_mean);
        f(&join(prefix, "running_var"), &self.running_var);
    }

    fn visit_buffers_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }
}
