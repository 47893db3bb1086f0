use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// A batch loss: the scalar is the mean of the per-sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub value: f64,
    pub per_sample: Vec<f64>,
}

impl LossValue {
    fn from_per_sample(per_sample: Vec<f64>) -> Self {
        let value = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        Self { value, per_sample }
    }
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Per-sample mean of squared differences, then the mean over the batch.
pub fn mse_loss(prediction: &Tensor, target: &Tensor) -> Result<LossValue> {
    same_shape(prediction, target, "mse")?;
    let per_sample = prediction
        .rows()
        .zip(target.rows())
        .map(|(p, t)| {
            let sq: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            sq / p.len() as f64
        })
        .collect();
    Ok(LossValue::from_per_sample(per_sample))
}

/// Gradient of the scalar [`mse_loss`] with respect to the prediction.
pub fn mse_grad(prediction: &Tensor, target: &Tensor) -> Result<Tensor> {
    same_shape(prediction, target, "mse")?;
    let scale = 2.0 / prediction.len() as f64;
    let data = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| scale * (p - t))
        .collect();
    Tensor::new(prediction.shape(), data)
}

/// Closed-form KL divergence of `N(mu, exp(logvar))` from `N(0, 1)`, summed
/// over latent dimensions per sample; the scalar is the batch mean.
pub fn kl_divergence(mu: &Tensor, logvar: &Tensor) -> Result<LossValue> {
    same_shape(mu, logvar, "kl")?;
    let per_sample = mu
        .rows()
        .zip(logvar.rows())
        .map(|(m, lv)| {
            -0.5 * m
                .iter()
                .zip(lv)
                .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
                .sum::<f64>()
        })
        .collect();
    Ok(LossValue::from_per_sample(per_sample))
}

/// Gradients of the scalar [`kl_divergence`] with respect to `mu` and `logvar`.
pub fn kl_grad(mu: &Tensor, logvar: &Tensor) -> Result<(Tensor, Tensor)> {
    same_shape(mu, logvar, "kl")?;
    let batch = mu.dim(0) as f64;
    let dmu = mu.map(|m| m / batch);
    let dlv = logvar.map(|lv| 0.5 * (lv.exp() - 1.0) / batch);
    Ok((dmu, dlv))
}
