use rand::Rng;

use super::layer::{join, missing_cache, Ctx, Layer, Param};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `C = alpha * A * B + beta * C` on row/column strided `f64` buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    debug_assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    debug_assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    debug_assert!(c.len() >= (m - 1) * rsc + n);
    // SAFETY: the asserted extents bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// Fully connected map `y = x W^T + b` over `[batch, in]` inputs.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Linear {
    /// Uniform fan-in initialization, bound `1 / sqrt(in)` for both weight and bias.
    pub fn new<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Result<Self> {
        if in_features == 0 || out_features == 0 {
            return Err(Error::config("linear layer needs nonzero widths"));
        }
        let bound = 1.0 / (in_features as f64).sqrt();
        let weight = Tensor::uniform(&[out_features, in_features], bound, rng);
        let bias = Tensor::uniform(&[out_features], bound, rng);
        Ok(Self::from_parts(weight, bias))
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Self {
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn out_features(&self) -> usize {
        self.weight.value.dim(0)
    }
}

impl Layer for Linear {
    fn kind(&self) -> &'static str {
        "linear"
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        let (n_in, n_out) = (self.in_features(), self.out_features());
        if input.ndim() != 2 || input.dim(1) != n_in {
            return Err(Error::dim(format!(
                "linear expects [batch, {n_in}], got {:?}",
                input.shape()
            )));
        }
        let batch = input.dim(0);
        let mut out = Vec::with_capacity(batch * n_out);
        for _ in 0..batch {
            out.extend_from_slice(self.bias.value.data());
        }
        gemm(
            batch,
            n_in,
            n_out,
            input.data(),
            (n_in, 1),
            self.weight.value.data(),
            (1, n_in),
            1.0,
            &mut out,
            n_out,
        );
        self.input = Some(input.clone());
        Tensor::new(&[batch, n_out], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("linear"))?;
        let (n_in, n_out) = (self.in_features(), self.out_features());
        let batch = x.dim(0);
        grad_output.expect_shape(&[batch, n_out], "linear backward")?;
        let g = grad_output.data();

        // dW += g^T x
        gemm(
            n_out,
            batch,
            n_in,
            g,
            (1, n_out),
            x.data(),
            (n_in, 1),
            1.0,
            self.weight.grad.data_mut(),
            n_in,
        );
        let db = self.bias.grad.data_mut();
        for row in g.chunks(n_out) {
            for (d, v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        // dx = g W
        let mut dx = vec![0.0; batch * n_in];
        gemm(
            batch,
            n_out,
            n_in,
            g,
            (n_out, 1),
            self.weight.value.data(),
            (n_in, 1),
            0.0,
            &mut dx,
            n_in,
        );
        Tensor::new(&[batch, n_in], dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.in_features()] {
            return Err(Error::dim(format!(
                "linear expects [{}] per sample, got {input:?}",
                self.in_features()
            )));
        }
        Ok(vec![self.out_features()])
    }

    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(x: &Tensor, w: &Tensor, b: &Tensor) -> Vec<f64> {
        let (batch, n_in, n_out) = (x.dim(0), x.dim(1), w.dim(0));
        let mut y = vec![0.0; batch * n_out];
        for s in 0..batch {
            for o in 0..n_out {
                let mut acc = b.data()[o];
                for i in 0..n_in {
                    acc += x.data()[s * n_in + i] * w.data()[o * n_in + i];
                }
                y[s * n_out + o] = acc;
            }
        }
        y
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lin = Linear::new(7, 5, &mut rng).unwrap();
        let x = Tensor::normal(&[4, 7], 1.0, &mut rng);
        let y = lin.forward(&x, &mut Ctx::eval()).unwrap();
        let want = naive(&x, &lin.weight.value, &lin.bias.value);
        for (a, b) in y.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_gradient_is_sum_of_outer_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut lin = Linear::new(3, 2, &mut rng).unwrap();
        let x = Tensor::normal(&[5, 3], 1.0, &mut rng);
        lin.forward(&x, &mut Ctx::eval()).unwrap();
        let ones = Tensor::full(&[5, 2], 1.0);
        let dx = lin.backward(&ones).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let want: f64 = (0..5).map(|s| x.data()[s * 3 + i]).sum();
                assert!((lin.weight.grad.data()[o * 3 + i] - want).abs() < 1e-12);
            }
            assert_eq!(lin.bias.grad.data()[o], 5.0);
        }
        for s in 0..5 {
            for i in 0..3 {
                let want: f64 = (0..2).map(|o| lin.weight.value.data()[o * 3 + i]).sum();
                assert!((dx.data()[s * 3 + i] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut lin = Linear::new(4, 3, &mut rng).unwrap();
        let x = Tensor::normal(&[2, 4], 1.0, &mut rng);
        lin.forward(&x, &mut Ctx::eval()).unwrap();
        let dx = lin.backward(&Tensor::zeros(&[2, 3])).unwrap();
        assert_eq!(dx.max_abs(), 0.0);
        assert_eq!(lin.weight.grad.max_abs(), 0.0);
        assert_eq!(lin.bias.grad.max_abs(), 0.0);
    }

    #[test]
    fn width_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut lin = Linear::new(4, 3, &mut rng).unwrap();
        assert!(matches!(
            lin.forward(&Tensor::zeros(&[2, 5]), &mut Ctx::eval()),
            Err(Error::Dimension(_))
        ));
    }
}
