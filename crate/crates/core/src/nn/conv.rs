//! 1-D convolution (cross-correlation) and its transpose over
//! `[batch, channels, length]` tensors.

use rand::Rng;

use super::layer::{join, missing_cache, Ctx, Layer, Param};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `floor((len + 2 * padding - width) / stride) + 1`, or an error when the
/// window does not fit.
pub fn conv_output_len(len: usize, width: usize, stride: usize, padding: usize) -> Result<usize> {
    if width == 0 || stride == 0 {
        return Err(Error::config("convolution needs kernel width and stride >= 1"));
    }
    let padded = len + 2 * padding;
    if padded < width {
        return Err(Error::config(format!(
            "input length {len} with padding {padding} is shorter than kernel width {width}"
        )));
    }
    Ok((padded - width) / stride + 1)
}

/// `(len - 1) * stride - 2 * padding + width + output_padding`.
pub fn conv_transpose_output_len(
    len: usize,
    width: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
) -> Result<usize> {
    if width == 0 || stride == 0 || len == 0 {
        return Err(Error::config("transposed convolution needs nonzero sizes"));
    }
    if output_padding >= stride {
        return Err(Error::config(format!(
            "output_padding {output_padding} must be smaller than stride {stride}"
        )));
    }
    let full = (len - 1) * stride + width + output_padding;
    if full <= 2 * padding {
        return Err(Error::config("transposed convolution output would be empty"));
    }
    Ok(full - 2 * padding)
}

fn expect_3d(input: &Tensor, channels: usize, kind: &str) -> Result<(usize, usize)> {
    if input.ndim() != 3 || input.dim(1) != channels {
        return Err(Error::dim(format!(
            "{kind} expects [batch, {channels}, length], got {:?}",
            input.shape()
        )));
    }
    Ok((input.dim(0), input.dim(2)))
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    /// `[out_channels, in_channels, width]`
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        width: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || width == 0 || stride == 0 {
            return Err(Error::config("conv1d needs nonzero channels, width and stride"));
        }
        let bound = 1.0 / ((in_channels * width) as f64).sqrt();
        let weight = Tensor::uniform(&[out_channels, in_channels, width], bound, rng);
        let bias = Tensor::uniform(&[out_channels], bound, rng);
        Ok(Self::from_parts(weight, bias, stride, padding))
    }

    pub fn from_parts(weight: Tensor, bias: Tensor, stride: usize, padding: usize) -> Self {
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            stride,
            padding,
            input: None,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        let s = self.weight.value.shape();
        (s[0], s[1], s[2])
    }
}

impl Layer for Conv1d {
    fn kind(&self) -> &'static str {
        "conv1d"
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        let (c_out, c_in, width) = self.dims();
        let (batch, len) = expect_3d(input, c_in, "conv1d")?;
        let out_len = conv_output_len(len, width, self.stride, self.padding)?;
        let w = self.weight.value.data();
        let x = input.data();
        let mut y = vec![0.0; batch * c_out * out_len];
        for b in 0..batch {
            for co in 0..c_out {
                let yrow = &mut y[(b * c_out + co) * out_len..][..out_len];
                yrow.fill(self.bias.value.data()[co]);
                for ci in 0..c_in {
                    let xrow = &x[(b * c_in + ci) * len..][..len];
                    let krow = &w[(co * c_in + ci) * width..][..width];
                    for (t, acc) in yrow.iter_mut().enumerate() {
                        let start = (t * self.stride) as isize - self.padding as isize;
                        for (k, &wk) in krow.iter().enumerate() {
                            let pos = start + k as isize;
                            if pos >= 0 && (pos as usize) < len {
                                *acc += wk * xrow[pos as usize];
                            }
                        }
                    }
                }
            }
        }
        self.input = Some(input.clone());
        Tensor::new(&[batch, c_out, out_len], y)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("conv1d"))?;
        let (c_out, c_in, width) = self.dims();
        let (batch, len) = (x.dim(0), x.dim(2));
        let out_len = conv_output_len(len, width, self.stride, self.padding)?;
        grad_output.expect_shape(&[batch, c_out, out_len], "conv1d backward")?;
        let g = grad_output.data();
        let w = self.weight.value.data();
        let dw = self.weight.grad.data_mut();
        let mut dx = vec![0.0; x.len()];
        for b in 0..batch {
            for co in 0..c_out {
                let grow = &g[(b * c_out + co) * out_len..][..out_len];
                self.bias.grad.data_mut()[co] += grow.iter().sum::<f64>();
                for ci in 0..c_in {
                    let base = (b * c_in + ci) * len;
                    let kbase = (co * c_in + ci) * width;
                    for (t, &gt) in grow.iter().enumerate() {
                        let start = (t * self.stride) as isize - self.padding as isize;
                        for k in 0..width {
                            let pos = start + k as isize;
                            if pos >= 0 && (pos as usize) < len {
                                let p = base + pos as usize;
                                dw[kbase + k] += gt * x.data()[p];
                                dx[p] += gt * w[kbase + k];
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(x.shape(), dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (c_out, c_in, width) = self.dims();
        if input.len() != 2 || input[0] != c_in {
            return Err(Error::dim(format!(
                "conv1d expects [{c_in}, length] per sample, got {input:?}"
            )));
        }
        Ok(vec![c_out, conv_output_len(input[1], width, self.stride, self.padding)?])
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

/// Transposed 1-D convolution, the adjoint of [`Conv1d`] plus a bias.
#[derive(Debug, Clone)]
pub struct ConvTranspose1d {
    /// `[in_channels, out_channels, width]`
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    input: Option<Tensor>,
}

impl ConvTranspose1d {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        width: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || width == 0 || stride == 0 {
            return Err(Error::config(
                "conv_transpose1d needs nonzero channels, width and stride",
            ));
        }
        let bound = 1.0 / ((out_channels * width) as f64).sqrt();
        let weight = Tensor::uniform(&[in_channels, out_channels, width], bound, rng);
        let bias = Tensor::uniform(&[out_channels], bound, rng);
        Ok(Self::from_parts(weight, bias, stride, padding, output_padding))
    }

    pub fn from_parts(
        weight: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Self {
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            stride,
            padding,
            output_padding,
            input: None,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        let s = self.weight.value.shape();
        (s[0], s[1], s[2])
    }

    fn out_len(&self, len: usize) -> Result<usize> {
        conv_transpose_output_len(len, self.dims().2, self.stride, self.padding, self.output_padding)
    }
}

impl Layer for ConvTranspose1d {
    fn kind(&self) -> &'static str {
        "conv_transpose1d"
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        let (c_in, c_out, width) = self.dims();
        let (batch, len) = expect_3d(input, c_in, "conv_transpose1d")?;
        let out_len = self.out_len(len)?;
        let w = self.weight.value.data();
        let x = input.data();
        let mut y = vec![0.0; batch * c_out * out_len];
        for b in 0..batch {
            for co in 0..c_out {
                let yrow = &mut y[(b * c_out + co) * out_len..][..out_len];
                yrow.fill(self.bias.value.data()[co]);
                for ci in 0..c_in {
                    let xrow = &x[(b * c_in + ci) * len..][..len];
                    let krow = &w[(ci * c_out + co) * width..][..width];
                    for (i, &xi) in xrow.iter().enumerate() {
                        let start = (i * self.stride) as isize - self.padding as isize;
                        for (k, &wk) in krow.iter().enumerate() {
                            let j = start + k as isize;
                            if j >= 0 && (j as usize) < out_len {
                                yrow[j as usize] += xi * wk;
                            }
                        }
                    }
                }
            }
        }
        self.input = Some(input.clone());
        Tensor::new(&[batch, c_out, out_len], y)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let x = self.input.as_ref().ok_or_else(|| missing_cache("conv_transpose1d"))?;
        let (c_in, c_out, width) = self.dims();
        let (batch, len) = (x.dim(0), x.dim(2));
        let out_len = self.out_len(len)?;
        grad_output.expect_shape(&[batch, c_out, out_len], "conv_transpose1d backward")?;
        let g = grad_output.data();
        let w = self.weight.value.data();
        let dw = self.weight.grad.data_mut();
        let mut dx = vec![0.0; x.len()];
        for b in 0..batch {
            for co in 0..c_out {
                let grow = &g[(b * c_out + co) * out_len..][..out_len];
                self.bias.grad.data_mut()[co] += grow.iter().sum::<f64>();
                for ci in 0..c_in {
                    let base = (b * c_in + ci) * len;
                    let kbase = (ci * c_out + co) * width;
                    for i in 0..len {
                        let xi = x.data()[base + i];
                        let start = (i * self.stride) as isize - self.padding as isize;
                        let mut acc = 0.0;
                        for k in 0..width {
                            let j = start + k as isize;
                            if j >= 0 && (j as usize) < out_len {
                                let gj = grow[j as usize];
                                dw[kbase + k] += xi * gj;
                                acc += gj * w[kbase + k];
                            }
                        }
                        dx[base + i] += acc;
                    }
                }
            }
        }
        Tensor::new(x.shape(), dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (c_in, c_out, _) = self.dims();
        if input.len() != 2 || input[0] != c_in {
            return Err(Error::dim(format!(
                "conv_transpose1d expects [{c_in}, length] per sample, got {input:?}"
            )));
        }
        Ok(vec![c_out, self.out_len(input[1])?])
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

    fn conv(weight: Vec<f64>, shape: [usize; 3], stride: usize, padding: usize) -> Conv1d {
        let bias = Tensor::zeros(&[shape[0]]);
        Conv1d::from_parts(Tensor::new(&shape, weight).unwrap(), bias, stride, padding)
    }

    #[test]
    fn width_one_identity() {
        let mut c = conv(vec![1.0], [1, 1, 1], 1, 0);
        let x = Tensor::new(&[1, 1, 4], vec![1.0, -2.0, 3.0, 4.5]).unwrap();
        assert_eq!(c.forward(&x, &mut Ctx::eval()).unwrap(), x);
    }

    #[test]
    fn moving_average() {
        let mut c = conv(vec![0.5, 0.5], [1, 1, 2], 1, 0);
        let x = Tensor::new(&[1, 1, 3], vec![1.0, 3.0, 5.0]).unwrap();
        assert_eq!(c.forward(&x, &mut Ctx::eval()).unwrap().data(), &[2.0, 4.0]);
    }

    /// Independent sliding-window oracle with explicit zero padding.
    fn conv_oracle(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Vec<f64> {
        let (batch, c_in, len) = (x.dim(0), x.dim(1), x.dim(2));
        let (c_out, width) = (w.dim(0), w.dim(2));
        let padded_len = len + 2 * pad;
        let out_len = (padded_len - width) / stride + 1;
        let mut out = Vec::new();
        for s in 0..batch {
            for o in 0..c_out {
                for t in 0..out_len {
                    let mut acc = b.data()[o];
                    for i in 0..c_in {
                        let padded: Vec<f64> = (0..padded_len)
                            .map(|p| {
                                if p < pad || p >= pad + len {
                                    0.0
                                } else {
                                    x.data()[(s * c_in + i) * len + p - pad]
                                }
                            })
                            .collect();
                        for k in 0..width {
                            acc += w.data()[(o * c_in + i) * width + k] * padded[t * stride + k];
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn matches_sliding_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = Conv1d::new(2, 3, 3, 1, 1, &mut rng).unwrap();
        let x = Tensor::normal(&[2, 2, 10], 1.0, &mut rng);
        let y = c.forward(&x, &mut Ctx::eval()).unwrap();
        assert_eq!(y.shape(), &[2, 3, 10]);
        let want = conv_oracle(&x, &c.weight.value, &c.bias.value, 1, 1);
        for (a, b) in y.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn output_length_formula() {
        assert_eq!(conv_output_len(187, 5, 2, 2).unwrap(), 94);
        assert_eq!(conv_output_len(94, 5, 2, 2).unwrap(), 47);
        assert_eq!(conv_output_len(47, 5, 2, 2).unwrap(), 24);
        assert!(conv_output_len(2, 5, 1, 0).is_err());
        assert_eq!(conv_transpose_output_len(24, 5, 2, 2, 0).unwrap(), 47);
        assert_eq!(conv_transpose_output_len(47, 5, 2, 2, 1).unwrap(), 94);
        assert!(conv_transpose_output_len(4, 5, 2, 2, 2).is_err());
    }

    #[test]
    fn transpose_hand_expanded() {
        let w = Tensor::new(&[1, 1, 2], vec![1.0, 1.0]).unwrap();
        let mut ct = ConvTranspose1d::from_parts(w, Tensor::zeros(&[1]), 2, 0, 0);
        let x = Tensor::new(&[1, 1, 2], vec![1.0, 2.0]).unwrap();
        let y = ct.forward(&x, &mut Ctx::eval()).unwrap();
        assert_eq!(y.data(), &[1.0, 1.0, 2.0, 2.0]);

        let w1 = Tensor::new(&[1, 1, 1], vec![1.0]).unwrap();
        let mut id = ConvTranspose1d::from_parts(w1, Tensor::zeros(&[1]), 1, 0, 0);
        let x = Tensor::new(&[1, 1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        assert_eq!(id.forward(&x, &mut Ctx::eval()).unwrap(), x);
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for &(stride, pad, op, len) in &[(1, 0, 0, 9), (2, 2, 0, 24), (2, 2, 1, 47), (3, 1, 2, 7)] {
            let (c_a, c_b, width) = (3, 2, 5);
            // conv maps c_b channels -> c_a; the transpose maps c_a -> c_b
            let weight = Tensor::normal(&[c_a, c_b, width], 1.0, &mut rng);
            let mut ct = ConvTranspose1d::from_parts(weight.clone(), Tensor::zeros(&[c_b]), stride, pad, op);
            let mut cv = Conv1d::from_parts(weight, Tensor::zeros(&[c_a]), stride, pad);
            let x = Tensor::normal(&[2, c_a, len], 1.0, &mut rng);
            let up = ct.forward(&x, &mut Ctx::eval()).unwrap();
            let y = Tensor::normal(up.shape(), 1.0, &mut rng);
            let down = cv.forward(&y, &mut Ctx::eval()).unwrap();
            assert_eq!(down.shape(), x.shape());
            let lhs = down.dot(&x);
            let rhs = y.dot(&up);
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}
