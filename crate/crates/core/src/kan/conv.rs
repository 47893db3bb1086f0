use rand::Rng;

use super::{edge_backward, edge_value, init_bank, kan_prefix, smoothness, Edge, EdgeGrad, Point};
use crate::error::{Error, Result};
use crate::nn::conv::conv_output_len;
use crate::nn::layer::{join, missing_cache, Ctx, Layer, Param};
use crate::nn::tensor::Tensor;
use crate::splines::SplineGrid;

/// 1-D KAN convolution `[batch, C_in, L] -> [batch, C_out, L_out]`.
///
/// Each `(c_out, c_in, tap)` triple owns one edge function. Window positions
/// that fall into the zero padding are skipped and contribute nothing.
#[derive(Debug, Clone)]
pub struct KanConv1d {
    grid: SplineGrid,
    /// `[C_out, C_in, width, B]`
    pub spline_coeffs: Param,
    /// `[C_out, C_in, width]`
    pub base_weights: Param,
    /// `[C_out, C_in, width]`
    pub scales: Param,
    pub stride: usize,
    pub padding: usize,
    pub smoothness: f64,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    batch: usize,
    len: usize,
    points: Vec<Point>,
}

impl KanConv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        width: usize,
        stride: usize,
        padding: usize,
        grid: SplineGrid,
        rng: &mut R,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::config("kan_conv1d needs stride >= 1"));
        }
        let shape = [out_channels, in_channels, width];
        let (c, b, s) = init_bank(&shape, in_channels * width, &grid, rng)?;
        Self::from_parts(grid, c, b, s, stride, padding)
    }

    pub fn from_parts(
        grid: SplineGrid,
        coeffs: Tensor,
        base: Tensor,
        scales: Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let dims = match base.shape() {
            [o, i, w] => [*o, *i, *w],
            s => return Err(Error::dim(format!("kan_conv1d base weights must be 3-D, got {s:?}"))),
        };
        coeffs.expect_shape(&[dims[0], dims[1], dims[2], grid.num_basis()], "kan_conv1d spline_coeffs")?;
        scales.expect_shape(&dims, "kan_conv1d scales")?;
        Ok(Self {
            grid,
            spline_coeffs: Param::new(coeffs),
            base_weights: Param::new(base),
            scales: Param::new(scales),
            stride,
            padding,
            smoothness: 0.0,
            cache: None,
        })
    }

    pub fn grid(&self) -> &SplineGrid {
        &self.grid
    }

    /// `(C_out, C_in, width)`
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.base_weights.value.shape();
        (s[0], s[1], s[2])
    }

}

/// Input position read by output position `t` through tap `k`, if it lies
/// inside the sequence.
#[inline]
fn source(t: usize, k: usize, stride: usize, padding: usize, len: usize) -> Option<usize> {
    let pos = (t * stride + k).checked_sub(padding)?;
    (pos < len).then_some(pos)
}

impl Layer for KanConv1d {
    fn kind(&self) -> &'static str {
        "kan_conv1d"
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        let (c_out, c_in, width) = self.dims();
        if input.ndim() != 3 || input.dim(1) != c_in {
            return Err(Error::dim(format!(
                "kan_conv1d expects [batch, {c_in}, length], got {:?}",
                input.shape()
            )));
        }
        let (batch, len) = (input.dim(0), input.dim(2));
        let out_len = conv_output_len(len, width, self.stride, self.padding)?;
        let order = self.grid.order();
        let nb = self.grid.num_basis();
        let points: Vec<Point> = input.data().iter().map(|&x| Point::new(&self.grid, x)).collect();
        let c = self.spline_coeffs.value.data();
        let bw = self.base_weights.value.data();
        let sc = self.scales.value.data();

        let mut y = vec![0.0; batch * c_out * out_len];
        for b in 0..batch {
            for co in 0..c_out {
                for t in 0..out_len {
                    let mut acc = 0.0;
                    for ci in 0..c_in {
                        let pts = &points[(b * c_in + ci) * len..][..len];
                        for k in 0..width {
                            let Some(pos) = source(t, k, self.stride, self.padding, len) else {
                                continue;
                            };
                            let e = (co * c_in + ci) * width + k;
                            let edge = Edge {
                                coeffs: &c[e * nb..][..nb],
                                base: bw[e],
                                scale: sc[e],
                            };
                            acc += edge_value(&pts[pos], &edge, order);
                        }
                    }
                    y[(b * c_out + co) * out_len + t] = acc;
                }
            }
        }
        let out = Tensor::new(&[batch, c_out, out_len], y)?;
        out.check_finite(self.kind())?;
        self.cache = Some(Cache { batch, len, points });
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_cache("kan_conv1d"))?;
        let (c_out, c_in, width) = self.dims();
        let (batch, len) = (cache.batch, cache.len);
        let out_len = conv_output_len(len, width, self.stride, self.padding)?;
        grad_output.expect_shape(&[batch, c_out, out_len], "kan_conv1d backward")?;
        let order = self.grid.order();
        let nb = self.grid.num_basis();
        let c = self.spline_coeffs.value.data();
        let bw = self.base_weights.value.data();
        let sc = self.scales.value.data();
        let dc = self.spline_coeffs.grad.data_mut();
        let dbw = self.base_weights.grad.data_mut();
        let dsc = self.scales.grad.data_mut();
        let g = grad_output.data();
        let (stride, padding) = (self.stride, self.padding);

        let mut dx = vec![0.0; batch * c_in * len];
        for b in 0..batch {
            for co in 0..c_out {
                for t in 0..out_len {
                    let gt = g[(b * c_out + co) * out_len + t];
                    if gt == 0.0 {
                        continue;
                    }
                    for ci in 0..c_in {
                        let row = (b * c_in + ci) * len;
                        for k in 0..width {
                            let Some(pos) = source(t, k, stride, padding, len) else {
                                continue;
                            };
                            let e = (co * c_in + ci) * width + k;
                            let edge = Edge {
                                coeffs: &c[e * nb..][..nb],
                                base: bw[e],
                                scale: sc[e],
                            };
                            let (dbe, dse) = (&mut dbw[e], &mut dsc[e]);
                            let grad = EdgeGrad {
                                coeffs: &mut dc[e * nb..][..nb],
                                base: dbe,
                                scale: dse,
                            };
                            dx[row + pos] += edge_backward(&cache.points[row + pos], &edge, grad, gt, order);
                        }
                    }
                }
            }
        }
        Tensor::new(&[batch, c_in, len], dx)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (c_out, c_in, width) = self.dims();
        if input.len() != 2 || input[0] != c_in {
            return Err(Error::dim(format!(
                "kan_conv1d expects [{c_in}, length] per sample, got {input:?}"
            )));
        }
        Ok(vec![c_out, conv_output_len(input[1], width, self.stride, self.padding)?])
    }

    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        let p = kan_prefix(prefix);
        f(&join(&p, "spline_coeffs"), &self.spline_coeffs);
        f(&join(&p, "base_weights"), &self.base_weights);
        f(&join(&p, "scales"), &self.scales);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        let p = kan_prefix(prefix);
        f(&join(&p, "spline_coeffs"), &mut self.spline_coeffs);
        f(&join(&p, "base_weights"), &mut self.base_weights);
        f(&join(&p, "scales"), &mut self.scales);
    }

    fn visit_grids(&self, prefix: &str, f: &mut dyn FnMut(&str, &SplineGrid)) {
        f(&kan_prefix(prefix), &self.grid);
    }

    fn regularize(&mut self) -> f64 {
        if self.smoothness == 0.0 {
            return 0.0;
        }
        let nb = self.grid.num_basis();
        smoothness(&self.spline_coeffs.value, &mut self.spline_coeffs.grad, nb, self.smoothness)
    }
}
