use rand::Rng;

use super::activation::{Activation, Dropout};
use super::conv::{Conv1d, ConvTranspose1d};
use super::layer::{join, missing_cache, Ctx, Layer, Param};
use super::linear::Linear;
use super::norm::BatchNorm1d;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::splines::SplineGrid;

/// A named chain of layers.
#[derive(Debug, Default)]
pub struct Sequential {
    layers: Vec<(String, Box<dyn Layer>)>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, layer: impl Layer + 'static) {
        self.layers.push((name.into(), Box::new(layer)));
    }

    pub fn push_boxed(&mut self, name: impl Into<String>, layer: Box<dyn Layer>) {
        self.layers.push((name.into(), layer));
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn into_layers(self) -> Vec<(String, Box<dyn Layer>)> {
        self.layers
    }

    pub fn layers(&self) -> impl Iterator<Item = (&str, &dyn Layer)> {
        self.layers.iter().map(|(n, l)| (n.as_str(), l.as_ref()))
    }

    /// Run `output_shape` through the chain, naming the first layer whose
    /// input does not fit.
    pub fn check_shapes(&self, prefix: &str, input: &[usize]) -> Result<Vec<usize>> {
        let mut shape = input.to_vec();
        for (name, layer) in &self.layers {
            shape = layer.output_shape(&shape).map_err(|e| {
                Error::config(format!("layer {} ({}): {e}", join(prefix, name), layer.kind()))
            })?;
        }
        Ok(shape)
    }
}

impl Layer for Sequential {
    fn kind(&self) -> &'static str {
        "sequential"
    }

    fn forward(&mut self, input: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        let mut x = input.clone();
        for (_, layer) in self.layers.iter_mut() {
            x = layer.forward(&x, ctx)?;
        }
        Ok(x)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let mut g = grad_output.clone();
        for (_, layer) in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.check_shapes("", input)
    }

    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        for (name, layer) in &self.layers {
            layer.visit_params(&join(prefix, name), f);
        }
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        for (name, layer) in self.layers.iter_mut() {
            layer.visit_params_mut(&join(prefix, name), f);
        }
    }

    fn visit_buffers(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        for (name, layer) in &self.layers {
            layer.visit_buffers(&join(prefix, name), f);
        }
    }

    fn visit_buffers_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (name, layer) in self.layers.iter_mut() {
            layer.visit_buffers_mut(&join(prefix, name), f);
        }
    }

    fn visit_grids(&self, prefix: &str, f: &mut dyn FnMut(&str, &SplineGrid)) {
        for (name, layer) in &self.layers {
            layer.visit_grids(&join(prefix, name), f);
        }
    }

    fn regularize(&mut self) -> f64 {
        self.layers.iter_mut().map(|(_, l)| l.regularize()).sum()
    }
}

/// `[batch, d1, d2, ...]` to `[batch, d1 * d2 * ...]`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Layer for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        self.input_shape = Some(input.shape().to_vec());
        let batch = input.dim(0);
        input.clone().reshape(&[batch, input.len() / batch])
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.as_ref().ok_or_else(|| missing_cache("flatten"))?;
        grad_output.clone().reshape(shape)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }
}

/// `[batch, n]` to `[batch, shape...]` with `product(shape) == n`.
#[derive(Debug, Clone)]
pub struct Unflatten {
    shape: Vec<usize>,
}

impl Unflatten {
    pub fn new(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
        }
    }
}

impl Layer for Unflatten {
    fn kind(&self) -> &'static str {
        "unflatten"
    }

    fn forward(&mut self, input: &Tensor, _ctx: &mut Ctx) -> Result<Tensor> {
        let mut shape = vec![input.dim(0)];
        shape.extend_from_slice(&self.shape);
        input.clone().reshape(&shape)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let batch = grad_output.dim(0);
        grad_output.clone().reshape(&[batch, grad_output.len() / batch])
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let n: usize = self.shape.iter().product();
        if input != [n] {
            return Err(Error::dim(format!(
                "unflatten to {:?} needs [{n}] per sample, got {input:?}",
                self.shape
            )));
        }
        Ok(self.shape.clone())
    }
}

/// Normalization, activation and dropout toggles for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOptions {
    pub batchnorm: bool,
    pub activation: Activation,
    /// Dropout rate; 0 disables the dropout stage.
    pub dropout: f64,
}

/// `core -> [batchnorm] -> activation -> [dropout]`.
///
/// With a [`Linear`] core this is the dense block, with [`Conv1d`] or
/// [`ConvTranspose1d`] the convolutional blocks, and with a KAN layer the
/// KAN blocks.
#[derive(Debug)]
pub struct Block {
    core: Box<dyn Layer>,
    norm: Option<BatchNorm1d>,
    activation: Activation,
    dropout: Option<Dropout>,
    pre_activation: Option<(Tensor, Tensor)>,
}

impl Block {
    pub fn new(core: Box<dyn Layer>, norm_features: usize, opts: BlockOptions) -> Result<Self> {
        Ok(Self {
            core,
            norm: opts.batchnorm.then(|| BatchNorm1d::new(norm_features)),
            activation: opts.activation,
            dropout: if opts.dropout > 0.0 {
                Some(Dropout::new(opts.dropout)?)
            } else {
                None
            },
            pre_activation: None,
        })
    }

    pub fn core(&self) -> &dyn Layer {
        self.core.as_ref()
    }

    pub fn norm(&self) -> Option<&BatchNorm1d> {
        self.norm.as_ref()
    }

    pub fn norm_mut(&mut self) -> Option<&mut BatchNorm1d> {
        self.norm.as_mut()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout.as_ref().map_or(0.0, Dropout::rate)
    }
}

/// Dense block: linear map, optional batch norm, activation, optional dropout.
pub fn linear_block<R: Rng + ?Sized>(
    in_features: usize,
    out_features: usize,
    opts: BlockOptions,
    rng: &mut R,
) -> Result<Block> {
    let lin = Linear::new(in_features, out_features, rng)?;
    Block::new(Box::new(lin), out_features, opts)
}

/// Convolutional block over `[batch, channels, length]`.
pub fn conv_block<R: Rng + ?Sized>(
    in_channels: usize,
    out_channels: usize,
    width: usize,
    stride: usize,
    padding: usize,
    opts: BlockOptions,
    rng: &mut R,
) -> Result<Block> {
    let conv = Conv1d::new(in_channels, out_channels, width, stride, padding, rng)?;
    Block::new(Box::new(conv), out_channels, opts)
}

#[allow(clippy::too_many_arguments)]
pub fn conv_transpose_block<R: Rng + ?Sized>(
    in_channels: usize,
    out_channels: usize,
    width: usize,
    stride: usize,
    padding: usize,
    output_padding: usize,
    opts: BlockOptions,
    rng: &mut R,
) -> Result<Block> {
    let conv = ConvTranspose1d::new(
        in_channels,
        out_channels,
        width,
        stride,
        padding,
        output_padding,
        rng,
    )?;
    Block::new(Box::new(conv), out_channels, opts)
}

impl Layer for Block {
    fn kind(&self) -> &'static str {
        match self.core.kind() {
            "linear" => "linear_block",
            "conv1d" => "conv_block",
            "conv_transpose1d" => "conv_transpose_block",
            "kan_linear" => "kan_block",
            "kan_conv1d" => "kan_conv_block",
            _ => "block",
        }
    }

    fn forward(&mut self, input: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        let mut x = self.core.forward(input, ctx)?;
        if let Some(bn) = self.norm.as_mut() {
            x = bn.forward(&x, ctx)?;
        }
        let act = self.activation;
        let y = if act == Activation::Identity {
            x.clone()
        } else {
            x.map(|v| act.apply(v))
        };
        let out = match self.dropout.as_mut() {
            Some(d) => d.forward(&y, ctx)?,
            None => y.clone(),
        };
        out.check_finite(self.kind())?;
        self.pre_activation = Some((x, y));
        Ok(out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (x, y) = self
            .pre_activation
            .as_ref()
            .ok_or_else(|| missing_cache(self.kind()))?;
        let mut g = match self.dropout.as_mut() {
            Some(d) => d.backward(grad_output)?,
            None => grad_output.clone(),
        };
        g.expect_shape(x.shape(), "block backward")?;
        let act = self.activation;
        if act != Activation::Identity {
            for ((g, &x), &y) in g.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
                *g *= act.grad(x, y);
            }
        }
        if let Some(bn) = self.norm.as_mut() {
            g = bn.backward(&g)?;
        }
        self.core.backward(&g)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let out = self.core.output_shape(input)?;
        if let Some(bn) = &self.norm {
            bn.output_shape(&out)?;
        }
        Ok(out)
    }

    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        self.core.visit_params(prefix, f);
        if let Some(bn) = &self.norm {
            bn.visit_params(&join(prefix, "bn"), f);
        }
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        self.core.visit_params_mut(prefix, f);
        if let Some(bn) = self.norm.as_mut() {
            bn.visit_params_mut(&join(prefix, "bn"), f);
        }
    }

    fn visit_buffers(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.core.visit_buffers(prefix, f);
        if let Some(bn) = &self.norm {
            bn.visit_buffers(&join(prefix, "bn"), f);
        }
    }

    fn visit_buffers_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.core.visit_buffers_mut(prefix, f);
        if let Some(bn) = self.norm.as_mut() {
            bn.visit_buffers_mut(&join(prefix, "bn"), f);
        }
    }

    fn visit_grids(&self, prefix: &str, f: &mut dyn FnMut(&str, &SplineGrid)) {
        self.core.visit_grids(prefix, f);
    }

    fn regularize(&mut self) -> f64 {
        self.core.regularize()
    }
}
