//! The four autoencoder families and their optional variational head.
//!
//! Every model maps `[batch, n]` to `[batch, n]` through a `k`-wide latent
//! code. Convolutional families reshape to `[batch, 1, n]` internally.
//!
//! # Layouts
//!
//! With `w = kernel`, `s = stride`, `p = kernel / 2`, `h_1..h_m = hidden`
//! and `c_1..c_q = channels`:
//!
//! * **AE**: `n -> h_1 -> ... -> h_m` dense blocks, linear `h_m -> k`;
//!   decoder `k -> h_m -> ... -> h_1` dense blocks, linear `h_1 -> n`.
//! * **KAE**: as AE, but the first encoder block is a KAN block `n -> h_1`.
//! * **CAE**: conv blocks `1 -> c_1 -> ... -> c_q` (lengths
//!   `L_{i+1} = (L_i + 2p - w) / s + 1`), flatten to `F = c_q * L_q`,
//!   dense blocks over `hidden`, linear to `k`. The decoder mirrors the dense
//!   part, expands to `F` with a dense block, then transposed-conv blocks
//!   `c_q -> ... -> c_1` and a plain transposed conv `c_1 -> 1`.
//! * **KCAE**: as CAE with KAN convolutions in the encoder.
//!
//! Dense blocks use SiLU, conv blocks Tanh, KAN blocks no activation. All
//! hidden blocks carry batch norm and dropout per the `ModelSpec` flags; the latent
//! and output layers are plain.
//!
//! # Parameter counts
//!
//! With `D(a, b) = a*b + b`, `N(f) = 2f` when batch norm is on, and
//! `K(e) = e * (G + k_s + 1)` for `e` KAN edges on a grid with `G` intervals
//! and order `k_s`:
//!
//! * AE: `sum_i [D(h_{i-1}, h_i) + N(h_i)] + D(h_m, k)
//!   + sum_i [D(h_{i+1}, h_i) + N(h_i)] + D(h_1, n)` with `h_0 = n`,
//!   `h_{m+1} = k`.
//! * KAE: AE with `D(n, h_1)` replaced by `K(n * h_1)`.
//! * CAE: `sum_i [c_{i-1} c_i w + c_i + N(c_i)]` (with `c_0 = 1`) plus the
//!   dense part over `F`, plus `D(h_1, F) + N(F)`,
//!   `sum_{i>=2} [c_i c_{i-1} w + c_{i-1} + N(c_{i-1})]`, and `c_1 w + 1`.
//! * KCAE: CAE with each encoder conv `c_{i-1} c_i w + c_i` replaced by
//!   `K(c_{i-1} c_i w)`.
//! * Variational: add `D(h_m, k)` for the log-variance head.
//!
//! [`expected_param_count`] evaluates these; [`Model::param_count`] counts
//! the built tensors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kan::{KanConv1d, KanLinear};
use crate::nn::activation::Activation;
use crate::nn::blocks::{conv_block, conv_transpose_block, linear_block, Block, BlockOptions};
use crate::nn::conv::{conv_output_len, ConvTranspose1d};
use crate::nn::layer::{join, param_count, Ctx, Layer, Param};
use crate::nn::{Flatten, Linear, Sequential, Tensor, Unflatten};
use crate::splines::{GridParams, SplineGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ae,
    Kae,
    Cae,
    Kcae,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Ae, Family::Kae, Family::Cae, Family::Kcae];

    pub fn is_conv(self) -> bool {
        matches!(self, Family::Cae | Family::Kcae)
    }

    pub fn is_kan(self) -> bool {
        matches!(self, Family::Kae | Family::Kcae)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Family::Ae => "ae",
            Family::Kae => "kae",
            Family::Cae => "cae",
            Family::Kcae => "kcae",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag().to_uppercase())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ae" => Ok(Family::Ae),
            "kae" => Ok(Family::Kae),
            "cae" => Ok(Family::Cae),
            "kcae" => Ok(Family::Kcae),
            other => Err(Error::config(format!(
                "unknown model family {other:?} (expected ae, kae, cae or kcae)"
            ))),
        }
    }
}

/// Batch-norm and dropout settings for one named block, overriding the
/// spec-wide flags. Keys are block prefixes such as `encoder.1`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batchnorm: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub input_length: usize,
    pub latent_dim: usize,
    /// Dense widths between the input (or the flattened conv features) and
    /// the latent layer.
    pub hidden: Vec<usize>,
    /// Conv channels after the single input channel; conv families only.
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub grid: GridParams,
    pub batchnorm: bool,
    pub dropout: f64,
    pub variational: bool,
    /// Coefficient-difference penalty weight on KAN layers.
    pub smoothness: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, BlockOverride>,
}

impl ModelSpec {
    /// Default schedule for `family` on length-187 inputs with a 32-wide
    /// latent code.
    pub fn new(family: Family) -> Self {
        let (hidden, channels) = match family {
            Family::Ae => (vec![2048, 2048, 256], vec![]),
            Family::Kae => (vec![1536, 256], vec![]),
            Family::Cae => (vec![512], vec![16, 32, 64]),
            Family::Kcae => (vec![512], vec![8, 16, 32]),
        };
        Self {
            family,
            input_length: 187,
            latent_dim: 32,
            hidden,
            channels,
            kernel: 5,
            stride: 2,
            grid: GridParams::default(),
            batchnorm: true,
            dropout: 0.1,
            variational: false,
            smoothness: 0.0,
            overrides: BTreeMap::new(),
        }
    }

    pub fn padding(&self) -> usize {
        self.kernel / 2
    }

    /// Every problem with the spec, not only the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.input_length == 0 {
            out.push("model.input_length must be positive".to_string());
        }
        if self.latent_dim == 0 || self.latent_dim >= self.input_length {
            out.push(format!(
                "model.latent_dim must satisfy 0 < k < n (k = {}, n = {})",
                self.latent_dim, self.input_length
            ));
        }
        if self.hidden.contains(&0) {
            out.push("model.hidden widths must be positive".to_string());
        }
        if self.family.is_conv() {
            if self.channels.is_empty() || self.channels.contains(&0) {
                out.push("model.channels must be a nonempty list of positive counts".to_string());
            }
            if self.kernel == 0 || self.stride == 0 {
                out.push("model.kernel and model.stride must be positive".to_string());
            }
        }
        if self.family == Family::Kae && self.hidden.is_empty() {
            out.push("KAE needs at least one hidden width for its KAN block".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            out.push(format!("model.dropout must be in [0, 1), got {}", self.dropout));
        }
        for (name, o) in &self.overrides {
            if let Some(p) = o.dropout {
                if !(0.0..1.0).contains(&p) {
                    out.push(format!("override {name}: dropout must be in [0, 1), got {p}"));
                }
            }
        }
        if self.smoothness < 0.0 {
            out.push("model.smoothness must be nonnegative".to_string());
        }
        if self.family.is_kan() {
            if let Err(e) = SplineGrid::from_params(self.grid) {
                out.push(format!("model.grid: {e}"));
            }
        }
        out
    }

    fn flags(&self, name: &str) -> (bool, f64) {
        let o = self.overrides.get(name).copied().unwrap_or_default();
        (o.batchnorm.unwrap_or(self.batchnorm), o.dropout.unwrap_or(self.dropout))
    }

    fn block_opts(&self, name: &str, activation: Activation) -> BlockOptions {
        let (batchnorm, dropout) = self.flags(name);
        BlockOptions {
            batchnorm,
            activation,
            dropout,
        }
    }

    /// Sequence lengths after each encoder convolution, input first.
    pub fn conv_lengths(&self) -> Result<Vec<usize>> {
        let mut lens = vec![self.input_length];
        for _ in &self.channels {
            let l = *lens.last().expect("nonempty");
            lens.push(conv_output_len(l, self.kernel, self.stride, self.padding())?);
        }
        Ok(lens)
    }
}

/// Output of a variational forward pass.
#[derive(Debug, Clone)]
pub struct VaeOutput {
    pub reconstruction: Tensor,
    pub mu: Tensor,
    pub logvar: Tensor,
    pub z: Tensor,
}

/// How the reparameterization noise is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    /// Standard normal draws from the forward context.
    Sample,
    /// `eps = 0`, so `z = mu`; consumes no randomness.
    Zero,
}

#[derive(Debug, Clone)]
struct VaeCache {
    eps: Tensor,
    std: Tensor,
}

/// An instantiated autoencoder.
///
/// As a [`Layer`], `forward` is the deterministic path `decode(mu(x))`; the
/// sampled variational path is [`Model::forward_vae`].
#[derive(Debug)]
pub struct Model {
    spec: ModelSpec,
    encoder: Sequential,
    latent: Linear,
    logvar: Option<Linear>,
    decoder: Sequential,
    vae: Option<VaeCache>,
}

pub fn build(spec: &ModelSpec, seed: u64) -> Result<Model> {
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(Error::config(problems.join("; ")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.input_length;
    let k = spec.latent_dim;
    let grid = || SplineGrid::from_params(spec.grid);
    let mut enc = Sequential::new();
    let mut dec = Sequential::new();
    let name = |seq: &str, s: &Sequential| format!("{seq}.{}", s.len());

    let mut width;
    let mut conv_tail = None;
    if spec.family.is_conv() {
        let p = spec.padding();
        let lens = spec.conv_lengths().map_err(|e| Error::config(format!("encoder: {e}")))?;
        let mut ch = vec![1];
        ch.extend_from_slice(&spec.channels);
        enc.push(name("encoder", &enc), Unflatten::new(&[1, n]));
        for i in 0..spec.channels.len() {
            let nm = name("encoder", &enc);
            let block = if spec.family == Family::Kcae {
                let mut kc = KanConv1d::new(ch[i], ch[i + 1], spec.kernel, spec.stride, p, grid()?, &mut rng)?;
                kc.smoothness = spec.smoothness;
                Block::new(Box::new(kc), ch[i + 1], spec.block_opts(&nm, Activation::Identity))?
            } else {
                let opts = spec.block_opts(&nm, Activation::Tanh);
                conv_block(ch[i], ch[i + 1], spec.kernel, spec.stride, p, opts, &mut rng)?
            };
            enc.push(nm, block);
        }
        enc.push(name("encoder", &enc), Flatten::default());
        let q = spec.channels.len();
        width = ch[q] * lens[q];
        conv_tail = Some((ch, lens));
    } else {
        width = n;
    }

    for (i, &h) in spec.hidden.iter().enumerate() {
        let nm = name("encoder", &enc);
        let block = if spec.family == Family::Kae && i == 0 {
            let mut kl = KanLinear::new(width, h, grid()?, &mut rng)?;
            kl.smoothness = spec.smoothness;
            Block::new(Box::new(kl), h, spec.block_opts(&nm, Activation::Identity))?
        } else {
            linear_block(width, h, spec.block_opts(&nm, Activation::Silu), &mut rng)?
        };
        enc.push(nm, block);
        width = h;
    }
    let latent = Linear::new(width, k, &mut rng)?;
    let logvar = if spec.variational {
        Some(Linear::new(width, k, &mut rng)?)
    } else {
        None
    };

    let mut width = k;
    for &h in spec.hidden.iter().rev() {
        let nm = name("decoder", &dec);
        dec.push(nm.clone(), linear_block(width, h, spec.block_opts(&nm, Activation::Silu), &mut rng)?);
        width = h;
    }
    match conv_tail {
        Some((ch, lens)) => {
            let q = spec.channels.len();
            let features = ch[q] * lens[q];
            let nm = name("decoder", &dec);
            dec.push(nm.clone(), linear_block(width, features, spec.block_opts(&nm, Activation::Silu), &mut rng)?);
            dec.push(name("decoder", &dec), Unflatten::new(&[ch[q], lens[q]]));
            let p = spec.padding();
            for i in (1..=q).rev() {
                let nm = name("decoder", &dec);
                let op = output_padding(lens[i], lens[i - 1], spec.kernel, spec.stride, p)
                    .map_err(|e| Error::config(format!("layer {nm}: {e}")))?;
                if i > 1 {
                    let opts = spec.block_opts(&nm, Activation::Tanh);
                    let b = conv_transpose_block(ch[i], ch[i - 1], spec.kernel, spec.stride, p, op, opts, &mut rng)?;
                    dec.push(nm, b);
                } else {
                    let ct = ConvTranspose1d::new(ch[1], 1, spec.kernel, spec.stride, p, op, &mut rng)?;
                    dec.push(nm, ct);
                }
            }
            dec.push(name("decoder", &dec), Flatten::default());
        }
        None => {
            dec.push(name("decoder", &dec), Linear::new(width, n, &mut rng)?);
        }
    }

    // Sequential children were named with their full prefix for override
    // lookup; strip it so visit paths do not repeat it.
    let enc = rename(enc, "encoder.");
    let dec = rename(dec, "decoder.");

    let model = Model {
        spec: spec.clone(),
        encoder: enc,
        latent,
        logvar,
        decoder: dec,
        vae: None,
    };
    model.check_shapes()?;
    for key in spec.overrides.keys() {
        if !model.block_names().contains(key) {
            return Err(Error::config(format!("override names unknown block {key:?}")));
        }
    }
    Ok(model)
}

fn rename(seq: Sequential, prefix: &str) -> Sequential {
    let mut out = Sequential::new();
    for (name, layer) in seq.into_layers() {
        let short = name.strip_prefix(prefix).unwrap_or(&name).to_string();
        out.push_boxed(short, layer);
    }
    out
}

/// Output padding that makes a transposed convolution map `len_in` back to
/// `target`.
fn output_padding(len_in: usize, target: usize, width: usize, stride: usize, padding: usize) -> Result<usize> {
    let base = ((len_in - 1) * stride + width) as isize - 2 * padding as isize;
    let op = target as isize - base;
    if op < 0 || op >= stride as isize {
        return Err(Error::config(format!(
            "transposed convolution cannot map length {len_in} to {target} with width {width}, stride {stride}"
        )));
    }
    Ok(op as usize)
}

/// Closed-form parameter count of `spec`; see the module docs.
pub fn expected_param_count(spec: &ModelSpec) -> Result<usize> {
    let (n, k, w) = (spec.input_length, spec.latent_dim, spec.kernel);
    let d = |a: usize, b: usize| a * b + b;
    let bn = |name: &str, f: usize| if spec.flags(name).0 { 2 * f } else { 0 };
    let nb = spec.grid.grid_size + spec.grid.order - 1;
    let kan = |edges: usize| edges * (nb + 2);
    let mut total = 0;
    let mut idx = 0;
    let mut width = n;
    let mut conv = None;
    if spec.family.is_conv() {
        let lens = spec.conv_lengths()?;
        let mut ch = vec![1];
        ch.extend_from_slice(&spec.channels);
        idx = 1;
        for i in 1..ch.len() {
            let edges = ch[i - 1] * ch[i] * w;
            total += if spec.family == Family::Kcae {
                kan(edges)
            } else {
                edges + ch[i]
            };
            total += bn(&format!("encoder.{idx}"), ch[i]);
            idx += 1;
        }
        idx += 1;
        let q = ch.len() - 1;
        width = ch[q] * lens[q];
        conv = Some((ch, width));
    }
    for (i, &h) in spec.hidden.iter().enumerate() {
        total += if spec.family == Family::Kae && i == 0 {
            kan(width * h)
        } else {
            d(width, h)
        };
        total += bn(&format!("encoder.{idx}"), h);
        idx += 1;
        width = h;
    }
    total += d(width, k);
    if spec.variational {
        total += d(width, k);
    }
    let mut width = k;
    let mut idx = 0;
    for &h in spec.hidden.iter().rev() {
        total += d(width, h) + bn(&format!("decoder.{idx}"), h);
        idx += 1;
        width = h;
    }
    match conv {
        Some((ch, features)) => {
            total += d(width, features) + bn(&format!("decoder.{idx}"), features);
            idx += 2;
            for i in (2..ch.len()).rev() {
                total += ch[i] * ch[i - 1] * w + ch[i - 1] + bn(&format!("decoder.{idx}"), ch[i - 1]);
                idx += 1;
            }
            total += ch[1] * w + 1;
        }
        None => total += d(width, n),
    }
    Ok(total)
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        param_count(self)
    }

    pub fn is_variational(&self) -> bool {
        self.logvar.is_some()
    }

    pub fn encoder(&self) -> &Sequential {
        &self.encoder
    }

    pub fn decoder(&self) -> &Sequential {
        &self.decoder
    }

    /// Prefixes of every encoder and decoder child, e.g. `encoder.1`.
    pub fn block_names(&self) -> Vec<String> {
        let enc = self.encoder.layers().map(|(n, _)| join("encoder", n));
        let dec = self.decoder.layers().map(|(n, _)| join("decoder", n));
        enc.chain(dec).collect()
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.spec.input_length;
        let k = self.spec.latent_dim;
        let h = self.encoder.check_shapes("encoder", &[n])?;
        let z = self
            .latent
            .output_shape(&h)
            .map_err(|e| Error::config(format!("layer encoder.latent: {e}")))?;
        if z != [k] {
            return Err(Error::config(format!("encoder produces {z:?}, expected [{k}]")));
        }
        let out = self.decoder.check_shapes("decoder", &[k])?;
        if out != [n] {
            return Err(Error::config(format!(
                "decoder produces {out:?}, expected [{n}] to match the input"
            )));
        }
        Ok(())
    }

    /// Latent code (the mean for variational models), `[batch, k]`.
    pub fn encode(&mut self, x: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        let h = self.encoder.forward(x, ctx)?;
        self.latent.forward(&h, ctx)
    }

    /// Both variational heads, `(mu, logvar)`.
    pub fn encode_stats(&mut self, x: &Tensor, ctx: &mut Ctx) -> Result<(Tensor, Tensor)> {
        let head = self.logvar.as_mut().ok_or_else(not_variational)?;
        let h = self.encoder.forward(x, ctx)?;
        let lv = head.forward(&h, ctx)?;
        let mu = self.latent.forward(&h, ctx)?;
        Ok((mu, lv))
    }

    pub fn decode(&mut self, z: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        self.decoder.forward(z, ctx)
    }

    /// Reparameterized pass `z = mu + exp(logvar / 2) * eps`.
    pub fn forward_vae(&mut self, x: &Tensor, ctx: &mut Ctx, noise: Noise) -> Result<VaeOutput> {
        let (mu, logvar) = self.encode_stats(x, ctx)?;
        let eps = match noise {
            Noise::Sample => Tensor::normal(mu.shape(), 1.0, ctx.rng()),
            Noise::Zero => Tensor::zeros(mu.shape()),
        };
        let std = logvar.map(|lv| (0.5 * lv).exp());
        let z_data = mu
            .data()
            .iter()
            .zip(std.data())
            .zip(eps.data())
            .map(|((m, s), e)| m + s * e)
            .collect();
        let z = Tensor::new(mu.shape(), z_data)?;
        z.check_finite("latent sample")?;
        let reconstruction = self.decoder.forward(&z, ctx)?;
        self.vae = Some(VaeCache { eps, std });
        Ok(VaeOutput {
            reconstruction,
            mu,
            logvar,
            z,
        })
    }

    /// Backward pass of [`Model::forward_vae`]. `d_mu` and `d_logvar` are the
    /// direct gradients of any latent penalty (such as the KL term).
    pub fn backward_vae(&mut self, d_recon: &Tensor, d_mu: &Tensor, d_logvar: &Tensor) -> Result<Tensor> {
        let cache = self
            .vae
            .take()
            .ok_or_else(|| Error::state("backward_vae called before forward_vae"))?;
        let head = self.logvar.as_mut().ok_or_else(not_variational)?;
        let dz = self.decoder.backward(d_recon)?;
        let mut dmu = dz.clone();
        dmu.add_assign(d_mu)?;
        let dlv_data = dz
            .data()
            .iter()
            .zip(cache.eps.data())
            .zip(cache.std.data())
            .zip(d_logvar.data())
            .map(|(((g, e), s), extra)| g * e * 0.5 * s + extra)
            .collect();
        let dlv = Tensor::new(dz.shape(), dlv_data)?;
        let mut dh = self.latent.backward(&dmu)?;
        dh.add_assign(&head.backward(&dlv)?)?;
        self.encoder.backward(&dh)
    }

    /// Mutable access to the variational heads, `(mu, logvar)`.
    pub fn heads_mut(&mut self) -> (&mut Linear, Option<&mut Linear>) {
        (&mut self.latent, self.logvar.as_mut())
    }
}

fn not_variational() -> Error {
    Error::config("variational pass requested on a non-variational model")
}

impl Layer for Model {
    fn kind(&self) -> &'static str {
        "model"
    }

    fn forward(&mut self, input: &Tensor, ctx: &mut Ctx) -> Result<Tensor> {
        self.vae = None;
        let z = self.encode(input, ctx)?;
        self.decode(&z, ctx)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let dz = self.decoder.backward(grad_output)?;
        let dh = self.latent.backward(&dz)?;
        self.encoder.backward(&dh)
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let h = self.encoder.output_shape(input)?;
        let z = self.latent.output_shape(&h)?;
        self.decoder.output_shape(&z)
    }

    fn visit_params(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param)) {
        let enc = join(prefix, "encoder");
        self.encoder.visit_params(&enc, f);
        self.latent.visit_params(&join(&enc, "latent"), f);
        if let Some(h) = &self.logvar {
            h.visit_params(&join(&enc, "logvar"), f);
        }
        self.decoder.visit_params(&join(prefix, "decoder"), f);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param)) {
        let enc = join(prefix, "encoder");
        self.encoder.visit_params_mut(&enc, f);
        self.latent.visit_params_mut(&join(&enc, "latent"), f);
        if let Some(h) = self.logvar.as_mut() {
            h.visit_params_mut(&join(&enc, "logvar"), f);
        }
        self.decoder.visit_params_mut(&join(prefix, "decoder"), f);
    }

    fn visit_buffers(&self, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
        self.encoder.visit_buffers(&join(prefix, "encoder"), f);
        self.decoder.visit_buffers(&join(prefix, "decoder"), f);
    }

    fn visit_buffers_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.encoder.visit_buffers_mut(&join(prefix, "encoder"), f);
        self.decoder.visit_buffers_mut(&join(prefix, "decoder"), f);
    }

    fn visit_grids(&self, prefix: &str, f: &mut dyn FnMut(&str, &SplineGrid)) {
        self.encoder.visit_grids(&join(prefix, "encoder"), f);
    }

    fn regularize(&mut self) -> f64 {
        self.encoder.regularize()
    }
}
