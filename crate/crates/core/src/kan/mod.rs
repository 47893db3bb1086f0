//! KAN layers: every edge `j -> i` carries a learnable univariate function
//!
//! ```text
//! psi_ij(x) = scale_ij * (base_ij * silu(x) + spline_ij(x))
//! ```
//!
//! and node `i` outputs `phi(sum_j psi_ij(x_j))`. [`KanLinear`] is the dense
//! form, [`KanConv1d`] slides a window of edge functions along a sequence.
//! Both layers evaluate edges through the same helpers and in the same
//! summation order, so a width-1 convolution equals the dense layer bit for
//! bit.

mod conv;
mod linear;

pub use conv::KanConv1d;
pub use linear::KanLinear;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::activation::{silu, silu_grad};
use crate::nn::tensor::Tensor;
use crate::splines::{LocalBasis, SplineGrid};

/// Parameters of one KAN layer with `edges` edge functions.
pub fn kan_param_count(edges: usize, grid: &SplineGrid) -> usize {
    edges * (grid.num_basis() + 2)
}

/// Everything an edge needs about one input value, computed once per input
/// element and shared by every edge reading it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Point {
    basis: LocalBasis,
    silu: f64,
    dsilu: f64,
}

impl Point {
    pub(crate) fn new(grid: &SplineGrid, x: f64) -> Self {
        Self {
            basis: grid.local_basis(x),
            silu: silu(x),
            dsilu: silu_grad(x),
        }
    }
}

/// One edge's coefficient row plus its base weight and scale.
pub(crate) struct Edge<'a> {
    pub coeffs: &'a [f64],
    pub base: f64,
    pub scale: f64,
}

pub(crate) struct EdgeGrad<'a> {
    pub coeffs: &'a mut [f64],
    pub base: &'a mut f64,
    pub scale: &'a mut f64,
}

#[inline]
pub(crate) fn edge_value(p: &Point, e: &Edge, order: usize) -> f64 {
    e.scale * (e.base * p.silu + p.basis.dot(e.coeffs, order))
}

/// Accumulate the parameter gradients of one edge for upstream `g` and
/// return its contribution to the input gradient.
#[inline]
pub(crate) fn edge_backward(p: &Point, e: &Edge, d: EdgeGrad, g: f64, order: usize) -> f64 {
    let lb = &p.basis;
    let spline = lb.dot(e.coeffs, order);
    let gs = g * e.scale;
    let dc = &mut d.coeffs[lb.first..lb.first + order];
    for r in 0..order {
        dc[r] += gs * lb.values[r];
    }
    *d.base += gs * p.silu;
    *d.scale += g * (e.base * p.silu + spline);
    let dspline = if lb.clamped {
        0.0
    } else {
        lb.dot_derivs(e.coeffs, order)
    };
    gs * (e.base * p.dsilu + dspline)
}

/// Initial values for `edges` edges with fan-in `fan_in`: spline
/// coefficients from `N(0, 0.1 / sqrt(B))`, base weights uniform in
/// `+-1/sqrt(fan_in)`, scales one.
pub(crate) fn init_bank<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    grid: &SplineGrid,
    rng: &mut R,
) -> Result<(Tensor, Tensor, Tensor)> {
    if shape.contains(&0) || fan_in == 0 {
        return Err(Error::config(format!("KAN layer with zero-width shape {shape:?}")));
    }
    let b = grid.num_basis();
    let mut cshape = shape.to_vec();
    cshape.push(b);
    let coeffs = Tensor::normal(&cshape, 0.1 / (b as f64).sqrt(), rng);
    let base = Tensor::uniform(shape, 1.0 / (fan_in as f64).sqrt(), rng);
    let scales = Tensor::full(shape, 1.0);
    Ok((coeffs, base, scales))
}

/// `sum over edges and b of (c[b+1] - c[b])^2`, with its gradient added to
/// `grad`.
pub(crate) fn smoothness(coeffs: &Tensor, grad: &mut Tensor, nb: usize, weight: f64) -> f64 {
    let mut total = 0.0;
    let g = grad.data_mut();
    for (e, row) in coeffs.data().chunks_exact(nb).enumerate() {
        for b in 0..nb - 1 {
            let d = row[b + 1] - row[b];
            total += d * d;
            g[e * nb + b + 1] += 2.0 * weight * d;
            g[e * nb + b] -= 2.0 * weight * d;
        }
    }
    weight * total
}

/// Dotted tensor prefix for a KAN layer registered under `prefix`.
pub(crate) fn kan_prefix(prefix: &str) -> String {
    if prefix.is_empty() {
        "kan".to_string()
    } else {
        format!("kan.{prefix}")
    }
}
