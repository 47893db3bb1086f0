//! Uniform B-spline bases on a clamped evaluation range.
//!
//! A [`SplineGrid`] of order `k` (degree `k - 1`) with `G` intervals over
//! `[range_min, range_max]` carries `G + 2k - 1` uniformly spaced knots: the
//! `G + 1` interior knots plus `k - 1` extension knots beyond each end. This
//! yields `B = G + k - 1` basis functions, all of which are active somewhere
//! inside the range, and their sum is exactly one on the whole range.
//!
//! Inputs outside the range are clamped to the nearest boundary, so every
//! spline is constant outside `[range_min, range_max]`.
//!
//! Evaluation only touches the `k` basis functions whose support contains
//! `x` (see [`LocalBasis`]); the dense [`SplineGrid::basis_eval`] and
//! [`SplineGrid::basis_derivative`] are conveniences built on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported spline order (degree 7).
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridParams", into = "GridParams")]
pub struct SplineGrid {
    order: usize,
    grid_size: usize,
    range_min: f64,
    range_max: f64,
    step: f64,
    knots: Vec<f64>,
}

/// The four numbers that fully determine a [`SplineGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub order: usize,
    pub grid_size: usize,
    pub range_min: f64,
    pub range_max: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            order: 4,
            grid_size: 5,
            range_min: -2.0,
            range_max: 2.0,
        }
    }
}

impl TryFrom<GridParams> for SplineGrid {
    type Error = Error;

    fn try_from(p: GridParams) -> Result<Self> {
        SplineGrid::new(p.order, p.grid_size, p.range_min, p.range_max)
    }
}

impl From<SplineGrid> for GridParams {
    fn from(g: SplineGrid) -> Self {
        g.params()
    }
}

/// The `k` basis functions that may be nonzero at one point.
///
/// `values[r]` and `derivs[r]` belong to basis function `first + r`, for
/// `r < order`. Entries past `order` are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBasis {
    pub first: usize,
    pub values: [f64; MAX_ORDER],
    pub derivs: [f64; MAX_ORDER],
    /// Whether the input lay strictly outside the range and was clamped.
    pub clamped: bool,
}

impl SplineGrid {
    pub fn new(order: usize, grid_size: usize, range_min: f64, range_max: f64) -> Result<Self> {
        if !(2..=MAX_ORDER).contains(&order) {
            return Err(Error::config(format!(
                "spline order must lie in [2, {MAX_ORDER}], got {order}"
            )));
        }
        if grid_size == 0 {
            return Err(Error::config("spline grid_size must be at least 1"));
        }
        if !(range_min.is_finite() && range_max.is_finite()) || range_min >= range_max {
            return Err(Error::config(format!(
                "spline range must satisfy min < max, got [{range_min}, {range_max}]"
            )));
        }
        let step = (range_max - range_min) / grid_size as f64;
        let n_knots = grid_size + 2 * order - 1;
        let offset = (order - 1) as f64;
        let mut knots: Vec<f64> = (0..n_knots)
            .map(|i| range_min + (i as f64 - offset) * step)
            .collect();
        // pin the range ends so clamped inputs land exactly on a knot
        knots[order - 1] = range_min;
        knots[order - 1 + grid_size] = range_max;
        Ok(Self {
            order,
            grid_size,
            range_min,
            range_max,
            step,
            knots,
        })
    }

    pub fn from_params(p: GridParams) -> Result<Self> {
        Self::try_from(p)
    }

    pub fn params(&self) -> GridParams {
        GridParams {
            order: self.order,
            grid_size: self.grid_size,
            range_min: self.range_min,
            range_max: self.range_max,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_min, self.range_max)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions, `G + k - 1`.
    pub fn num_basis(&self) -> usize {
        self.grid_size + self.order - 1
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.range_min, self.range_max)
    }

    /// Index `s` of the knot interval `[t_s, t_{s+1})` holding a clamped `x`.
    /// The right range end belongs to the last interval.
    fn span(&self, x: f64) -> usize {
        let lo = self.order - 1;
        let hi = self.grid_size + self.order - 2;
        let rel = ((x - self.range_min) / self.step).floor();
        let mut s = if rel.is_nan() || rel <= 0.0 {
            lo
        } else {
            (lo + rel as usize).min(hi)
        };
        while s > lo && x < self.knots[s] {
            s -= 1;
        }
        while s < hi && x >= self.knots[s + 1] {
            s += 1;
        }
        s
    }

    /// Values and first derivatives of the `k` basis functions active at
    /// `x`, after clamping. At a range boundary the derivative is the
    /// one-sided derivative taken from inside the range.
    pub fn local_basis(&self, x: f64) -> LocalBasis {
        let xc = self.clamp(x);
        let clamped = xc != x;
        let p = self.order - 1;
        let s = self.span(xc);
        let t = &self.knots;

        let mut n = [0.0; MAX_ORDER];
        let mut lower = [0.0; MAX_ORDER];
        let mut left = [0.0; MAX_ORDER];
        let mut right = [0.0; MAX_ORDER];
        n[0] = 1.0;
        for j in 1..=p {
            if j == p {
                lower[..p].copy_from_slice(&n[..p]);
            }
            left[j] = xc - t[s + 1 - j];
            right[j] = t[s + j] - xc;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }

        // d/dx B_{i,p} = p * (B_{i,p-1} / (t_{i+p} - t_i) - B_{i+1,p-1} / (t_{i+p+1} - t_{i+1}))
        let mut derivs = [0.0; MAX_ORDER];
        let pf = p as f64;
        for (r, d) in derivs.iter_mut().enumerate().take(p + 1) {
            let i = s - p + r;
            let mut acc = 0.0;
            if r >= 1 {
                acc += lower[r - 1] / (t[i + p] - t[i]);
            }
            if r < p {
                acc -= lower[r] / (t[i + p + 1] - t[i + 1]);
            }
            *d = pf * acc;
        }

        LocalBasis {
            first: s - p,
            values: n,
            derivs,
            clamped,
        }
    }

    /// All `B` basis values at (clamped) `x`.
    pub fn basis_eval(&self, x: f64) -> Vec<f64> {
        let lb = self.local_basis(x);
        let mut out = vec![0.0; self.num_basis()];
        out[lb.first..lb.first + self.order].copy_from_slice(&lb.values[..self.order]);
        out
    }

    /// All `B` basis derivatives at (clamped) `x`.
    pub fn basis_derivative(&self, x: f64) -> Vec<f64> {
        let lb = self.local_basis(x);
        let mut out = vec![0.0; self.num_basis()];
        out[lb.first..lb.first + self.order].copy_from_slice(&lb.derivs[..self.order]);
        out
    }

    /// `sum_i coeffs[i] * B_i(x)`.
    pub fn spline_eval(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        self.check_coeffs(coeffs)?;
        Ok(self.local_basis(x).dot(coeffs, self.order))
    }

    /// Derivative of the spline with respect to `x`; zero where `x` was clamped.
    pub fn spline_derivative(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        self.check_coeffs(coeffs)?;
        let lb = self.local_basis(x);
        if lb.clamped {
            return Ok(0.0);
        }
        Ok(lb.dot_derivs(coeffs, self.order))
    }

    fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.num_basis() {
            return Err(Error::dim(format!(
                "spline expects {} coefficients, got {}",
                self.num_basis(),
                coeffs.len()
            )));
        }
        Ok(())
    }
}

impl LocalBasis {
    /// Spline value for a full coefficient row of length `B`.
    #[inline]
    pub fn dot(&self, coeffs: &[f64], order: usize) -> f64 {
        let c = &coeffs[self.first..self.first + order];
        let mut acc = 0.0;
        for r in 0..order {
            acc += c[r] * self.values[r];
        }
        acc
    }

    #[inline]
    pub fn dot_derivs(&self, coeffs: &[f64], order: usize) -> f64 {
        let c = &coeffs[self.first..self.first + order];
        let mut acc = 0.0;
        for r in 0..order {
            acc += c[r] * self.derivs[r];
        }
        acc
    }
}
